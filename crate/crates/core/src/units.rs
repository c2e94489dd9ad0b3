//! Physical parameters, natural units and derived rates.
//!
//! Internally every time is measured in units of `1/omega_g` and every energy
//! in units of `hbar * omega_g`. Conversion helpers live on [`NaturalUnits`].

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant (J/K).
pub const K_B: f64 = 1.380_649e-23;
/// Atomic mass unit (kg).
pub const AMU: f64 = 1.660_539_066_60e-27;
/// Mass of a ⁵²Cr atom (kg).
pub const CR52_MASS: f64 = 51.940_507_5 * AMU;
/// Default trap angular frequency, 2π × 1 kHz.
pub const DEFAULT_OMEGA_G: f64 = 2.0 * PI * 1.0e3;

/// Harmonic trap for the `|g>` atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapSpec {
    /// Angular frequency (rad/s).
    pub omega_g: f64,
    /// Highest trapped shell.
    pub m_max: usize,
    /// Extra "virtual" shells above `m_max` that are emptied after every event.
    pub virtual_extra: usize,
    /// Atomic mass (kg).
    pub mass: f64,
    /// s-wave scattering length (m).
    pub scattering_length: f64,
}

impl Default for TrapSpec {
    fn default() -> Self {
        Self {
            omega_g: DEFAULT_OMEGA_G,
            m_max: 50,
            virtual_extra: 10,
            mass: CR52_MASS,
            scattering_length: 6.0e-9,
        }
    }
}

impl TrapSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_g > 0.0 && self.omega_g.is_finite()) {
            return Err(Error::invalid("trap.omega_g must be positive"));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::invalid("trap.mass must be positive"));
        }
        if !(self.scattering_length >= 0.0 && self.scattering_length.is_finite()) {
            return Err(Error::invalid("trap.scattering_length must be non-negative"));
        }
        if self.m_max < 1 {
            return Err(Error::invalid("trap.m_max must be at least 1"));
        }
        Ok(())
    }

    /// Total number of simulated shells including the virtual ones.
    pub fn shell_count(&self) -> usize {
        self.m_max + self.virtual_extra + 1
    }

    /// Harmonic oscillator length `sqrt(hbar / (m omega_g))` (m).
    pub fn oscillator_length(&self) -> f64 {
        (HBAR / (self.mass * self.omega_g)).sqrt()
    }

    pub fn units(&self) -> NaturalUnits {
        NaturalUnits { omega_g: self.omega_g }
    }
}

/// Thermal reservoir of `|e>` atoms feeding the trap.
///
/// Only used for advisory estimates of the loading rate and for the
/// large-temperature validity checks; the dynamics take `gamma_eff` directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReservoirSpec {
    /// Half the spontaneous emission rate of the slow line (rad/s).
    pub gamma_eg: f64,
    /// Reservoir density (m⁻³).
    pub n_ex: f64,
    /// Reservoir atom number.
    pub atom_number: f64,
    /// Temperature (K).
    pub temperature: f64,
    /// Trap frequency of the excited state (rad/s).
    pub omega_e: f64,
    /// Recoil frequency (rad/s).
    pub omega_rec: f64,
}

impl Default for ReservoirSpec {
    fn default() -> Self {
        Self {
            gamma_eg: 100.0,
            n_ex: 1.0e16,
            atom_number: 1.0e6,
            temperature: 1.0e-4,
            omega_e: 0.5 * DEFAULT_OMEGA_G,
            omega_rec: 0.0,
        }
    }
}

impl ReservoirSpec {
    /// Thermal de Broglie wavelength `sqrt(2 pi hbar^2 / (M k_B T))` (m).
    pub fn thermal_wavelength(&self, mass: f64) -> f64 {
        (2.0 * PI * HBAR * HBAR / (mass * K_B * self.temperature)).sqrt()
    }

    /// Phase-space density `n_ex * lambda(T)^3`.
    pub fn phase_space_density(&self, mass: f64) -> f64 {
        self.n_ex * self.thermal_wavelength(mass).powi(3)
    }

    /// Highest reservoir energy that can still load the trap (J).
    pub fn max_loading_energy(&self, trap: &TrapSpec) -> f64 {
        HBAR * trap.omega_g * trap.m_max as f64 + HBAR * self.omega_rec
    }
}

/// Time unit `1/omega_g`, energy unit `hbar omega_g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NaturalUnits {
    pub omega_g: f64,
}

impl NaturalUnits {
    pub fn time_to_seconds(&self, t: f64) -> f64 {
        t / self.omega_g
    }

    pub fn seconds_to_time(&self, seconds: f64) -> f64 {
        seconds * self.omega_g
    }

    pub fn rate_to_si(&self, rate: f64) -> f64 {
        rate * self.omega_g
    }

    pub fn rate_from_si(&self, rate_si: f64) -> f64 {
        rate_si / self.omega_g
    }

    pub fn energy_to_joules(&self, energy: f64) -> f64 {
        energy * HBAR * self.omega_g
    }

    pub fn energy_from_joules(&self, joules: f64) -> f64 {
        joules / (HBAR * self.omega_g)
    }
}

/// Number of 3D oscillator states in shell `m`: `(m+1)(m+2)/2`.
pub fn shell_degeneracy(m: usize) -> u64 {
    let m = m as u64;
    (m + 1) * (m + 2) / 2
}

/// Collision unit rate `Delta = 4 a^2 omega_g^2 M / (pi hbar)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionUnitRate {
    /// In units of `omega_g`.
    pub natural: f64,
    /// In s⁻¹.
    pub si: f64,
}

pub fn collision_unit_rate(trap: &TrapSpec) -> CollisionUnitRate {
    let a = trap.scattering_length;
    let si = 4.0 * a * a * trap.omega_g * trap.omega_g * trap.mass / (PI * HBAR);
    let ell = trap.oscillator_length();
    let natural = 4.0 / PI * (a / ell).powi(2);
    CollisionUnitRate { natural, si }
}

/// Which closed form to use for the reservoir loading rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaEffFormula {
    /// `2 gamma_eg N_ex (hbar omega_e / k_B T)^3`.
    ThermalOccupation,
    /// `2 gamma_eg * 5.2 * n_ex lambda(T)^3`, needs the atomic mass.
    PhaseSpaceDensity { mass: f64 },
}

/// Advisory loading rate (s⁻¹) derived from reservoir parameters.
pub fn gamma_eff_from_reservoir(res: &ReservoirSpec, formula: GammaEffFormula) -> Result<f64> {
    if !(res.temperature > 0.0) {
        return Err(Error::invalid("reservoir temperature must be positive"));
    }
    match formula {
        GammaEffFormula::ThermalOccupation => {
            if !(res.omega_e > 0.0) {
                return Err(Error::invalid("reservoir omega_e must be positive"));
            }
            let x = HBAR * res.omega_e / (K_B * res.temperature);
            Ok(2.0 * res.gamma_eg * res.atom_number * x.powi(3))
        }
        GammaEffFormula::PhaseSpaceDensity { mass } => {
            if !(mass > 0.0) {
                return Err(Error::invalid("mass must be positive"));
            }
            Ok(gamma_eff_from_phase_space_density(
                res.gamma_eg,
                res.phase_space_density(mass),
            ))
        }
    }
}

/// `2 gamma_eg * 5.2 * phi`.
pub fn gamma_eff_from_phase_space_density(gamma_eg: f64, phi: f64) -> f64 {
    2.0 * gamma_eg * 5.2 * phi
}

/// One inequality of the large-temperature regime.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidityCondition {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    /// Required `lhs / rhs` for "much greater than" conditions, `None` for strict `<`.
    pub ratio_threshold: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidityReport {
    pub conditions: Vec<ValidityCondition>,
}

impl ValidityReport {
    pub fn all_passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn warnings(&self) -> Vec<String> {
        self.conditions
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{}: lhs={:.4e} rhs={:.4e}", c.name, c.lhs, c.rhs))
            .collect()
    }
}

/// Thresholds for the "much greater than" conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidityThresholds {
    pub temperature_ratio: f64,
    pub density_ratio: f64,
}

impl Default for ValidityThresholds {
    fn default() -> Self {
        Self {
            temperature_ratio: 10.0,
            density_ratio: 10.0,
        }
    }
}

/// Minimum reservoir density (m⁻³) for equal loading of all trap levels:
/// `phi * (M omega_g m~_max / (2 pi hbar))^{3/2}`, `m~_max = m_max + omega_rec/omega_g`.
pub fn density_bound(trap: &TrapSpec, phi: f64, omega_rec: f64) -> f64 {
    let m_eff = trap.m_max as f64 + omega_rec / trap.omega_g;
    phi * (trap.mass * trap.omega_g * m_eff / (2.0 * PI * HBAR)).powf(1.5)
}

/// Checks the conditions under which every trap level is loaded at the same rate.
/// Failures are reported, never raised.
pub fn check_large_temperature_regime(
    trap: &TrapSpec,
    res: &ReservoirSpec,
    thresholds: ValidityThresholds,
) -> ValidityReport {
    let mut conditions = Vec::with_capacity(3);

    let rhs = trap.omega_g + 2.0 * res.omega_rec / 3.0;
    conditions.push(ValidityCondition {
        name: "omega_e < omega_g + 2 omega_rec / 3",
        lhs: res.omega_e,
        rhs,
        ratio_threshold: None,
        passed: res.omega_e < rhs,
    });

    let kt = K_B * res.temperature;
    let e_max = res.max_loading_energy(trap);
    conditions.push(ValidityCondition {
        name: "k_B T >> E_max",
        lhs: kt,
        rhs: e_max,
        ratio_threshold: Some(thresholds.temperature_ratio),
        passed: kt >= thresholds.temperature_ratio * e_max,
    });

    let phi = res.phase_space_density(trap.mass);
    let bound = density_bound(trap, phi, res.omega_rec);
    conditions.push(ValidityCondition {
        name: "n_ex >> phi (M omega_g m_max / 2 pi hbar)^(3/2)",
        lhs: res.n_ex,
        rhs: bound,
        ratio_threshold: Some(thresholds.density_ratio),
        passed: res.n_ex >= thresholds.density_ratio * bound,
    });

    ValidityReport { conditions }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn degeneracy_values() {
        assert_eq!(shell_degeneracy(0), 1);
        assert_eq!(shell_degeneracy(2), 6);
        assert_eq!(shell_degeneracy(50), 1326);
    }

    #[test]
    fn degeneracy_cumulative_is_binomial() {
        let mut sum = 0u64;
        for m in 0..=100usize {
            sum += shell_degeneracy(m);
            let n = m as u64 + 3;
            assert_eq!(sum, n * (n - 1) * (n - 2) / 6, "M = {m}");
        }
    }

    #[test]
    fn delta_for_chromium() {
        let trap = TrapSpec::default();
        let d = collision_unit_rate(&trap);
        assert_relative_eq!(d.si, 1.48, max_relative = 5e-3);
        assert_relative_eq!(d.natural, 2.36e-4, max_relative = 5e-3);
        assert_relative_eq!(d.natural * trap.omega_g, d.si, max_relative = 1e-10);
    }

    #[test]
    fn delta_scaling() {
        let mut trap = TrapSpec::default();
        trap.scattering_length = 0.0;
        assert_eq!(collision_unit_rate(&trap).si, 0.0);
        trap.scattering_length = 3e-9;
        let d1 = collision_unit_rate(&trap).si;
        trap.scattering_length = 6e-9;
        let d2 = collision_unit_rate(&trap).si;
        assert_relative_eq!(d2 / d1, 4.0, max_relative = 1e-12);
    }

    #[test]
    fn gamma_eff_formulas() {
        let mut res = ReservoirSpec::default();
        res.atom_number = 0.0;
        assert_eq!(
            gamma_eff_from_reservoir(&res, GammaEffFormula::ThermalOccupation).unwrap(),
            0.0
        );
        assert_relative_eq!(
            gamma_eff_from_phase_space_density(100.0, 1e-5),
            1.04e-2,
            max_relative = 1e-12
        );

        res.atom_number = 1e6;
        let g1 = gamma_eff_from_reservoir(&res, GammaEffFormula::ThermalOccupation).unwrap();
        res.temperature /= 2.0;
        let g2 = gamma_eff_from_reservoir(&res, GammaEffFormula::ThermalOccupation).unwrap();
        assert_relative_eq!(g2 / g1, 8.0, max_relative = 1e-12);

        res.temperature = 0.0;
        assert!(gamma_eff_from_reservoir(&res, GammaEffFormula::ThermalOccupation).is_err());
        res.temperature = 1e-4;
        res.omega_e = -1.0;
        assert!(gamma_eff_from_reservoir(&res, GammaEffFormula::ThermalOccupation).is_err());
    }

    #[test]
    fn unit_round_trip() {
        let u = TrapSpec::default().units();
        for &x in &[1e-7, 0.35, 16.0, 123.456] {
            let back = u.time_to_seconds(u.seconds_to_time(x));
            assert_relative_eq!(back, x, max_relative = 1e-12);
            let r = u.rate_to_si(u.rate_from_si(x));
            assert_relative_eq!(r, x, max_relative = 1e-12);
            let e = u.energy_from_joules(u.energy_to_joules(x));
            assert_relative_eq!(e, x, max_relative = 1e-12);
        }
    }

    #[test]
    fn validity_conditions() {
        let trap = TrapSpec::default();
        let mut res = ReservoirSpec {
            omega_e: trap.omega_g / 2.0,
            omega_rec: 0.0,
            ..Default::default()
        };
        let report = check_large_temperature_regime(&trap, &res, ValidityThresholds::default());
        assert!(report.conditions[0].passed);

        res.temperature = f64::INFINITY;
        let report = check_large_temperature_regime(&trap, &res, ValidityThresholds::default());
        assert!(report.conditions[1].passed);
    }

    #[test]
    fn chromium_density_bound() {
        let trap = TrapSpec::default();
        let bound_cm3 = density_bound(&trap, 1e-5, 0.0) * 1e-6;
        assert_relative_eq!(bound_cm3, 2.6e9, max_relative = 0.02);
        let direct = 7.45 * 1e-5 * 50f64.powf(1.5) * 1e11;
        assert_relative_eq!(bound_cm3, direct, max_relative = 0.02);
    }
}
