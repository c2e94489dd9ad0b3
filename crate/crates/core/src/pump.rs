//! Loading from the reservoir, evaporation above the trap depth and
//! condensate outcoupling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::occupancy::ShellOccupancy;
use crate::units::shell_degeneracy;

/// How the per-state loading rate `gamma_eff (N_n + 1)` is lifted to shells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoadingMode {
    /// Every one of the `g_m` states of a shell is loaded at
    /// `gamma_eff (N_m/g_m + 1)`, so the shell rate is `gamma_eff (N_m + g_m)`.
    PerStateErgodic,
    /// The shell is treated as a single level: `gamma_eff (N_m + 1)`.
    #[default]
    PerShell,
}

impl LoadingMode {
    /// Spontaneous (non-stimulated) part of the shell rate, in units of `gamma_eff`.
    #[inline]
    pub fn seed_weight(self, m: usize) -> u64 {
        match self {
            LoadingMode::PerStateErgodic => shell_degeneracy(m),
            LoadingMode::PerShell => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadingConfig {
    /// Loading rate in units of `omega_g`.
    pub gamma_eff: f64,
    pub mode: LoadingMode,
    /// Highest shell that receives atoms; `None` loads every simulated shell,
    /// virtual ones included.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_load_shell: Option<usize>,
}

impl Default for LoadingConfig {
    fn default() -> Self {
        Self {
            gamma_eff: 0.01,
            mode: LoadingMode::PerShell,
            max_load_shell: None,
        }
    }
}

impl LoadingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_eff >= 0.0 && self.gamma_eff.is_finite()) {
            return Err(Error::invalid("loading.gamma_eff must be non-negative"));
        }
        Ok(())
    }

    /// Index one past the last loaded shell for a trap of `shells` shells.
    pub fn load_end(&self, shells: usize) -> usize {
        self.max_load_shell.map_or(shells, |m| (m + 1).min(shells))
    }
}

/// Per-shell loading rates `Λ_m` (units of `omega_g`).
pub fn loading_rates(state: &ShellOccupancy, cfg: &LoadingConfig) -> Vec<f64> {
    let end = cfg.load_end(state.shell_count());
    (0..state.shell_count())
        .map(|m| {
            if m < end {
                cfg.gamma_eff * (state.get(m) + cfg.mode.seed_weight(m)) as f64
            } else {
                0.0
            }
        })
        .collect()
}

/// Empties every shell above `m_max`, returning the number of atoms removed.
pub fn apply_evaporation(state: &mut ShellOccupancy, m_max: usize) -> u64 {
    (m_max + 1..state.shell_count())
        .map(|m| state.clear_shell(m))
        .sum()
}

/// Outcoupling schedule of the condensate shell.
///
/// Outcoupling rates are expressed relative to the loading rate:
/// `gamma_out = xi * gamma_eff`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OutcouplingKind {
    Off,
    /// Fixed `xi = gamma_out / gamma_eff`.
    Constant { xi: f64 },
    /// `gamma_out(t) = (c - f(t)) gamma_eff` with `f ~ U[0, f_max]` redrawn
    /// every `resample_interval`.
    Randomized {
        c: f64,
        f_max: f64,
        resample_interval: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcouplingPolicy {
    #[serde(flatten)]
    pub kind: OutcouplingKind,
    /// Time (units of `1/omega_g`) at which outcoupling switches on.
    pub start_time: f64,
}

impl Default for OutcouplingPolicy {
    fn default() -> Self {
        Self::off()
    }
}

impl OutcouplingPolicy {
    pub fn off() -> Self {
        Self {
            kind: OutcouplingKind::Off,
            start_time: 0.0,
        }
    }

    pub fn constant(xi: f64, start_time: f64) -> Self {
        Self {
            kind: OutcouplingKind::Constant { xi },
            start_time,
        }
    }

    pub fn randomized(c: f64, f_max: f64, resample_interval: f64, start_time: f64) -> Self {
        Self {
            kind: OutcouplingKind::Randomized {
                c,
                f_max,
                resample_interval,
            },
            start_time,
        }
    }

    pub fn is_off(&self) -> bool {
        matches!(self.kind, OutcouplingKind::Off)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start_time >= 0.0 && self.start_time.is_finite()) {
            return Err(Error::invalid("outcoupling.start_time must be non-negative"));
        }
        match self.kind {
            OutcouplingKind::Off => Ok(()),
            OutcouplingKind::Constant { xi } => {
                if xi >= 0.0 && xi.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid("outcoupling.xi must be non-negative"))
                }
            }
            OutcouplingKind::Randomized {
                c,
                f_max,
                resample_interval,
            } => {
                if !(f_max >= 0.0 && f_max < c && c.is_finite()) {
                    return Err(Error::invalid("randomized outcoupling needs 0 <= f_max < c"));
                }
                if !(resample_interval > 0.0 && resample_interval.is_finite()) {
                    return Err(Error::invalid("outcoupling.resample_interval must be positive"));
                }
                Ok(())
            }
        }
    }
}

/// Outcoupling rate `gamma_out(t) N_0` for a given value of the random offset `f`.
///
/// `f` is ignored unless the policy is randomized.
pub fn outcoupling_rate(
    policy: &OutcouplingPolicy,
    t: f64,
    state: &ShellOccupancy,
    gamma_eff: f64,
    f: f64,
) -> f64 {
    if t < policy.start_time || state.condensate() == 0 {
        return 0.0;
    }
    let xi = match policy.kind {
        OutcouplingKind::Off => 0.0,
        OutcouplingKind::Constant { xi } => xi,
        OutcouplingKind::Randomized { c, .. } => c - f,
    };
    xi * gamma_eff * state.condensate() as f64
}

/// Trajectory-owned state of the (possibly randomized) outcoupling.
#[derive(Debug, Clone)]
pub struct OutcouplingProcess {
    policy: OutcouplingPolicy,
    f: f64,
    next_change: f64,
    active: bool,
}

impl OutcouplingProcess {
    pub fn new(policy: OutcouplingPolicy) -> Self {
        let next_change = if policy.is_off() {
            f64::INFINITY
        } else {
            policy.start_time
        };
        Self {
            policy,
            f: 0.0,
            next_change,
            active: false,
        }
    }

    pub fn policy(&self) -> &OutcouplingPolicy {
        &self.policy
    }

    /// Current random offset `f(t)` (zero for non-randomized policies).
    pub fn offset(&self) -> f64 {
        self.f
    }

    /// Next time at which the outcoupling rate per atom changes.
    pub fn next_change(&self) -> f64 {
        self.next_change
    }

    /// Current `gamma_out / gamma_eff`.
    pub fn xi(&self) -> f64 {
        if !self.active {
            return 0.0;
        }
        match self.policy.kind {
            OutcouplingKind::Off => 0.0,
            OutcouplingKind::Constant { xi } => xi,
            OutcouplingKind::Randomized { c, .. } => c - self.f,
        }
    }

    /// Handles the rate change at `next_change()`, drawing a new `f` when randomized.
    pub fn advance<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<f64> {
        self.active = true;
        match self.policy.kind {
            OutcouplingKind::Off => {
                self.next_change = f64::INFINITY;
                None
            }
            OutcouplingKind::Constant { .. } => {
                self.next_change = f64::INFINITY;
                None
            }
            OutcouplingKind::Randomized {
                f_max,
                resample_interval,
                ..
            } => {
                self.f = f_max * rng.gen::<f64>();
                self.next_change += resample_interval;
                Some(self.f)
            }
        }
    }

    /// Skips ahead so that the process is in its state for time `t`, as when a
    /// trajectory is resumed from a checkpoint past the start time.
    pub fn fast_forward<R: Rng + ?Sized>(&mut self, t: f64, rng: &mut R) {
        while self.next_change <= t {
            self.advance(rng);
        }
    }
}
