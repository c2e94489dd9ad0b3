//! Experiment configuration: TOML documents, named presets and `key=value`
//! overrides.

use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::bre::ScalingSettings;
use crate::collision::{CollisionBackend, DEFAULT_REFRESH_INTERVAL};
use crate::engine::{log_grid, uniform_grid, SimulationParams, TimeWindow};
use crate::error::{Error, Result};
use crate::observables::OnsetCriterion;
use crate::occupancy::ShellOccupancy;
use crate::pump::{LoadingConfig, LoadingMode, OutcouplingPolicy};
use crate::units::{collision_unit_rate, ReservoirSpec, TrapSpec, DEFAULT_OMEGA_G};

/// What an experiment measures after running its ensembles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Growth from an empty trap; onset and final populations.
    #[default]
    Loading,
    /// Outcoupling-ratio scan of a grown condensate.
    Threshold,
    /// Long outcoupled run with window statistics.
    Stabilization,
    /// Closed system relaxing to Bose-Einstein equilibrium.
    Thermalization,
    /// Order-by-order reabsorption probabilities on a reduced Λ system.
    BreScaling,
}

/// Unit of `loading.gamma_eff`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateUnit {
    /// Multiples of the trap frequency.
    #[default]
    OmegaG,
    /// s⁻¹, divided by `trap.omega_g` internally.
    PerSecond,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadingSection {
    pub gamma_eff: f64,
    pub unit: RateUnit,
    pub mode: LoadingMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_load_shell: Option<usize>,
}

impl Default for LoadingSection {
    fn default() -> Self {
        let base = LoadingConfig::default();
        Self {
            gamma_eff: base.gamma_eff,
            unit: RateUnit::OmegaG,
            mode: base.mode,
            max_load_shell: base.max_load_shell,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyName {
    #[default]
    Off,
    Constant,
    Randomized,
}

/// Flat form of [`OutcouplingPolicy`]; fields not used by `policy` must be absent.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcouplingSection {
    pub policy: PolicyName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resample_interval: Option<f64>,
    /// Units of `1/omega_g`.
    #[serde(default)]
    pub start_time: f64,
}

/// 10 ms at 1 kHz.
pub const DEFAULT_RESAMPLE_INTERVAL: f64 = 0.02 * PI * 1000.0;

impl OutcouplingSection {
    pub fn policy(&self) -> Result<OutcouplingPolicy> {
        let unused = |name: &str, v: Option<f64>| match v {
            Some(_) => Err(Error::config(format!(
                "outcoupling.{name} is not used by policy `{:?}`",
                self.policy
            ))),
            None => Ok(()),
        };
        let p = match self.policy {
            PolicyName::Off => {
                unused("xi", self.xi)?;
                unused("c", self.c)?;
                unused("f_max", self.f_max)?;
                unused("resample_interval", self.resample_interval)?;
                OutcouplingPolicy {
                    start_time: self.start_time,
                    ..OutcouplingPolicy::off()
                }
            }
            PolicyName::Constant => {
                unused("c", self.c)?;
                unused("f_max", self.f_max)?;
                unused("resample_interval", self.resample_interval)?;
                let xi = self
                    .xi
                    .ok_or_else(|| Error::config("outcoupling.xi is required for the constant policy"))?;
                OutcouplingPolicy::constant(xi, self.start_time)
            }
            PolicyName::Randomized => {
                unused("xi", self.xi)?;
                let c = self
                    .c
                    .ok_or_else(|| Error::config("outcoupling.c is required for the randomized policy"))?;
                let f_max = self
                    .f_max
                    .ok_or_else(|| Error::config("outcoupling.f_max is required for the randomized policy"))?;
                OutcouplingPolicy::randomized(
                    c,
                    f_max,
                    self.resample_interval.unwrap_or(DEFAULT_RESAMPLE_INTERVAL),
                    self.start_time,
                )
            }
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    #[default]
    Uniform,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Units of `1/omega_g`.
    pub t_end: f64,
    pub samples: usize,
    pub grid: GridKind,
    pub evaporation: bool,
    pub backend: CollisionBackend,
    pub refresh_interval: u64,
    /// Collision unit rate override (units of `omega_g`); derived from the trap otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_events: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats_window: Option<TimeWindow>,
    /// Initial shell counts; empty trap otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<u64>>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            t_end: 1.0e4,
            samples: 200,
            grid: GridKind::Uniform,
            evaporation: true,
            backend: CollisionBackend::default(),
            refresh_interval: DEFAULT_REFRESH_INTERVAL,
            delta: None,
            max_events: None,
            stats_window: None,
            initial: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservablesSection {
    pub onset: OnsetCriterion,
    /// Fraction of the pre-outcoupling condensate a threshold scan must retain.
    pub retention: f64,
    /// Bisection steps after the threshold grid.
    pub threshold_refine: usize,
    /// Pre-outcoupling condensate; measured at the outcoupling start when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_n0: Option<f64>,
    /// Extraction rate (atoms/s) reported alongside stabilization runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_extraction_rate: Option<f64>,
    /// Shells with fewer mean atoms are left out of the Bose-Einstein comparison.
    pub be_min_count: f64,
}

impl Default for ObservablesSection {
    fn default() -> Self {
        Self {
            onset: OnsetCriterion::default(),
            retention: 0.5,
            threshold_refine: 0,
            reference_n0: None,
            reference_extraction_rate: None,
            be_min_count: 5.0,
        }
    }
}

/// One parameter varied over a list of values; each value is applied as an override.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    /// Dotted key, e.g. `loading.gamma_eff`.
    pub parameter: String,
    pub values: Vec<toml::Value>,
    /// Per-point horizon; `run.t_end` for every point when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub realizations: usize,
    #[serde(default)]
    pub trap: TrapSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reservoir: Option<ReservoirSpec>,
    #[serde(default)]
    pub loading: LoadingSection,
    #[serde(default)]
    pub outcoupling: OutcouplingSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub observables: ObservablesSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bre: Option<ScalingSettings>,
    #[serde(default)]
    pub output: OutputSection,
}

fn one() -> usize {
    1
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "custom".into(),
            description: String::new(),
            kind: ExperimentKind::default(),
            seed: 0,
            realizations: 1,
            trap: TrapSpec::default(),
            reservoir: None,
            loading: LoadingSection::default(),
            outcoupling: OutcouplingSection::default(),
            run: RunSection::default(),
            observables: ObservablesSection::default(),
            scan: None,
            bre: None,
            output: OutputSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    /// Loading rate in units of `omega_g`.
    pub fn gamma_eff_natural(&self) -> f64 {
        match self.loading.unit {
            RateUnit::OmegaG => self.loading.gamma_eff,
            RateUnit::PerSecond => self.loading.gamma_eff / self.trap.omega_g,
        }
    }

    /// Collision unit rate used by the run (units of `omega_g`).
    pub fn delta(&self) -> f64 {
        self.run
            .delta
            .unwrap_or_else(|| collision_unit_rate(&self.trap).natural)
    }

    pub fn validate(&self) -> Result<()> {
        if self.realizations == 0 {
            return Err(Error::config("realizations must be at least 1"));
        }
        if self.kind == ExperimentKind::BreScaling {
            return match &self.bre {
                Some(b) => b.validate(),
                None => Err(Error::config("bre-scaling experiments need a [bre] section")),
            };
        }
        if let Some(scan) = &self.scan {
            if scan.values.is_empty() {
                return Err(Error::config("scan.values is empty"));
            }
            if let Some(t) = &scan.t_end {
                if t.len() != scan.values.len() {
                    return Err(Error::config("scan.t_end must have one entry per scan value"));
                }
            }
        }
        if !(self.observables.retention > 0.0 && self.observables.retention < 1.0) {
            return Err(Error::config("observables.retention must lie in (0, 1)"));
        }
        self.observables.onset.validate()?;
        for point in self.scan_points()? {
            point.config.simulation_params()?.validate()?;
        }
        Ok(())
    }

    /// Engine parameters of this (already resolved) configuration.
    pub fn simulation_params(&self) -> Result<SimulationParams> {
        let loading = LoadingConfig {
            gamma_eff: self.gamma_eff_natural(),
            mode: self.loading.mode,
            max_load_shell: self.loading.max_load_shell,
        };
        let run = &self.run;
        let mut grid = match run.grid {
            GridKind::Uniform => uniform_grid(run.t_end, run.samples),
            GridKind::Log => log_grid((run.t_end * 1e-4).max(1e-3), run.t_end, run.samples),
        };
        let outcoupling = self.outcoupling.policy()?;
        if !outcoupling.is_off() && outcoupling.start_time > 0.0 && outcoupling.start_time < run.t_end {
            grid.push(outcoupling.start_time);
            grid.sort_by(f64::total_cmp);
            grid.dedup();
        }
        let mut p = SimulationParams::new(self.trap.clone(), loading, run.t_end, run.samples);
        p.sample_grid = grid;
        p.outcoupling = outcoupling;
        p.delta = self.delta();
        p.seed = self.seed;
        p.realizations = self.realizations;
        p.evaporation = run.evaporation;
        p.backend = run.backend;
        p.refresh_interval = run.refresh_interval;
        p.max_events = run.max_events;
        p.stats_window = run.stats_window;
        p.initial = run.initial.clone().map(ShellOccupancy::from_counts);
        Ok(p)
    }

    /// One resolved configuration per scan value (or `self` alone).
    pub fn scan_points(&self) -> Result<Vec<ScanPoint>> {
        let Some(scan) = &self.scan else {
            return Ok(vec![ScanPoint {
                label: String::new(),
                value: None,
                config: self.clone(),
            }]);
        };
        let mut base = self.clone();
        base.scan = None;
        scan.values
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let mut doc = base.to_value()?;
                set_path(&mut doc, &scan.parameter, v.clone())?;
                if let Some(t) = &scan.t_end {
                    set_path(&mut doc, "run.t_end", toml::Value::Float(t[k]))?;
                }
                let config = Self::from_value(doc)?;
                Ok(ScanPoint {
                    label: format!("{}={}", scan.parameter, v),
                    value: Some(v.clone()),
                    config,
                })
            })
            .collect()
    }

    fn to_value(&self) -> Result<toml::Value> {
        toml::Value::try_from(self).map_err(|e| Error::config(e.to_string()))
    }

    fn from_value(v: toml::Value) -> Result<Self> {
        v.try_into().map_err(|e: toml::de::Error| Error::config(e.to_string()))
    }

    /// Applies `key=value` overrides. Keys are dotted paths (`trap.m_max`) or
    /// a bare field name that occurs exactly once in the document.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut doc = self.to_value()?;
        for o in overrides {
            let (key, raw) = o
                .as_ref()
                .split_once('=')
                .ok_or_else(|| Error::config(format!("override `{}` is not key=value", o.as_ref())))?;
            let key = key.trim();
            let path = resolve_key(&doc, key)?;
            set_path(&mut doc, &path, parse_value(raw.trim()))?;
        }
        let out = Self::from_value(doc)?;
        out.validate()?;
        Ok(out)
    }
}

/// A configuration with one scan value applied.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub label: String,
    pub value: Option<toml::Value>,
    pub config: ExperimentConfig,
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn leaf_paths(v: &toml::Value, prefix: &str, out: &mut Vec<String>) {
    if let toml::Value::Table(t) = v {
        for (k, child) in t {
            let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            out.push(p.clone());
            leaf_paths(child, &p, out);
        }
    }
}

/// Known optional fields that are absent from a dump but may be set.
const OPTIONAL_KEYS: &[&str] = &[
    "loading.max_load_shell",
    "outcoupling.xi",
    "outcoupling.c",
    "outcoupling.f_max",
    "outcoupling.resample_interval",
    "run.delta",
    "run.max_events",
    "run.stats_window",
    "run.initial",
    "observables.reference_n0",
    "observables.reference_extraction_rate",
];

fn resolve_key(doc: &toml::Value, key: &str) -> Result<String> {
    if key.contains('.') {
        return Ok(key.to_string());
    }
    let mut paths = Vec::new();
    leaf_paths(doc, "", &mut paths);
    paths.extend(OPTIONAL_KEYS.iter().map(|s| s.to_string()));
    paths.sort();
    paths.dedup();
    let hits: Vec<&String> = paths
        .iter()
        .filter(|p| p.as_str() == key || p.ends_with(&format!(".{key}")))
        .collect();
    match hits.as_slice() {
        [one] => Ok((*one).clone()),
        [] => Err(Error::config(format!("unknown configuration key `{key}`"))),
        many => Err(Error::config(format!(
            "ambiguous key `{key}`; use one of: {}",
            many.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
        ))),
    }
}

fn set_path(doc: &mut toml::Value, path: &str, value: toml::Value) -> Result<()> {
    let mut cur = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = cur
            .as_table_mut()
            .ok_or_else(|| Error::config(format!("`{path}` does not name a table field")))?;
        if i + 1 == parts.len() {
            // Integers are accepted where floats are expected and vice versa
            // for whole numbers, so `t_end=100000` and `m_max=30.0` both work.
            let v = match (table.get(*part), value) {
                (Some(toml::Value::Float(_)), toml::Value::Integer(n)) => toml::Value::Float(n as f64),
                (Some(toml::Value::Integer(_)), toml::Value::Float(f)) if f.fract() == 0.0 => {
                    toml::Value::Integer(f as i64)
                }
                (_, v) => v,
            };
            table.insert(part.to_string(), v);
            return Ok(());
        }
        cur = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    Ok(())
}

/// Names accepted by [`preset`].
pub const PRESET_NAMES: &[&str] = &[
    "fig3",
    "fig4",
    "fig5",
    "fig6",
    "fig7",
    "fig8",
    "thermalization",
    "bre-scaling",
];

/// `0.35 s` in units of `1/omega_g` at 1 kHz.
pub const GROWTH_TIME: f64 = 0.35 * DEFAULT_OMEGA_G;

fn seconds(s: f64) -> f64 {
    s * DEFAULT_OMEGA_G
}

fn growth_base(name: &str) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        realizations: 4,
        trap: TrapSpec {
            m_max: 50,
            ..TrapSpec::default()
        },
        loading: LoadingSection {
            gamma_eff: 0.01,
            unit: RateUnit::PerSecond,
            mode: LoadingMode::PerStateErgodic,
            max_load_shell: None,
        },
        run: RunSection {
            t_end: 1.0e5,
            samples: 400,
            ..RunSection::default()
        },
        output: OutputSection {
            dir: PathBuf::from("out").join(name),
        },
        ..ExperimentConfig::default()
    }
}

// 6.28 is a loading rate in s⁻¹, not 2π.
#[allow(clippy::approx_constant)]
fn outcoupled_base(name: &str, t_after: f64) -> ExperimentConfig {
    let mut c = growth_base(name);
    c.trap.m_max = 10;
    c.loading.gamma_eff = 6.28;
    c.outcoupling.start_time = GROWTH_TIME;
    c.run.t_end = GROWTH_TIME + t_after;
    c.run.samples = 800;
    c
}

/// Fully expanded configuration of a named experiment.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let cfg = match name {
        "fig3" => {
            let mut c = growth_base(name);
            c.description = "Growth from an empty trap: populations, condensate fraction and energy per particle".into();
            c.realizations = 10;
            c
        }
        "fig4" => {
            let mut c = growth_base(name);
            c.description = "Condensate growth for three loading rates".into();
            c.scan = Some(ScanSection {
                parameter: "loading.gamma_eff".into(),
                values: [0.01, 0.1, 1.0].map(toml::Value::Float).to_vec(),
                t_end: Some(vec![1.0e5, 1.2e4, 2.5e3]),
            });
            c
        }
        "fig5" => {
            let mut c = growth_base(name);
            c.description = "Condensate growth for three scattering lengths".into();
            c.scan = Some(ScanSection {
                parameter: "trap.scattering_length".into(),
                values: [1.25e-9, 6.0e-9, 24.0e-9].map(toml::Value::Float).to_vec(),
                t_end: Some(vec![1.2e5, 1.0e5, 3.5e4]),
            });
            c
        }
        "fig6" => {
            let mut c = growth_base(name);
            c.description = "Growth for two trap depths".into();
            c.realizations = 3;
            c.scan = Some(ScanSection {
                parameter: "trap.m_max".into(),
                values: [30, 60].map(toml::Value::Integer).to_vec(),
                t_end: None,
            });
            c
        }
        "fig7" => {
            let mut c = outcoupled_base(name, seconds(16.0));
            c.description = "Condensate left after 16 s of outcoupling versus the outcoupling ratio".into();
            c.kind = ExperimentKind::Threshold;
            c.outcoupling.policy = PolicyName::Constant;
            c.outcoupling.xi = Some(1.0);
            c.run.samples = 400;
            c.scan = Some(ScanSection {
                parameter: "outcoupling.xi".into(),
                values: [1.0, 1.05, 1.1, 1.15, 1.2, 1.3, 1.5, 2.0]
                    .map(toml::Value::Float)
                    .to_vec(),
                t_end: None,
            });
            c
        }
        "fig8" => {
            let mut c = outcoupled_base(name, seconds(40.0));
            c.description = "Condensate held by a randomized outcoupling ratio for 40 s".into();
            c.kind = ExperimentKind::Stabilization;
            c.outcoupling.policy = PolicyName::Randomized;
            c.outcoupling.c = Some(1.17);
            c.outcoupling.f_max = Some(0.05);
            c.outcoupling.resample_interval = Some(DEFAULT_RESAMPLE_INTERVAL);
            c.run.stats_window = Some(TimeWindow {
                start: GROWTH_TIME,
                end: c.run.t_end,
            });
            c.observables.reference_extraction_rate = Some(7500.0);
            c
        }
        "thermalization" => {
            let shells = 15;
            let mut initial = vec![0u64; shells];
            initial[2] = 100;
            initial[8] = 100;
            ExperimentConfig {
                name: name.into(),
                description: "Closed gas of 200 atoms on 15 shells relaxing to Bose-Einstein equilibrium".into(),
                kind: ExperimentKind::Thermalization,
                realizations: 4,
                trap: TrapSpec {
                    m_max: shells - 1,
                    virtual_extra: 0,
                    ..TrapSpec::default()
                },
                loading: LoadingSection {
                    gamma_eff: 0.0,
                    ..LoadingSection::default()
                },
                run: RunSection {
                    t_end: 200.0,
                    samples: 200,
                    evaporation: false,
                    delta: Some(1.0),
                    stats_window: Some(TimeWindow { start: 40.0, end: 200.0 }),
                    initial: Some(initial),
                    ..RunSection::default()
                },
                output: OutputSection {
                    dir: PathBuf::from("out").join(name),
                },
                ..ExperimentConfig::default()
            }
        }
        "bre-scaling" => ExperimentConfig {
            name: name.into(),
            description: "Reabsorption probabilities of a single pumped atom versus epsilon and N0".into(),
            kind: ExperimentKind::BreScaling,
            bre: Some(ScalingSettings::default()),
            output: OutputSection {
                dir: PathBuf::from("out").join(name),
            },
            ..ExperimentConfig::default()
        },
        _ => {
            return Err(Error::UnknownPreset {
                name: name.into(),
                available: PRESET_NAMES.join(", "),
            })
        }
    };
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip_and_validate() {
        for name in PRESET_NAMES {
            let c = preset(name).unwrap();
            let text = c.to_toml().unwrap();
            let back = ExperimentConfig::from_toml(&text).unwrap();
            assert_eq!(back, c, "{name}");
            c.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn unknown_preset_lists_names() {
        let e = preset("fig9").unwrap_err().to_string();
        assert!(e.contains("fig3") && e.contains("bre-scaling"), "{e}");
    }

    #[test]
    fn preset_values() {
        let f3 = preset("fig3").unwrap();
        assert_eq!(f3.loading.gamma_eff, 0.01);
        assert_eq!(f3.trap.m_max, 50);
        assert!((f3.trap.scattering_length - 6e-9).abs() < 1e-20);
        let f7 = preset("fig7").unwrap();
        assert!((f7.outcoupling.start_time - 2199.114_857_512_855).abs() < 1e-9);
        let p8 = preset("fig8").unwrap().outcoupling.policy().unwrap();
        assert_eq!(p8, OutcouplingPolicy::randomized(1.17, 0.05, DEFAULT_RESAMPLE_INTERVAL, GROWTH_TIME));
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = "name = \"x\"\n[trap]\nomega_g = 1.0\nm_max = 3\nvirtual_extra = 0\nmass = 1.0\nscattering_length = 0.0\nbogus = 2\n";
        assert!(ExperimentConfig::from_toml(bad).is_err());
        let typo = "name = \"x\"\n[loading]\ngamma_ef = 1.0\n";
        assert!(ExperimentConfig::from_toml(typo).is_err());
        let c = preset("fig3").unwrap();
        assert!(c.with_overrides(&["trap.m_maxx=3"]).is_err());
        assert!(c.with_overrides(&["nonsense=3"]).is_err());
        assert!(c.with_overrides(&["novalue"]).is_err());
    }

    #[test]
    fn overrides_apply() {
        let c = preset("fig3").unwrap();
        let o = c
            .with_overrides(&["gamma_eff=0", "trap.m_max=30", "run.t_end=5e3", "seed=7"])
            .unwrap();
        assert_eq!(o.loading.gamma_eff, 0.0);
        assert_eq!(o.trap.m_max, 30);
        assert_eq!(o.run.t_end, 5e3);
        assert_eq!(o.seed, 7);
        let w = c.with_overrides(&["run.stats_window={start=1.0, end=2.0}"]).unwrap();
        assert_eq!(w.run.stats_window, Some(TimeWindow { start: 1.0, end: 2.0 }));
        assert!(c.with_overrides(&["outcoupling.xi=1.2"]).is_err());
    }

    #[test]
    fn scan_points_resolve() {
        let pts = preset("fig4").unwrap().scan_points().unwrap();
        assert_eq!(pts.len(), 3);
        assert_eq!(pts[1].config.loading.gamma_eff, 0.1);
        assert_eq!(pts[2].config.run.t_end, 2.5e3);
        let pts = preset("fig6").unwrap().scan_points().unwrap();
        assert_eq!(pts[1].config.trap.m_max, 60);
    }

    #[test]
    fn per_second_rates_convert() {
        let c = preset("fig7").unwrap();
        assert_eq!(c.loading.unit, RateUnit::PerSecond);
        assert!((c.gamma_eff_natural() - c.loading.gamma_eff / DEFAULT_OMEGA_G).abs() < 1e-15);
    }
}
