//! Runs configured experiments and writes their CSV and JSON outputs.
//!
//! Output layout inside the output directory:
//! `point_{k}_trajectory.csv` (replica 0), `point_{k}_mean.csv` (ensemble
//! mean with standard errors), `summary.json`, and for reabsorption studies
//! `bre_points.csv`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::bre::{scaling_report, ScalingReport};
use crate::config::{ExperimentConfig, ExperimentKind, RateUnit};
use crate::engine::{ensemble, Ensemble, EnsembleSummary, Sample, Trajectory};
use crate::error::{Error, Result};
use crate::observables::{
    ensemble_onset, ensemble_stabilization, fit_bose_einstein, max_relative_deviation, onset_time,
    threshold_bracket, BoseEinsteinFit, EnsembleStabilization, OnsetCriterion, ThresholdBracket, ThresholdPoint,
};
use crate::pump::{LoadingMode, OutcouplingKind};
use crate::units::{check_large_temperature_regime, ValidityThresholds};

pub const SCHEMA_VERSION: u32 = 1;
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Column order of every trajectory and ensemble CSV.
pub const CSV_COLUMNS: [&str; 10] = [
    "t",
    "N",
    "N0",
    "fraction",
    "energy_per_particle",
    "cum_evaporated",
    "cum_outcoupled",
    "cum_not_trapped",
    "events_total",
    "t_seconds",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OnsetReport {
    pub criterion: OnsetCriterion,
    /// Onset of the ensemble-mean trajectory (units of `1/omega_g`).
    pub time: Option<f64>,
    pub time_seconds: Option<f64>,
    /// Onset of each replica on its own.
    pub per_replica: Vec<Option<f64>>,
    pub replicas_reached: usize,
    pub replica_mean: Option<f64>,
    pub replica_stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinalValues {
    pub t: f64,
    pub t_seconds: f64,
    pub n: f64,
    pub n_se: f64,
    pub n0: f64,
    pub n0_se: f64,
    pub fraction: f64,
    pub fraction_se: f64,
    pub energy_per_particle: Option<f64>,
    pub energy_per_particle_se: Option<f64>,
    pub cum_evaporated: f64,
    pub cum_outcoupled: f64,
    pub cum_not_trapped: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSummary {
    pub index: usize,
    pub label: String,
    pub parameter_value: Option<serde_json::Value>,
    pub t_end: f64,
    pub gamma_eff_natural: f64,
    pub delta: f64,
    pub onset: OnsetReport,
    #[serde(rename = "final")]
    pub final_values: FinalValues,
    /// Mean and standard error of `N0` at the outcoupling start.
    pub n0_at_outcoupling_start: Option<(f64, f64)>,
    pub xi: Option<f64>,
    pub events_total_mean: f64,
    pub truncated_replicas: usize,
    pub stabilization: Option<EnsembleStabilization>,
    pub trajectory_csv: String,
    pub mean_csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdSummary {
    pub reference_n0: f64,
    pub reference_measured: bool,
    pub retention: f64,
    pub points: Vec<ThresholdPoint>,
    pub bracket: ThresholdBracket,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilizationSummary {
    pub stats: EnsembleStabilization,
    pub relative_std_within_run: f64,
    pub relative_std_pooled: f64,
    pub window_seconds: f64,
    /// Condensate never emptied inside the window, in every replica.
    pub held_full_window: bool,
    pub extraction_rate_per_second: f64,
    pub reference_extraction_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThermalizationSummary {
    pub n_total: f64,
    pub excitation: f64,
    pub mean_counts: Vec<f64>,
    pub fit: BoseEinsteinFit,
    pub min_count: f64,
    pub max_relative_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub code_version: &'static str,
    pub name: String,
    pub kind: ExperimentKind,
    pub seed: u64,
    pub realizations: usize,
    pub loading_mode: LoadingMode,
    pub gamma_eff_unit: RateUnit,
    pub omega_g: f64,
    pub points: Vec<PointSummary>,
    pub threshold: Option<ThresholdSummary>,
    pub stabilization: Option<StabilizationSummary>,
    pub thermalization: Option<ThermalizationSummary>,
    pub bre: Option<ScalingReport>,
    pub validity_warnings: Vec<String>,
    /// Configuration that produced the run. `output.dir` is reset to its
    /// default so the summary does not depend on where it was written.
    pub config: ExperimentConfig,
}

/// In-memory result of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub summary: Summary,
    pub ensembles: Vec<Ensemble>,
}

fn opt_finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn onset_report(ens: &Ensemble, crit: &OnsetCriterion, omega_g: f64) -> OnsetReport {
    let time = ensemble_onset(&ens.summary, crit);
    let per_replica: Vec<Option<f64>> = ens
        .trajectories
        .iter()
        .map(|tr| {
            let t: Vec<f64> = tr.samples.iter().map(|s| s.t).collect();
            let n0: Vec<f64> = tr.samples.iter().map(|s| s.n0 as f64).collect();
            let f: Vec<f64> = tr.samples.iter().map(Sample::fraction).collect();
            onset_time(&t, &n0, &f, crit)
        })
        .collect();
    let reached: Vec<f64> = per_replica.iter().flatten().copied().collect();
    let k = reached.len();
    let mean = (k > 0).then(|| reached.iter().sum::<f64>() / k as f64);
    let stderr = mean.filter(|_| k > 1).map(|m| {
        (reached.iter().map(|x| (x - m).powi(2)).sum::<f64>() / ((k - 1) * k) as f64).sqrt()
    });
    OnsetReport {
        criterion: *crit,
        time,
        time_seconds: time.map(|t| t / omega_g),
        per_replica,
        replicas_reached: k,
        replica_mean: mean,
        replica_stderr: stderr,
    }
}

fn final_values(s: &EnsembleSummary, omega_g: f64) -> FinalValues {
    let k = s.len().saturating_sub(1);
    let at = |c: &crate::engine::Column| (c.mean.get(k).copied().unwrap_or(f64::NAN), c.stderr.get(k).copied().unwrap_or(f64::NAN));
    let t = s.t.get(k).copied().unwrap_or(0.0);
    let (n, n_se) = at(&s.n);
    let (n0, n0_se) = at(&s.n0);
    let (fraction, fraction_se) = at(&s.fraction);
    let (e, e_se) = at(&s.energy_per_particle);
    FinalValues {
        t,
        t_seconds: t / omega_g,
        n,
        n_se,
        n0,
        n0_se,
        fraction,
        fraction_se,
        energy_per_particle: opt_finite(e),
        energy_per_particle_se: opt_finite(e_se),
        cum_evaporated: at(&s.cum_evaporated).0,
        cum_outcoupled: at(&s.cum_outcoupled).0,
        cum_not_trapped: at(&s.cum_not_trapped).0,
    }
}

fn n0_at(s: &EnsembleSummary, t: f64) -> Option<(f64, f64)> {
    let k = s.t.iter().rposition(|&x| x <= t)?;
    Some((s.n0.mean[k], s.n0.stderr[k]))
}

/// Runs every scan point of `config` and the kind-specific analysis. No files are written.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let omega_g = config.trap.omega_g;
    let mut summary = Summary {
        schema_version: SCHEMA_VERSION,
        code_version: CODE_VERSION,
        name: config.name.clone(),
        kind: config.kind,
        seed: config.seed,
        realizations: config.realizations,
        loading_mode: config.loading.mode,
        gamma_eff_unit: config.loading.unit,
        omega_g,
        points: Vec::new(),
        threshold: None,
        stabilization: None,
        thermalization: None,
        bre: None,
        validity_warnings: Vec::new(),
        config: ExperimentConfig {
            output: Default::default(),
            ..config.clone()
        },
    };
    if let Some(res) = &config.reservoir {
        summary.validity_warnings =
            check_large_temperature_regime(&config.trap, res, ValidityThresholds::default()).warnings();
    }
    if config.kind == ExperimentKind::BreScaling {
        let settings = config
            .bre
            .as_ref()
            .ok_or_else(|| Error::config("bre-scaling experiments need a [bre] section"))?;
        summary.bre = Some(scaling_report(settings)?);
        return Ok(ExperimentResult {
            summary,
            ensembles: Vec::new(),
        });
    }

    let mut ensembles = Vec::new();
    for (index, point) in config.scan_points()?.into_iter().enumerate() {
        let cfg = &point.config;
        let params = cfg.simulation_params()?;
        let ens = ensemble(&params)?;
        let stabilization = match params.stats_window {
            Some(_) => Some(ensemble_stabilization(&ens.trajectories)?),
            None => None,
        };
        let xi = match params.outcoupling.kind {
            OutcouplingKind::Constant { xi } => Some(xi),
            _ => None,
        };
        let start = params.outcoupling.start_time;
        summary.points.push(PointSummary {
            index,
            label: point.label.clone(),
            parameter_value: point.value.as_ref().map(serde_json::to_value).transpose()?,
            t_end: params.t_end,
            gamma_eff_natural: params.loading.gamma_eff,
            delta: params.delta,
            onset: onset_report(&ens, &cfg.observables.onset, omega_g),
            final_values: final_values(&ens.summary, omega_g),
            n0_at_outcoupling_start: (!params.outcoupling.is_off()).then(|| n0_at(&ens.summary, start)).flatten(),
            xi,
            events_total_mean: ens.trajectories.iter().map(|t| t.counters.events_total() as f64).sum::<f64>()
                / ens.trajectories.len() as f64,
            truncated_replicas: ens.trajectories.iter().filter(|t| t.truncated).count(),
            stabilization,
            trajectory_csv: format!("point_{index}_trajectory.csv"),
            mean_csv: format!("point_{index}_mean.csv"),
        });
        ensembles.push(ens);
    }

    match config.kind {
        ExperimentKind::Threshold => summary.threshold = Some(threshold_summary(config, &summary.points)?),
        ExperimentKind::Stabilization => {
            summary.stabilization = Some(stabilization_summary(config, &summary.points, &ensembles)?)
        }
        ExperimentKind::Thermalization => {
            summary.thermalization = Some(thermalization_summary(config, &ensembles)?)
        }
        _ => {}
    }
    Ok(ExperimentResult { summary, ensembles })
}

fn threshold_summary(config: &ExperimentConfig, points: &[PointSummary]) -> Result<ThresholdSummary> {
    let (reference, measured) = match config.observables.reference_n0 {
        Some(r) => (r, false),
        None => {
            let r = points
                .iter()
                .filter_map(|p| p.n0_at_outcoupling_start.map(|x| x.0))
                .next()
                .ok_or_else(|| Error::config("threshold scan needs an outcoupling start inside the run"))?;
            (r, true)
        }
    };
    let pts: Vec<ThresholdPoint> = points
        .iter()
        .map(|p| {
            let xi = p
                .xi
                .ok_or_else(|| Error::config("threshold scans need the constant outcoupling policy"))?;
            Ok(ThresholdPoint {
                xi,
                final_n0: p.final_values.n0,
                stderr: p.final_values.n0_se,
            })
        })
        .collect::<Result<_>>()?;
    let criterion = config.observables.retention * reference;
    Ok(ThresholdSummary {
        reference_n0: reference,
        reference_measured: measured,
        retention: config.observables.retention,
        bracket: threshold_bracket(&pts, criterion),
        points: pts,
    })
}

fn stabilization_summary(
    config: &ExperimentConfig,
    points: &[PointSummary],
    ensembles: &[Ensemble],
) -> Result<StabilizationSummary> {
    let stats = points
        .first()
        .and_then(|p| p.stabilization.clone())
        .ok_or_else(|| Error::config("stabilization experiments need run.stats_window"))?;
    let window = stats.per_replica[0].window;
    let held = ensembles[0].trajectories.iter().all(|tr| {
        tr.samples
            .iter()
            .filter(|s| s.t >= window.start && s.t <= window.end)
            .all(|s| s.n0 > 0)
    });
    Ok(StabilizationSummary {
        relative_std_within_run: stats.std_n0_within_run / stats.mean_n0,
        relative_std_pooled: stats.std_n0_pooled / stats.mean_n0,
        window_seconds: window.len() / config.trap.omega_g,
        held_full_window: held,
        extraction_rate_per_second: stats.extraction_rate * config.trap.omega_g,
        reference_extraction_rate: config.observables.reference_extraction_rate,
        stats,
    })
}

fn thermalization_summary(config: &ExperimentConfig, ensembles: &[Ensemble]) -> Result<ThermalizationSummary> {
    let trajectories: &[Trajectory] = &ensembles[0].trajectories;
    let shells = trajectories[0].final_state.shell_count();
    let mut mean = vec![0.0; shells];
    for tr in trajectories {
        if tr.window.duration <= 0.0 {
            return Err(Error::config("thermalization needs run.stats_window inside the run"));
        }
        for (acc, c) in mean.iter_mut().zip(tr.window.mean_counts()) {
            *acc += c / trajectories.len() as f64;
        }
    }
    let first = &trajectories[0];
    let n_total = first.final_state.total() as f64;
    let excitation = first.final_state.excitation() as f64;
    let fit = fit_bose_einstein(shells, n_total, excitation)?;
    let min_count = config.observables.be_min_count;
    Ok(ThermalizationSummary {
        n_total,
        excitation,
        max_relative_deviation: max_relative_deviation(&mean, &fit, min_count),
        mean_counts: mean,
        fit,
        min_count,
    })
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn fmt(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        "NaN".into()
    }
}

/// Writes one trajectory's samples in [`CSV_COLUMNS`] order.
pub fn write_trajectory_csv(path: &Path, tr: &Trajectory, omega_g: f64) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(CSV_COLUMNS)?;
    for s in &tr.samples {
        w.write_record([
            fmt(s.t),
            s.n.to_string(),
            s.n0.to_string(),
            fmt(s.fraction()),
            fmt(s.energy_per_particle()),
            s.counters.evaporated.to_string(),
            s.counters.outcoupled.to_string(),
            s.counters.not_trapped.to_string(),
            s.counters.events_total().to_string(),
            fmt(s.t / omega_g),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes ensemble means in [`CSV_COLUMNS`] order followed by one `_se`
/// column per observable.
pub fn write_mean_csv(path: &Path, s: &EnsembleSummary, omega_g: f64) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let cols = [
        &s.n,
        &s.n0,
        &s.fraction,
        &s.energy_per_particle,
        &s.cum_evaporated,
        &s.cum_outcoupled,
        &s.cum_not_trapped,
        &s.events_total,
    ];
    let mut header: Vec<String> = CSV_COLUMNS.iter().map(|c| c.to_string()).collect();
    header.extend(CSV_COLUMNS[1..9].iter().map(|c| format!("{c}_se")));
    w.write_record(&header)?;
    for k in 0..s.len() {
        let mut row = vec![fmt(s.t[k])];
        row.extend(cols.iter().map(|c| fmt(c.mean[k])));
        row.push(fmt(s.t[k] / omega_g));
        row.extend(cols.iter().map(|c| fmt(c.stderr[k])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_bre_csv(path: &Path, report: &ScalingReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record([
        "epsilon",
        "N0",
        "epsilon_N0",
        "outside_validity",
        "A0",
        "A1a",
        "A1b",
        "A2a_neutral",
        "A2a_bad",
        "A2a_good",
        "A2a_other",
        "A2b",
        "residual",
        "exact_slow",
        "exact_fast_bad",
        "exact_fast_good",
    ])?;
    for p in &report.points {
        let t = &p.terms;
        let mut row = vec![fmt(p.epsilon), p.n0.to_string(), fmt(p.epsilon_n0), p.outside_validity.to_string()];
        row.extend(
            [
                t.a0,
                t.a1a,
                t.a1b,
                t.a2a_neutral,
                t.a2a_bad,
                t.a2a_good,
                t.a2a_other,
                t.a2b,
                p.residual,
                p.exact.slow,
                p.exact.fast.bad,
                p.exact.fast.good,
            ]
            .map(fmt),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes every output of `result` into `dir`, returning the written paths.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| Error::Write {
        path: dir.to_path_buf(),
        source,
    })?;
    let omega_g = result.summary.omega_g;
    let mut written = Vec::new();
    for (p, ens) in result.summary.points.iter().zip(&result.ensembles) {
        let tp = dir.join(&p.trajectory_csv);
        write_trajectory_csv(&tp, &ens.trajectories[0], omega_g)?;
        let mp = dir.join(&p.mean_csv);
        write_mean_csv(&mp, &ens.summary, omega_g)?;
        written.extend([tp, mp]);
    }
    if let Some(report) = &result.summary.bre {
        let bp = dir.join("bre_points.csv");
        write_bre_csv(&bp, report)?;
        written.push(bp);
    }
    let sp = dir.join("summary.json");
    let mut f = create(&sp)?;
    serde_json::to_writer_pretty(&mut f, &result.summary)?;
    f.write_all(b"\n")?;
    written.push(sp);
    Ok(written)
}

/// [`run_experiment`] followed by [`write_outputs`] into `config.output.dir`.
pub fn run_and_write(config: &ExperimentConfig) -> Result<(ExperimentResult, Vec<PathBuf>)> {
    let result = run_experiment(config)?;
    let files = write_outputs(&result, &config.output.dir)?;
    Ok((result, files))
}
