//! Derived quantities: energy per particle, onset of condensation,
//! outcoupling thresholds, stabilization statistics and Bose-Einstein fits.

use serde::{Deserialize, Serialize};

use crate::engine::{EnsembleSummary, Sample, TimeWindow, Trajectory, WindowMoments};
use crate::error::{Error, Result};
use crate::occupancy::ShellOccupancy;
use crate::units::shell_degeneracy;

/// `Σ N_m (m + 3/2) / N` in units of `hbar omega_g`; `None` for an empty trap.
pub fn energy_per_particle(state: &ShellOccupancy) -> Option<f64> {
    if state.total() == 0 {
        None
    } else {
        Some(state.energy() / state.total() as f64)
    }
}

/// Operational definition of the onset of condensation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnsetCriterion {
    /// Minimum mean condensate population.
    pub n_abs: f64,
    /// Minimum mean condensate fraction.
    pub f_rel: f64,
    /// Require both conditions at every later grid time as well.
    pub sustained: bool,
}

impl Default for OnsetCriterion {
    fn default() -> Self {
        Self {
            n_abs: 20.0,
            f_rel: 0.05,
            sustained: true,
        }
    }
}

impl OnsetCriterion {
    pub fn validate(&self) -> Result<()> {
        if !(self.n_abs >= 1.0) {
            return Err(Error::invalid("onset n_abs must be at least 1"));
        }
        if !(self.f_rel > 0.0 && self.f_rel < 1.0) {
            return Err(Error::invalid("onset f_rel must lie in (0, 1)"));
        }
        Ok(())
    }

    fn holds(&self, n0: f64, fraction: f64) -> bool {
        n0 >= self.n_abs && fraction >= self.f_rel
    }
}

/// Earliest grid time at which the criterion is met (and stays met when
/// `sustained`).
pub fn onset_time(t: &[f64], n0: &[f64], fraction: &[f64], crit: &OnsetCriterion) -> Option<f64> {
    let n = t.len().min(n0.len()).min(fraction.len());
    let ok = |k: usize| crit.holds(n0[k], fraction[k]);
    if crit.sustained {
        let first_after_last_failure = match (0..n).rev().find(|&k| !ok(k)) {
            Some(k) => k + 1,
            None => 0,
        };
        (first_after_last_failure < n).then(|| t[first_after_last_failure])
    } else {
        (0..n).find(|&k| ok(k)).map(|k| t[k])
    }
}

/// Onset time of an ensemble mean.
pub fn ensemble_onset(summary: &EnsembleSummary, crit: &OnsetCriterion) -> Option<f64> {
    onset_time(&summary.t, &summary.n0.mean, &summary.fraction.mean, crit)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilizationStats {
    pub window: TimeWindow,
    pub mean_n0: f64,
    pub std_n0: f64,
    pub extracted_atoms: f64,
    /// Extracted atoms per unit time (`omega_g`).
    pub extraction_rate: f64,
}

/// Time-weighted condensate statistics of a sampled trajectory over `window`.
///
/// The sampled path is treated as piecewise constant, each sample holding
/// until the next grid time.
pub fn stabilization_stats(samples: &[Sample], window: TimeWindow) -> Result<StabilizationStats> {
    if window.is_empty() {
        return Err(Error::invalid("stabilization window is empty"));
    }
    let (mut dur, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for (k, s) in samples.iter().enumerate() {
        let next = samples.get(k + 1).map_or(window.end, |n| n.t);
        let a = s.t.max(window.start);
        let b = next.min(window.end);
        if b > a {
            let x = s.n0 as f64;
            dur += b - a;
            s1 += x * (b - a);
            s2 += x * x * (b - a);
        }
    }
    if dur <= 0.0 {
        return Err(Error::invalid("stabilization window holds no samples"));
    }
    let counter_at = |t: f64| {
        samples
            .iter()
            .take_while(|s| s.t <= t)
            .last()
            .map_or(0, |s| s.counters.outcoupled)
    };
    let extracted = counter_at(window.end).saturating_sub(counter_at(window.start)) as f64;
    let mean = s1 / dur;
    Ok(StabilizationStats {
        window,
        mean_n0: mean,
        std_n0: (s2 / dur - mean * mean).max(0.0).sqrt(),
        extracted_atoms: extracted,
        extraction_rate: extracted / window.len(),
    })
}

/// Exact statistics from the event-resolved window moments of a trajectory.
pub fn stabilization_from_moments(m: &WindowMoments) -> Result<StabilizationStats> {
    let window = m
        .window
        .ok_or_else(|| Error::invalid("trajectory was run without a statistics window"))?;
    if m.duration <= 0.0 {
        return Err(Error::invalid("statistics window was not reached"));
    }
    let extracted = m.outcoupled_at_end.saturating_sub(m.outcoupled_at_start) as f64;
    Ok(StabilizationStats {
        window,
        mean_n0: m.mean_n0(),
        std_n0: m.std_n0(),
        extracted_atoms: extracted,
        extraction_rate: extracted / m.duration,
    })
}

/// Stabilization statistics aggregated over replicas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStabilization {
    pub per_replica: Vec<StabilizationStats>,
    /// Mean over replicas of the time-averaged `N_0`.
    pub mean_n0: f64,
    /// Mean over replicas of the within-run time standard deviation.
    pub std_n0_within_run: f64,
    /// Standard deviation of the time-averaged `N_0` across replicas.
    pub std_n0_across_runs: f64,
    /// Standard deviation of `N_0` over time and replicas together.
    pub std_n0_pooled: f64,
    pub extracted_atoms: f64,
    pub extraction_rate: f64,
}

pub fn ensemble_stabilization(trajectories: &[Trajectory]) -> Result<EnsembleStabilization> {
    let per: Vec<StabilizationStats> = trajectories
        .iter()
        .map(|t| stabilization_from_moments(&t.window))
        .collect::<Result<_>>()?;
    if per.is_empty() {
        return Err(Error::invalid("no trajectories"));
    }
    let n = per.len() as f64;
    let mean = per.iter().map(|s| s.mean_n0).sum::<f64>() / n;
    let within = per.iter().map(|s| s.std_n0).sum::<f64>() / n;
    let across = if per.len() > 1 {
        (per.iter().map(|s| (s.mean_n0 - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let second = per
        .iter()
        .map(|s| s.std_n0 * s.std_n0 + s.mean_n0 * s.mean_n0)
        .sum::<f64>()
        / n;
    Ok(EnsembleStabilization {
        mean_n0: mean,
        std_n0_within_run: within,
        std_n0_across_runs: across,
        std_n0_pooled: (second - mean * mean).max(0.0).sqrt(),
        extracted_atoms: per.iter().map(|s| s.extracted_atoms).sum::<f64>() / n,
        extraction_rate: per.iter().map(|s| s.extraction_rate).sum::<f64>() / n,
        per_replica: per,
    })
}

/// Final condensate population at one outcoupling ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPoint {
    pub xi: f64,
    pub final_n0: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdBracket {
    /// Largest scanned `xi` still retaining the criterion population.
    pub lower: Option<f64>,
    /// Smallest scanned `xi` falling below it.
    pub upper: Option<f64>,
    /// Linear interpolation of the crossing inside the bracket.
    pub estimate: Option<f64>,
    pub criterion: f64,
    /// Final `N_0` is non-increasing in `xi` within `3` combined standard errors.
    pub monotone: bool,
    pub warning: Option<String>,
}

impl ThresholdBracket {
    pub fn width(&self) -> f64 {
        match (self.lower, self.upper) {
            (Some(a), Some(b)) => b - a,
            _ => f64::INFINITY,
        }
    }

    pub fn contains(&self, xi: f64) -> bool {
        self.lower.is_none_or(|a| a <= xi) && self.upper.is_none_or(|b| xi <= b)
    }
}

/// Brackets the retention crossing of a scan. `points` need not be sorted.
pub fn threshold_bracket(points: &[ThresholdPoint], criterion: f64) -> ThresholdBracket {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.xi.total_cmp(&b.xi));
    let monotone = pts.windows(2).all(|w| {
        let tol = 3.0 * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
        w[1].final_n0 <= w[0].final_n0 + tol
    });
    let first_below = pts.iter().position(|p| p.final_n0 < criterion);
    let (lower, upper, estimate, warning) = match first_below {
        None => (
            pts.last().map(|p| p.xi),
            None,
            None,
            Some("every scanned ratio retains the condensate; threshold lies above the grid".to_string()),
        ),
        Some(0) => (
            None,
            Some(pts[0].xi),
            None,
            Some("no scanned ratio retains the condensate; threshold lies below the grid".to_string()),
        ),
        Some(k) => {
            let (a, b) = (pts[k - 1], pts[k]);
            let frac = (a.final_n0 - criterion) / (a.final_n0 - b.final_n0);
            (Some(a.xi), Some(b.xi), Some(a.xi + frac * (b.xi - a.xi)), None)
        }
    };
    ThresholdBracket {
        lower,
        upper,
        estimate,
        criterion,
        monotone,
        warning,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdScan {
    pub points: Vec<ThresholdPoint>,
    pub bracket: ThresholdBracket,
}

/// Evaluates `eval(xi) -> (mean final N_0, standard error)` on `grid`, then
/// bisects the bracket `refine` times.
pub fn threshold_scan<F>(grid: &[f64], criterion: f64, refine: usize, mut eval: F) -> Result<ThresholdScan>
where
    F: FnMut(f64) -> Result<(f64, f64)>,
{
    if grid.is_empty() {
        return Err(Error::invalid("threshold scan needs at least one ratio"));
    }
    let mut points = Vec::with_capacity(grid.len() + refine);
    for &xi in grid {
        let (final_n0, stderr) = eval(xi)?;
        points.push(ThresholdPoint { xi, final_n0, stderr });
    }
    let mut bracket = threshold_bracket(&points, criterion);
    for _ in 0..refine {
        let (Some(a), Some(b)) = (bracket.lower, bracket.upper) else { break };
        let xi = 0.5 * (a + b);
        let (final_n0, stderr) = eval(xi)?;
        points.push(ThresholdPoint { xi, final_n0, stderr });
        bracket = threshold_bracket(&points, criterion);
    }
    points.sort_by(|a, b| a.xi.total_cmp(&b.xi));
    Ok(ThresholdScan { points, bracket })
}

/// Grand-canonical Bose-Einstein shell occupations matched to a given number
/// of atoms and excitation energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoseEinsteinFit {
    /// Chemical potential relative to the ground shell (units `hbar omega_g`).
    pub mu: f64,
    /// Temperature `k_B T / (hbar omega_g)`.
    pub tau: f64,
    /// Per-state occupations `1/(exp((m - mu)/tau) - 1)`.
    pub occupations: Vec<f64>,
}

fn be_moments(shells: usize, mu: f64, tau: f64) -> (f64, f64) {
    let (mut n, mut e) = (0.0, 0.0);
    for m in 0..shells {
        let occ = 1.0 / (((m as f64 - mu) / tau).exp_m1());
        let g = shell_degeneracy(m) as f64;
        n += g * occ;
        e += g * occ * m as f64;
    }
    (n, e)
}

fn bisect(mut lo: f64, mut hi: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    // f(lo) < 0 < f(hi)
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() <= 1e-14 * hi.abs().max(lo.abs()).max(1e-300) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Solves `N(mu, tau) = n_total`, `E(mu, tau) = excitation` on `shells` shells.
pub fn fit_bose_einstein(shells: usize, n_total: f64, excitation: f64) -> Result<BoseEinsteinFit> {
    if shells < 2 || !(n_total > 0.0) {
        return Err(Error::invalid("Bose-Einstein fit needs at least two shells and atoms"));
    }
    let per_atom = excitation / n_total;
    let max_per_atom = {
        let (n, e) = be_moments(shells, -1e6, 1e9);
        e / n
    };
    if !(per_atom > 0.0 && per_atom < max_per_atom) {
        return Err(Error::invalid("excitation per atom outside the attainable range"));
    }
    // Chemical potential reproducing n_total at temperature tau; N grows with mu.
    let mu_for = |tau: f64| {
        let mut lo = -1.0;
        while be_moments(shells, lo, tau).0 > n_total {
            lo *= 2.0;
        }
        let hi = -1e-14 * tau.max(1.0);
        bisect(lo, hi, |mu| be_moments(shells, mu, tau).0 - n_total)
    };
    // At fixed N the excitation per atom grows with temperature.
    let excess = |tau: f64| {
        let (n, e) = be_moments(shells, mu_for(tau), tau);
        e / n - per_atom
    };
    let mut hi = 1.0;
    while excess(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Convergence("Bose-Einstein temperature not bracketed".into()));
        }
    }
    let mut lo = hi / 2.0;
    while excess(lo) > 0.0 {
        lo /= 2.0;
        if lo < 1e-12 {
            return Err(Error::Convergence("Bose-Einstein temperature not bracketed".into()));
        }
    }
    let tau = bisect(lo, hi, excess);
    let mu = mu_for(tau);
    let occupations = (0..shells)
        .map(|m| 1.0 / (((m as f64 - mu) / tau).exp_m1()))
        .collect();
    Ok(BoseEinsteinFit { mu, tau, occupations })
}

/// Largest relative deviation between measured per-state occupations
/// `<N_m>/g_m` and the fit, over shells with `<N_m> >= min_count`.
pub fn max_relative_deviation(mean_counts: &[f64], fit: &BoseEinsteinFit, min_count: f64) -> f64 {
    mean_counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c >= min_count)
        .map(|(m, &c)| {
            let measured = c / shell_degeneracy(m) as f64;
            (measured / fit.occupations[m] - 1.0).abs()
        })
        .fold(0.0, f64::max)
}
