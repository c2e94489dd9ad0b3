//! Grid evaluation of the expansion and power-law fits of its terms.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::model::{
    a2a_bad_correlation, compute_order_terms, exact_probabilities, ExactProbabilities, LambdaSystemSpec,
    OrderTerms, ReducedBREModel,
};
use crate::error::{Error, Result};

/// Settings shared by every grid point of a scaling study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSettings {
    /// `gamma_eg` is replaced by `epsilon * gamma_er` at each point.
    pub spec: LambdaSystemSpec,
    pub levels: usize,
    pub transfers: usize,
    pub epsilons: Vec<f64>,
    pub n0s: Vec<u64>,
    /// Largest `epsilon * N0` inside the expansion's validity.
    pub validity_limit: f64,
    /// Recompute with one more level and fail if any term moves by more than this.
    pub convergence_tolerance: Option<f64>,
    pub confidence: f64,
}

impl Default for ScalingSettings {
    fn default() -> Self {
        Self {
            spec: LambdaSystemSpec::default(),
            levels: 4,
            transfers: 2,
            epsilons: vec![1e-4, 3e-4, 1e-3, 3e-3, 1e-2],
            n0s: vec![1, 3, 10, 30, 100],
            validity_limit: 0.5,
            convergence_tolerance: Some(0.01),
            confidence: 0.95,
        }
    }
}

impl ScalingSettings {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.epsilons.is_empty() || self.n0s.is_empty() {
            return Err(Error::invalid("scaling grid needs epsilons and N0 values"));
        }
        if self.epsilons.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::invalid("epsilon values must be positive"));
        }
        if !(self.validity_limit > 0.0) {
            return Err(Error::invalid("validity_limit must be positive"));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::invalid("confidence must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub epsilon: f64,
    pub n0: u64,
    pub epsilon_n0: f64,
    pub outside_validity: bool,
    pub terms: OrderTerms,
    pub exact: ExactProbabilities,
    pub residual: f64,
    /// `10 (epsilon * max(N0, 1))^3`.
    pub residual_bound: f64,
    /// Largest relative change of a term when one more level is retained.
    pub truncation_shift: Option<f64>,
}

/// Largest relative change between two evaluations over the terms that are
/// not negligible next to `a1a`.
fn relative_shift(a: &OrderTerms, b: &OrderTerms) -> f64 {
    let floor = 1e-9 * a.a1a.abs();
    [
        (a.a0, b.a0),
        (a.a1a, b.a1a),
        (a.a1b, b.a1b),
        (a.a2a_neutral, b.a2a_neutral),
        (a.a2a_bad, b.a2a_bad),
        (a.a2a_good, b.a2a_good),
        (a.a2b, b.a2b),
    ]
    .iter()
    .filter(|(x, _)| x.abs() > floor)
    .map(|(x, y)| ((y - x) / x).abs())
    .fold(0.0, f64::max)
}

/// Evaluates one grid point.
pub fn analyze_point(
    model: &ReducedBREModel,
    spec: &LambdaSystemSpec,
    validity_limit: f64,
    convergence_tolerance: Option<f64>,
) -> Result<ScalingPoint> {
    let terms = compute_order_terms(model, spec)?;
    let exact = exact_probabilities(model, spec)?;
    let truncation_shift = match convergence_tolerance {
        Some(tol) => {
            let wider = compute_order_terms(&model.widened(1), spec)?;
            let shift = relative_shift(&terms, &wider);
            if shift > tol {
                return Err(Error::Convergence(format!(
                    "terms move by {:.3}% with {} levels",
                    100.0 * shift,
                    model.levels + 1
                )));
            }
            Some(shift)
        }
        None => None,
    };
    let epsilon = spec.epsilon();
    let n0 = model.condensate();
    Ok(ScalingPoint {
        epsilon,
        n0,
        epsilon_n0: epsilon * n0 as f64,
        outside_validity: epsilon * n0 as f64 > validity_limit,
        terms,
        exact,
        residual: terms.residual(),
        residual_bound: 10.0 * (epsilon * n0.max(1) as f64).powi(3),
        truncation_shift,
    })
}

/// Least-squares estimate with a two-sided confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// `log y = a log epsilon + b log N0 + c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent_epsilon: Estimate,
    /// `None` when the fit absorbs the `N0` dependence into per-`N0` intercepts.
    pub exponent_n0: Option<Estimate>,
    pub points: usize,
    pub max_abs_log_residual: f64,
}

/// Fits `log y` against `log epsilon` and either `log N0` or one intercept per
/// distinct `N0`. Points are `(epsilon, N0, y)` with `y > 0`.
pub fn fit_power_law(points: &[(f64, u64, f64)], per_n0_intercepts: bool, confidence: f64) -> Result<PowerLawFit> {
    if points.iter().any(|&(e, n, y)| !(e > 0.0 && n > 0 && y > 0.0)) {
        return Err(Error::invalid("power-law fit needs positive epsilon, N0 and values"));
    }
    let mut levels: Vec<u64> = points.iter().map(|p| p.1).collect();
    levels.sort_unstable();
    levels.dedup();
    let cols = if per_n0_intercepts { 1 + levels.len() } else { 3 };
    let rows = points.len();
    if rows <= cols {
        return Err(Error::invalid("power-law fit needs more points than parameters"));
    }
    let x = DMatrix::from_fn(rows, cols, |r, c| {
        let (e, n, _) = points[r];
        match (per_n0_intercepts, c) {
            (_, 0) => e.ln(),
            (false, 1) => (n as f64).ln(),
            (false, _) => 1.0,
            (true, k) => f64::from(u8::from(levels[k - 1] == n)),
        }
    });
    let y = DVector::from_iterator(rows, points.iter().map(|p| p.2.ln()));
    let xtx = x.transpose() * &x;
    let inv = xtx
        .try_inverse()
        .ok_or_else(|| Error::invalid("power-law design is degenerate; vary both epsilon and N0"))?;
    let beta = &inv * x.transpose() * &y;
    let resid = &y - &x * &beta;
    let dof = (rows - cols) as f64;
    let sigma2 = resid.norm_squared() / dof;
    let t = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::invalid(format!("t distribution: {e}")))?
        .inverse_cdf(0.5 + 0.5 * confidence);
    let estimate = |k: usize| {
        let se = (sigma2 * inv[(k, k)]).max(0.0).sqrt();
        Estimate {
            value: beta[k],
            stderr: se,
            ci_low: beta[k] - t * se,
            ci_high: beta[k] + t * se,
        }
    };
    Ok(PowerLawFit {
        exponent_epsilon: estimate(0),
        exponent_n0: (!per_n0_intercepts).then(|| estimate(1)),
        points: rows,
        max_abs_log_residual: resid.iter().fold(0.0, |m, r| m.max(r.abs())),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub settings: ScalingSettings,
    pub points: Vec<ScalingPoint>,
    /// `(epsilon, N0)` of points outside the validity limit, excluded from fits.
    pub flagged: Vec<(f64, u64)>,
    /// Condensate-depleting second-order term against `epsilon` and `N0`.
    pub a2a_bad: PowerLawFit,
    /// Slow escape against `epsilon`, one intercept per `N0`.
    pub a1a: PowerLawFit,
    /// The same depletion from the non-perturbative route.
    pub exact_bad: PowerLawFit,
    /// Largest `|residual| / bound` over the fitted points.
    pub max_residual_ratio: f64,
    /// Largest relative error of the single-level slow escape against
    /// `x/(1+x)`, `x = epsilon (N0 + 1)`, over the whole grid.
    pub competition_limit_error: f64,
    /// `|F(5/gamma_er)| / |F(0)|` of the depletion correlation at the grid's
    /// middle point.
    pub correlation_ratio: f64,
}

impl ScalingReport {
    /// Points inside the validity limit.
    pub fn valid_points(&self) -> impl Iterator<Item = &ScalingPoint> {
        self.points.iter().filter(|p| !p.outside_validity)
    }
}

pub fn scaling_report(settings: &ScalingSettings) -> Result<ScalingReport> {
    settings.validate()?;
    let grid: Vec<(f64, u64)> = settings
        .epsilons
        .iter()
        .flat_map(|&e| settings.n0s.iter().map(move |&n| (e, n)))
        .collect();
    let model_for = |n0: u64| ReducedBREModel {
        transfers: settings.transfers,
        ..ReducedBREModel::with_condensate(settings.levels, n0)
    };
    let points: Vec<ScalingPoint> = grid
        .par_iter()
        .map(|&(e, n)| {
            analyze_point(
                &model_for(n),
                &settings.spec.with_epsilon(e),
                settings.validity_limit,
                settings.convergence_tolerance,
            )
        })
        .collect::<Result<_>>()?;

    let competition_limit_error = grid
        .par_iter()
        .map(|&(e, n)| {
            let spec = LambdaSystemSpec {
                eta: 0.0,
                omega_rabi: 0.0,
                ..settings.spec.with_epsilon(e)
            };
            let slow = exact_probabilities(&ReducedBREModel::with_condensate(1, n), &spec)?.slow;
            let x = e * (n + 1) as f64;
            Ok((slow / (x / (1.0 + x)) - 1.0).abs())
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);

    let valid: Vec<&ScalingPoint> = points.iter().filter(|p| !p.outside_validity).collect();
    let series = |f: &dyn Fn(&ScalingPoint) -> f64| -> Vec<(f64, u64, f64)> {
        valid.iter().map(|p| (p.epsilon, p.n0, f(p))).collect()
    };
    let a2a_bad = fit_power_law(&series(&|p| p.terms.a2a_bad), false, settings.confidence)?;
    let a1a = fit_power_law(&series(&|p| p.terms.a1a), true, settings.confidence)?;
    let exact_bad = fit_power_law(&series(&|p| p.exact.fast.bad), false, settings.confidence)?;
    let max_residual_ratio = valid
        .iter()
        .map(|p| p.residual.abs() / p.residual_bound)
        .fold(0.0, f64::max);

    let (e_mid, n_mid) = grid[grid.len() / 2];
    let mid_model = model_for(n_mid);
    let mid_spec = settings.spec.with_epsilon(e_mid);
    let f0 = a2a_bad_correlation(&mid_model, &mid_spec, 0.0)?.norm();
    let f5 = a2a_bad_correlation(&mid_model, &mid_spec, 5.0 / settings.spec.gamma_er)?.norm();

    Ok(ScalingReport {
        settings: settings.clone(),
        flagged: points
            .iter()
            .filter(|p| p.outside_validity)
            .map(|p| (p.epsilon, p.n0))
            .collect(),
        points,
        a2a_bad,
        a1a,
        exact_bad,
        max_residual_ratio,
        competition_limit_error,
        correlation_ratio: if f0 > 0.0 { f5 / f0 } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_exact_power_law() {
        let pts: Vec<(f64, u64, f64)> = [1e-4, 1e-3, 1e-2]
            .iter()
            .flat_map(|&e| [1u64, 10, 100].map(move |n| (e, n, 3.0 * e * e * n as f64)))
            .collect();
        let fit = fit_power_law(&pts, false, 0.95).unwrap();
        assert!((fit.exponent_epsilon.value - 2.0).abs() < 1e-10);
        assert!((fit.exponent_n0.unwrap().value - 1.0).abs() < 1e-10);
        let fe = fit_power_law(&pts, true, 0.95).unwrap();
        assert!((fe.exponent_epsilon.value - 2.0).abs() < 1e-10);
        assert!(fit_power_law(&pts[..2], false, 0.95).is_err());
    }

    #[test]
    fn validity_flag() {
        let spec = LambdaSystemSpec::default().with_epsilon(6e-3);
        let p = analyze_point(&ReducedBREModel::with_condensate(3, 100), &spec, 0.5, None).unwrap();
        assert!(p.outside_validity);
        let q = analyze_point(&ReducedBREModel::with_condensate(3, 50), &spec, 0.5, None).unwrap();
        assert!(!q.outside_validity);
    }
}
