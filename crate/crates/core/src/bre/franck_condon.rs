//! One-dimensional Franck-Condon factors between equal-frequency oscillators
//! and the direction-averaged slow-line coupling tensor.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Generalised Laguerre polynomial `L_n^{(a)}(x)` by upward recurrence.
pub fn laguerre(n: usize, a: f64, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let (mut prev, mut cur) = (1.0, 1.0 + a - x);
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 + a - x) * cur - (k + a) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// `<l| exp(i eta (a + a^H)) |m>`.
///
/// Closed form `e^{-eta^2/2} (i eta)^{|l-m|} sqrt(min!/max!) L_min^{(|l-m|)}(eta^2)`.
/// A negative `eta` is the opposite emission direction.
pub fn franck_condon(l: usize, m: usize, eta: f64) -> Complex64 {
    let (lo, hi) = (l.min(m), l.max(m));
    let d = hi - lo;
    let ratio = ((lo + 1)..=hi).map(|k| 1.0 / k as f64).product::<f64>().sqrt();
    let mag = (-0.5 * eta * eta).exp() * eta.powi(d as i32) * ratio * laguerre(lo, d as f64, eta * eta);
    Complex64::i().powu(d as u32) * mag
}

/// Emission direction along the slow-line wave vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// `alpha^R_{l m m' l'} = 1/2 sum_{+-k} eta_{lm}(k) conj(eta_{l'm'}(k))` on `levels`
/// oscillator levels.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingTensor {
    levels: usize,
    eta: f64,
    forward: DMatrix<Complex64>,
    backward: DMatrix<Complex64>,
}

impl CouplingTensor {
    pub fn new(levels: usize, eta: f64) -> Self {
        Self {
            levels,
            eta,
            forward: DMatrix::from_fn(levels, levels, |l, m| franck_condon(l, m, eta)),
            backward: DMatrix::from_fn(levels, levels, |l, m| franck_condon(l, m, -eta)),
        }
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn factors(&self, dir: Direction) -> &DMatrix<Complex64> {
        match dir {
            Direction::Forward => &self.forward,
            Direction::Backward => &self.backward,
        }
    }

    pub fn alpha(&self, l: usize, m: usize, mp: usize, lp: usize) -> Complex64 {
        0.5 * (self.forward[(l, m)] * self.forward[(lp, mp)].conj()
            + self.backward[(l, m)] * self.backward[(lp, mp)].conj())
    }

    /// `max_{l <= l_max} |1 - sum_m |eta_{lm}|^2|` over the retained levels.
    pub fn unitarity_defect(&self, l_max: usize) -> f64 {
        (0..=l_max.min(self.levels.saturating_sub(1)))
            .map(|l| {
                let s: f64 = (0..self.levels).map(|m| self.forward[(l, m)].norm_sqr()).sum();
                (1.0 - s).abs()
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Normalised Hermite functions on a grid, by the stable recurrence.
    fn hermite_functions(n_max: usize, x: f64) -> Vec<f64> {
        let mut phi = vec![0.0; n_max + 1];
        phi[0] = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
        if n_max > 0 {
            phi[1] = 2f64.sqrt() * x * phi[0];
        }
        for n in 2..=n_max {
            let nf = n as f64;
            phi[n] = (2.0 / nf).sqrt() * x * phi[n - 1] - ((nf - 1.0) / nf).sqrt() * phi[n - 2];
        }
        phi
    }

    fn quadrature(l: usize, m: usize, eta: f64) -> Complex64 {
        let k = 2f64.sqrt() * eta;
        let (a, b, steps) = (-14.0, 14.0, 40_000);
        let h = (b - a) / steps as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for s in 0..=steps {
            let x = a + s as f64 * h;
            let w = if s == 0 || s == steps { 0.5 } else { 1.0 };
            let phi = hermite_functions(l.max(m), x);
            acc += w * phi[l] * phi[m] * Complex64::new(0.0, k * x).exp();
        }
        acc * h
    }

    #[test]
    fn identity_at_zero_eta() {
        for l in 0..5 {
            for m in 0..5 {
                let v = franck_condon(l, m, 0.0);
                assert_eq!(v, Complex64::new(if l == m { 1.0 } else { 0.0 }, 0.0));
            }
        }
    }

    #[test]
    fn matches_quadrature_oracle() {
        assert!((franck_condon(1, 0, 0.5).norm() - 0.441_248_451_292_298_5).abs() < 1e-12);
        for &eta in &[0.5, 1.3, -0.7] {
            for l in 0..6 {
                for m in 0..6 {
                    let (a, b) = (franck_condon(l, m, eta), quadrature(l, m, eta));
                    assert!((a - b).norm() < 1e-9, "l={l} m={m} eta={eta}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn alpha_examples() {
        let zero = CouplingTensor::new(4, 0.0);
        for (l, m, mp, lp) in [(0, 0, 0, 0), (1, 1, 2, 2), (0, 1, 1, 0), (2, 2, 1, 0)] {
            let want = if l == m && lp == mp { 1.0 } else { 0.0 };
            assert_eq!(zero.alpha(l, m, mp, lp), Complex64::new(want, 0.0));
        }
        let half = CouplingTensor::new(6, 0.5);
        assert!((half.alpha(0, 0, 0, 0).re - (-0.25f64).exp()).abs() < 1e-14);
        // Odd total displacement cancels between the two directions.
        assert!(half.alpha(0, 1, 0, 0).norm() < 1e-15);
    }

    #[test]
    fn unitarity_with_enough_levels() {
        for &eta in &[0.1, 0.3, 0.5, 1.0] {
            let l_max = 3;
            let levels = l_max + (10.0f64 * (1.0 + eta * eta)).ceil() as usize;
            let t = CouplingTensor::new(levels, eta);
            assert!(t.unitarity_defect(l_max) <= 1e-8, "eta={eta}: {}", t.unitarity_defect(l_max));
        }
    }
}
