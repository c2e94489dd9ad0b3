//! Dense complex Sylvester solves by the Bartels-Stewart method.

use nalgebra::linalg::Schur;
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub(crate) type CMatrix = DMatrix<Complex64>;

/// Complex Schur form `m = u t u^H` with `t` upper triangular.
pub(crate) fn schur(m: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let n = m.nrows();
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    let decomposition = Schur::try_new(m.clone(), 1e-15 * scale, 10_000 * n.max(1))
        .ok_or_else(|| Error::Convergence("Schur decomposition did not converge".into()))?;
    let (u, mut t) = decomposition.unpack();
    for j in 0..n {
        for i in (j + 1)..n {
            if t[(i, j)].norm() > 1e-10 * scale {
                return Err(Error::Convergence("Schur factor is not triangular".into()));
            }
            t[(i, j)] = Complex64::new(0.0, 0.0);
        }
    }
    Ok((u, t))
}

/// Solves `ta y + y sb^H = rhs` for upper-triangular `ta` and `sb`.
pub(crate) fn solve_triangular(ta: &CMatrix, sb: &CMatrix, rhs: &CMatrix) -> CMatrix {
    let (n, p) = (ta.nrows(), sb.nrows());
    let mut y = CMatrix::zeros(n, p);
    // Column j couples to columns k > j through (sb^H)_{kj} = conj(sb_{jk}).
    for j in (0..p).rev() {
        let mut col: Vec<Complex64> = (0..n).map(|i| rhs[(i, j)]).collect();
        for k in (j + 1)..p {
            let w = sb[(j, k)].conj();
            if w != Complex64::new(0.0, 0.0) {
                for i in 0..n {
                    col[i] -= y[(i, k)] * w;
                }
            }
        }
        let shift = sb[(j, j)].conj();
        for i in (0..n).rev() {
            let mut acc = col[i];
            for k in (i + 1)..n {
                acc -= ta[(i, k)] * y[(k, j)];
            }
            y[(i, j)] = acc / (ta[(i, i)] + shift);
        }
    }
    y
}

/// Lyapunov solver for a fixed stable generator `g`: `g x + x g^H = rhs`.
pub(crate) struct Lyapunov {
    u: CMatrix,
    t: CMatrix,
}

impl Lyapunov {
    pub(crate) fn new(g: &CMatrix) -> Result<Self> {
        let (u, t) = schur(g)?;
        if (0..t.nrows()).any(|i| !(t[(i, i)].re < 0.0)) {
            return Err(Error::invalid("generator has a non-decaying mode"));
        }
        Ok(Self { u, t })
    }

    pub(crate) fn solve(&self, rhs: &CMatrix) -> CMatrix {
        let r = self.u.adjoint() * rhs * &self.u;
        let y = solve_triangular(&self.t, &self.t, &r);
        &self.u * y * self.u.adjoint()
    }
}
