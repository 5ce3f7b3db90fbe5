//! Small dense helpers on top of nalgebra.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative pivot tolerance used for every symmetric solve.
pub(crate) const PIVOT_TOL: f64 = 1e-12;

/// Condition number `max|λ| / min|λ|` of a symmetric matrix.
pub(crate) fn sym_condition(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    let eig = m.clone().symmetric_eigenvalues();
    let max = eig.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let min = eig.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Symmetric solve `m x = rhs`. Fails with [`Error::Singular`] when the
/// smallest eigenvalue magnitude falls below `PIVOT_TOL` times the largest.
pub(crate) fn sym_solve(m: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Ok(DMatrix::zeros(0, rhs.ncols()));
    }
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::Singular { condition: f64::INFINITY });
    }
    let cond = sym_condition(m);
    if !(cond * PIVOT_TOL < 1.0) {
        return Err(Error::Singular { condition: cond });
    }
    if let Some(ch) = m.clone().cholesky() {
        return Ok(ch.solve(rhs));
    }
    m.clone().lu().solve(rhs).ok_or(Error::Singular { condition: cond })
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Sub-matrix selecting `rows × cols`.
pub(crate) fn select(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}
