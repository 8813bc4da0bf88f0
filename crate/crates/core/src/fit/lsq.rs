use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative pivot size below which the design matrix is treated as rank deficient.
const RANK_TOL: f64 = 1e-10;

/// Unweighted linear least squares `min |A x - y|` via Householder QR.
pub(crate) fn least_squares(design: DMatrix<f64>, y: &[f64]) -> Result<Vec<f64>> {
    let (rows, cols) = design.shape();
    if rows < cols {
        return Err(Error::Degenerate(format!(
            "{rows} observations for {cols} unknowns"
        )));
    }
    let qr = design.qr();
    let r = qr.r();
    let max_pivot = (0..cols).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if max_pivot == 0.0 || (0..cols).any(|i| r[(i, i)].abs() <= RANK_TOL * max_pivot) {
        return Err(Error::Degenerate("design matrix is rank deficient".into()));
    }
    let qty = qr.q().transpose() * DVector::from_column_slice(y);
    let x = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Degenerate("singular triangular factor".into()))?;
    Ok(x.iter().copied().collect())
}

/// Design matrix whose row `i` is `basis(xs[i])`.
pub(crate) fn design<const K: usize>(xs: &[f64], basis: impl Fn(f64) -> [f64; K]) -> DMatrix<f64> {
    DMatrix::from_fn(xs.len(), K, |i, j| basis(xs[i])[j])
}
