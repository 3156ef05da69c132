//! Weighted least squares on top of a column-pivoted QR factorization.
//!
//! Rank is decided from the diagonal of `R` relative to its largest entry;
//! a deficient design is an error rather than a pseudo-inverse solution.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative threshold on `|R_kk| / |R_00|` below which a column is treated as dependent.
pub const RANK_TOL: f64 = 1e-10;

/// Solves `min_b Σ w_i (y_i - x_i'b)^2` for a row-major design with `cols` columns.
///
/// `weights = None` gives ordinary least squares.
pub fn weighted_least_squares(
    design: &[f64],
    cols: usize,
    y: &[f64],
    weights: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let rows = y.len();
    if cols == 0 || design.len() != rows * cols {
        return Err(Error::InvalidArgument(format!(
            "design has {} entries, expected {} x {}",
            design.len(),
            rows,
            cols
        )));
    }
    if let Some(w) = weights {
        if w.len() != rows {
            return Err(Error::InvalidArgument(format!(
                "{} weights for {} observations",
                w.len(),
                rows
            )));
        }
        if let Some(bad) = w.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "regression weights must be positive and finite, got {bad}"
            )));
        }
    }
    if rows < cols {
        return Err(Error::SingularDesign { rank: rows, cols });
    }

    let scale = |i: usize| weights.map_or(1.0, |w| w[i].sqrt());
    let x = DMatrix::from_fn(rows, cols, |i, j| scale(i) * design[i * cols + j]);
    let mut rhs = DVector::from_fn(rows, |i, _| scale(i) * y[i]);

    let qr = x.col_piv_qr();
    let r = qr.r();
    let lead = r[(0, 0)].abs();
    let rank = (0..cols)
        .take_while(|&k| lead > 0.0 && r[(k, k)].abs() > RANK_TOL * lead)
        .count();
    if rank < cols {
        return Err(Error::SingularDesign { rank, cols });
    }

    qr.q_tr_mul(&mut rhs);
    let mut coef = DVector::from_fn(cols, |i, _| rhs[i]);
    for k in (0..cols).rev() {
        let mut acc = coef[k];
        for j in k + 1..cols {
            acc -= r[(k, j)] * coef[j];
        }
        coef[k] = acc / r[(k, k)];
    }
    qr.p().inv_permute_rows(&mut coef);
    Ok(coef.iter().copied().collect())
}

/// Prepends an intercept column to a row-major matrix.
pub fn with_intercept(z: &[f64], rows: usize, p: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * (p + 1));
    for i in 0..rows {
        out.push(1.0);
        out.extend_from_slice(&z[i * p..(i + 1) * p]);
    }
    out
}
