//! Dense-matrix primitives shared by every learner.
//!
//! Matrices are `nalgebra::DMatrix<f64>`; anything that crosses a file or
//! JSON boundary is converted to row-major order first.

mod fd;
mod optim;

pub use fd::{finite_diff_grad, relative_error};
pub use optim::{gd_descend, Descent, GdConfig, StopReason};

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;

/// Builds a matrix from row-major entries.
pub fn from_row_major(rows: usize, cols: usize, entries: &[f64]) -> Result<Mat> {
    if rows * cols != entries.len() {
        return Err(Error::shape(format!(
            "{rows}x{cols} matrix needs {} entries, got {}",
            rows * cols,
            entries.len()
        )));
    }
    Ok(DMatrix::from_row_slice(rows, cols, entries))
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<Mat> {
    let cols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
        return Err(Error::shape(format!(
            "row {bad} has {} entries, expected {cols}",
            rows[bad].len()
        )));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    from_row_major(rows.len(), cols, &flat)
}

pub fn to_row_major(m: &Mat) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        out.extend(m.row(i).iter());
    }
    out
}

pub fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

pub fn is_finite(m: &Mat) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Squared Frobenius norm.
pub fn frob2(m: &Mat) -> f64 {
    m.iter().map(|v| v * v).sum()
}

pub(crate) fn ensure_shape(m: &Mat, rows: usize, cols: usize, what: &str) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(Error::shape(format!(
            "{what} is {}x{}, expected {rows}x{cols}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// `log(1 / (1 + exp(-z)))` without overflow.
#[inline]
pub fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// `1 / (1 + exp(-z))`, evaluated on the side that cannot overflow.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Checked form of [`log_sigmoid`].
pub fn stable_log_sigmoid(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::invalid(format!("log-sigmoid of non-finite {z}")));
    }
    Ok(log_sigmoid(z))
}

/// Solves `argmin_Z ||A Z - Y||^2 + lam ||Z||^2` through the normal equations.
///
/// With `lam > 0` the system is always positive definite. With `lam == 0` a
/// rank-deficient `A` is reported as [`Error::Singular`].
pub fn ridge_solve(a: &Mat, y: &Mat, lam: f64) -> Result<Mat> {
    if a.nrows() == 0 || a.ncols() == 0 || y.ncols() == 0 {
        return Err(Error::invalid("ridge_solve needs non-empty A and Y"));
    }
    if a.nrows() != y.nrows() {
        return Err(Error::shape(format!(
            "A has {} rows but Y has {}",
            a.nrows(),
            y.nrows()
        )));
    }
    if !(lam >= 0.0 && lam.is_finite()) {
        return Err(Error::invalid(format!(
            "ridge penalty must be >= 0, got {lam}"
        )));
    }
    let at = a.transpose();
    let mut gram = &at * a;
    for i in 0..gram.nrows() {
        gram[(i, i)] += lam;
    }
    let rhs = &at * y;

    let scale = gram.diagonal().max();
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Singular("A^T A + lam I is not positive definite".into()))?;
    if lam == 0.0 {
        let min_pivot = chol
            .l_dirty()
            .diagonal()
            .iter()
            .fold(f64::INFINITY, |m, v| m.min(v * v));
        if min_pivot.is_nan() || min_pivot <= 1e-13 * scale {
            return Err(Error::Singular("A^T A is numerically singular".into()));
        }
    }
    let z = chol.solve(&rhs);
    if !is_finite(&z) {
        return Err(Error::Numeric("ridge solution is not finite".into()));
    }
    Ok(z)
}

/// Result of [`l2_normalize_rows`].
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub mat: Mat,
    /// Rows that were exactly zero and were left untouched.
    pub zero_rows: Vec<usize>,
}

/// Scales every nonzero row to unit Euclidean norm.
pub fn l2_normalize_rows(m: &Mat) -> Normalized {
    let mut mat = m.clone();
    let mut zero_rows = Vec::new();
    for i in 0..mat.nrows() {
        let norm = mat.row(i).norm();
        if norm > 0.0 {
            mat.row_mut(i).unscale_mut(norm);
        } else {
            zero_rows.push(i);
        }
    }
    Normalized { mat, zero_rows }
}

/// Serde adapter storing a matrix as an array of rows.
pub mod serde_rows {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Mat, s: S) -> std::result::Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Mat, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows).map_err(serde::de::Error::custom)
    }
}
