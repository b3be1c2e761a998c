//! Neighborhood-sensitive mapping.
//!
//! Learns a linear map `V` from features to a space of unit-norm class
//! vectors `B` by maximizing
//!
//! ```text
//! U(V) = sum_{(k,i)} sum_{j != i} log sigmoid(x_k V (b_i - b_j)^T) - lambda_v ||V||^2
//! ```
//!
//! a smooth surrogate for the log-probability that every mapped instance
//! lands strictly closer to its own class vector than to any rival. The
//! rivals `j` range over all classes, seen and unseen.

use serde::{Deserialize, Serialize};

use crate::data::{LabelId, Vocab};
use crate::error::{Error, Result};
use crate::math::{self, ensure_shape, frob2, gd_descend, log_sigmoid, sigmoid, GdConfig, Mat};

/// Allowed deviation from unit norm for class rows.
pub const UNIT_NORM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NsmConfig {
    pub lambda_v: f64,
    pub gd: GdConfig,
}

impl Default for NsmConfig {
    fn default() -> Self {
        Self {
            lambda_v: 0.5,
            gd: GdConfig {
                step_size: 0.01,
                ..GdConfig::default()
            },
        }
    }
}

impl NsmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_v >= 0.0 && self.lambda_v.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda_v must be >= 0, got {}",
                self.lambda_v
            )));
        }
        self.gd.validate()
    }
}

/// Rows must be unit norm; exactly-zero rows (degenerate classes) are tolerated.
pub(crate) fn check_unit_rows(b: &Mat) -> Result<()> {
    for i in 0..b.nrows() {
        let n = b.row(i).norm();
        if n != 0.0 && (n - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::invalid(format!(
                "class row {i} has norm {n}, expected 1"
            )));
        }
    }
    Ok(())
}

fn check_labels(labels: &[LabelId], n_classes: usize) -> Result<()> {
    match labels.iter().find(|id| id.0 >= n_classes) {
        Some(bad) => Err(Error::invalid(format!(
            "instance label {} has no class row ({} classes)",
            bad.0, n_classes
        ))),
        None => Ok(()),
    }
}

/// Surrogate `U` and its gradient in `V`. `x` holds one instance per row.
///
/// The constant `-log C` is omitted.
pub fn u_eval(v: &Mat, x: &Mat, labels: &[LabelId], b: &Mat, lambda_v: f64) -> Result<(f64, Mat)> {
    ensure_shape(v, x.ncols(), b.ncols(), "V")?;
    if labels.len() != x.nrows() {
        return Err(Error::shape(format!(
            "{} labels for {} instances",
            labels.len(),
            x.nrows()
        )));
    }
    check_labels(labels, b.nrows())?;
    check_unit_rows(b)?;
    Ok(u_eval_unchecked(v, x, labels, b, lambda_v))
}

fn u_eval_unchecked(v: &Mat, x: &Mat, labels: &[LabelId], b: &Mat, lambda_v: f64) -> (f64, Mat) {
    let n_classes = b.nrows();
    // scores[k, j] = x_k V b_j^T, so z_kj = scores[k, i] - scores[k, j].
    let scores = x * v * b.transpose();
    let mut coeff = Mat::zeros(x.nrows(), n_classes);
    let mut value = 0.0;
    for (k, label) in labels.iter().enumerate() {
        let i = label.0;
        let own = scores[(k, i)];
        let mut own_coeff = 0.0;
        for j in 0..n_classes {
            if j == i {
                continue;
            }
            let z = own - scores[(k, j)];
            value += log_sigmoid(z);
            let w = sigmoid(-z);
            coeff[(k, j)] = -w;
            own_coeff += w;
        }
        coeff[(k, i)] = own_coeff;
    }
    value -= lambda_v * frob2(v);
    let grad = x.transpose() * (coeff * b) - v * (2.0 * lambda_v);
    (value, grad)
}

/// A fitted map.
#[derive(Debug, Clone, PartialEq)]
pub struct NsmModel {
    pub v: Mat,
    /// Class ids in `B` row order.
    pub property_labels: Vec<LabelId>,
    pub config: NsmConfig,
}

#[derive(Debug, Clone)]
pub struct NsmFit {
    pub model: NsmModel,
    /// Trace of `-U`, non-increasing.
    pub trace: Vec<f64>,
}

/// Maximizes `U` from `V = 0` by descending on `-U`.
///
/// `x`/`labels` are the training instances. `b` holds unit-norm vectors for
/// every class, seen and unseen, indexed by label id.
pub fn fit_nsm(x: &Mat, labels: &[LabelId], b: &Mat, cfg: &NsmConfig) -> Result<NsmFit> {
    cfg.validate()?;
    if x.nrows() == 0 {
        return Err(Error::invalid("no training instances for the mapping"));
    }
    if labels.len() != x.nrows() {
        return Err(Error::shape(format!(
            "{} labels for {} instances",
            labels.len(),
            x.nrows()
        )));
    }
    if b.nrows() < 2 {
        return Err(Error::invalid("the mapping needs at least two classes"));
    }
    check_labels(labels, b.nrows())?;
    check_unit_rows(b)?;
    let v0 = Mat::zeros(x.ncols(), b.ncols());
    let descent = gd_descend(
        |p| {
            let (u, g) = u_eval_unchecked(&p[0], x, labels, b, cfg.lambda_v);
            Ok((-u, vec![-g]))
        },
        vec![v0],
        &cfg.gd,
    )?;
    let trace = descent.trace;
    let v = descent.params.into_iter().next().expect("one block");
    Ok(NsmFit {
        model: NsmModel {
            v,
            property_labels: (0..b.nrows()).map(LabelId).collect(),
            config: cfg.clone(),
        },
        trace,
    })
}

/// Fraction of rival classes `j` with `x V (b_i - b_j)^T > 0`.
///
/// Exact ties count as failures.
pub fn s_q_empirical(x: &[f64], label: LabelId, v: &Mat, b: &Mat) -> Result<f64> {
    let n_classes = b.nrows();
    if n_classes < 2 {
        return Err(Error::invalid("need at least two classes"));
    }
    if v.nrows() != x.len() || v.ncols() != b.ncols() {
        return Err(Error::shape("x, V and B dimensions disagree"));
    }
    check_labels(&[label], n_classes)?;
    let mapped = map_point(x, v);
    let scores = b * &mapped;
    let own = scores[label.0];
    let wins = (0..n_classes)
        .filter(|&j| j != label.0 && own - scores[j] > 0.0)
        .count();
    Ok(wins as f64 / (n_classes - 1) as f64)
}

/// `x V` as a column vector.
pub fn map_point(x: &[f64], v: &Mat) -> nalgebra::DVector<f64> {
    v.tr_mul(&nalgebra::DVector::from_column_slice(x))
}

impl NsmModel {
    pub fn to_file(&self, classes: &Vocab) -> NsmModelFile {
        NsmModelFile {
            lambda_v: self.config.lambda_v,
            labels: classes.names(&self.property_labels),
            v: self.v.clone(),
        }
    }
}

/// JSON layout of a mapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NsmModelFile {
    pub lambda_v: f64,
    pub labels: Vec<String>,
    #[serde(rename = "V", with = "math::serde_rows")]
    pub v: Mat,
}
