//! Data-dependent property embeddings.
//!
//! Seen labels get property vectors `B_s` and a feature map `W` by jointly
//! minimizing
//!
//! ```text
//! J_s = alpha ||X W - B_s||^2 + (1 - alpha) ||B_s B_s^T - L_s L_s^T||^2 + lambda ||W||^2
//! ```
//!
//! where `X` holds label-averaged features and `L_s` the unit-normalized
//! semantic vectors. Unseen labels are then placed so their similarities to
//! the seen properties reproduce their semantic similarities:
//!
//! ```text
//! J_u = ||B_s B_u^T - L_s L_u^T||^2
//! ```

use serde::{Deserialize, Serialize};

use crate::data::{LabelId, Vocab};
use crate::error::{Error, Result};
use crate::math::{
    self, ensure_shape, frob2, gd_descend, l2_normalize_rows, ridge_solve, GdConfig, Mat,
};
use crate::rng::{gaussian_mat, seeded_rng};

/// Standard deviation of the Gaussian `B_s` initialization.
pub const INIT_STD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropertyConfig {
    /// Weight of the data-fit term against the gram term.
    pub alpha: f64,
    pub lambda_w: f64,
    /// Property dimensionality.
    pub n_prime: usize,
    pub gd: GdConfig,
    /// Ridge added to `B_s^T B_s` when solving for unseen properties.
    pub ridge_eps: f64,
}

impl Default for PropertyConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            lambda_w: 0.5,
            n_prime: 10,
            gd: GdConfig::default(),
            ridge_eps: 1e-8,
        }
    }
}

impl PropertyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!(
                "alpha must be in [0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.lambda_w >= 0.0 && self.lambda_w.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda_w must be >= 0, got {}",
                self.lambda_w
            )));
        }
        if self.n_prime == 0 {
            return Err(Error::invalid("n_prime must be >= 1"));
        }
        if !(self.ridge_eps > 0.0 && self.ridge_eps.is_finite()) {
            return Err(Error::invalid(format!(
                "ridge_eps must be > 0, got {}",
                self.ridge_eps
            )));
        }
        self.gd.validate()
    }
}

/// Value and gradients of `J_s`.
pub fn j_s_eval(
    w: &Mat,
    b_s: &Mat,
    x: &Mat,
    l_s: &Mat,
    alpha: f64,
    lambda_w: f64,
) -> Result<(f64, Mat, Mat)> {
    let (s, f) = x.shape();
    let n_prime = w.ncols();
    ensure_shape(w, f, n_prime, "W")?;
    ensure_shape(b_s, s, n_prime, "B_s")?;
    if l_s.nrows() != s {
        return Err(Error::shape(format!(
            "L_s has {} rows, X has {s}",
            l_s.nrows()
        )));
    }
    let resid = x * w - b_s;
    let gram_gap = b_s * b_s.transpose() - l_s * l_s.transpose();
    let value = alpha * frob2(&resid) + (1.0 - alpha) * frob2(&gram_gap) + lambda_w * frob2(w);
    let grad_w = x.transpose() * &resid * (2.0 * alpha) + w * (2.0 * lambda_w);
    let grad_b = &resid * (-2.0 * alpha) + &gram_gap * b_s * (4.0 * (1.0 - alpha));
    Ok((value, grad_w, grad_b))
}

/// Outcome of [`fit_seen`].
#[derive(Debug, Clone)]
pub struct SeenFit {
    pub w: Mat,
    pub b_s: Mat,
    pub trace: Vec<f64>,
}

/// Minimizes `J_s` jointly over `(W, B_s)` from `W = 0`,
/// `B_s ~ N(0, INIT_STD^2)` drawn from `cfg.gd.seed`.
///
/// Rows of `l_s` are unit-normalized before the gram matrix is formed.
pub fn fit_seen(x: &Mat, l_s: &Mat, cfg: &PropertyConfig) -> Result<SeenFit> {
    cfg.validate()?;
    if x.nrows() != l_s.nrows() {
        return Err(Error::shape(format!(
            "X has {} rows but L_s has {}",
            x.nrows(),
            l_s.nrows()
        )));
    }
    if x.nrows() == 0 {
        return Err(Error::invalid("no seen labels to fit"));
    }
    let l_s = l2_normalize_rows(l_s).mat;
    let w0 = Mat::zeros(x.ncols(), cfg.n_prime);
    let b0 = gaussian_mat(
        x.nrows(),
        cfg.n_prime,
        INIT_STD,
        &mut seeded_rng(cfg.gd.seed),
    );
    let descent = gd_descend(
        |p| {
            let (v, gw, gb) = j_s_eval(&p[0], &p[1], x, &l_s, cfg.alpha, cfg.lambda_w)?;
            Ok((v, vec![gw, gb]))
        },
        vec![w0, b0],
        &cfg.gd,
    )?;
    let mut params = descent.params.into_iter();
    Ok(SeenFit {
        w: params.next().expect("two blocks"),
        b_s: params.next().expect("two blocks"),
        trace: descent.trace,
    })
}

/// Value and gradient of `J_u` with respect to `B_u`.
pub fn j_u_eval(b_u: &Mat, b_s: &Mat, l_s: &Mat, l_u: &Mat) -> Result<(f64, Mat)> {
    let n_prime = b_s.ncols();
    ensure_shape(b_u, l_u.nrows(), n_prime, "B_u")?;
    if l_s.nrows() != b_s.nrows() {
        return Err(Error::shape(format!(
            "L_s has {} rows, B_s has {}",
            l_s.nrows(),
            b_s.nrows()
        )));
    }
    if l_s.ncols() != l_u.ncols() {
        return Err(Error::shape(format!(
            "L_s is {}-dim, L_u is {}-dim",
            l_s.ncols(),
            l_u.ncols()
        )));
    }
    // gap^T = B_u B_s^T - L_u L_s^T
    let gap_t = b_u * b_s.transpose() - l_u * l_s.transpose();
    let value = frob2(&gap_t);
    let grad = &gap_t * b_s * 2.0;
    Ok((value, grad))
}

/// Closed-form minimizer of `J_u`:
/// `B_u^T = (B_s^T B_s + eps I)^-1 B_s^T L_s L_u^T`.
pub fn fit_unseen(b_s: &Mat, l_s: &Mat, l_u: &Mat, ridge_eps: f64) -> Result<Mat> {
    if ridge_eps.is_nan() || ridge_eps <= 0.0 {
        return Err(Error::invalid(format!(
            "ridge_eps must be > 0, got {ridge_eps}"
        )));
    }
    if l_s.nrows() != b_s.nrows() || l_s.ncols() != l_u.ncols() {
        return Err(Error::shape("L_s/L_u/B_s shapes disagree"));
    }
    let target = l_s * l_u.transpose();
    Ok(ridge_solve(b_s, &target, ridge_eps)?.transpose())
}

/// Fitted property space for one seen/unseen split.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyModel {
    pub w: Mat,
    pub b_s: Mat,
    pub b_u: Mat,
    pub seen: Vec<LabelId>,
    pub unseen: Vec<LabelId>,
    pub config: PropertyConfig,
    pub normalized: bool,
}

/// A fitted model plus its optimization trace.
#[derive(Debug, Clone)]
pub struct PropertyFit {
    /// Unnormalized solution of `J_s` / `J_u`.
    pub raw: PropertyModel,
    pub trace: Vec<f64>,
}

impl PropertyFit {
    /// Row-normalized model used for mapping and classification.
    pub fn model(&self) -> PropertyModel {
        self.raw.normalized()
    }
}

/// Runs both stages. `class_semantics` has one row per class id.
pub fn fit_property_model(
    x_seen: &Mat,
    class_semantics: &Mat,
    seen: &[LabelId],
    unseen: &[LabelId],
    cfg: &PropertyConfig,
) -> Result<PropertyFit> {
    let l = l2_normalize_rows(class_semantics).mat;
    let pick = |ids: &[LabelId]| -> Result<Mat> {
        let mut m = Mat::zeros(ids.len(), l.ncols());
        for (r, id) in ids.iter().enumerate() {
            if id.0 >= l.nrows() {
                return Err(Error::invalid(format!("label id {} out of range", id.0)));
            }
            m.row_mut(r).copy_from(&l.row(id.0));
        }
        Ok(m)
    };
    let l_s = pick(seen)?;
    let l_u = pick(unseen)?;
    let seen_fit = fit_seen(x_seen, &l_s, cfg)?;
    let b_u = if unseen.is_empty() {
        Mat::zeros(0, cfg.n_prime)
    } else {
        fit_unseen(&seen_fit.b_s, &l_s, &l_u, cfg.ridge_eps)?
    };
    Ok(PropertyFit {
        raw: PropertyModel {
            w: seen_fit.w,
            b_s: seen_fit.b_s,
            b_u,
            seen: seen.to_vec(),
            unseen: unseen.to_vec(),
            config: cfg.clone(),
            normalized: false,
        },
        trace: seen_fit.trace,
    })
}

impl PropertyModel {
    pub fn n_prime(&self) -> usize {
        self.w.ncols()
    }

    pub fn normalized(&self) -> PropertyModel {
        PropertyModel {
            b_s: l2_normalize_rows(&self.b_s).mat,
            b_u: l2_normalize_rows(&self.b_u).mat,
            normalized: true,
            ..self.clone()
        }
    }

    /// Property vectors for every class, rows indexed by label id.
    pub fn class_matrix(&self, n_classes: usize) -> Result<Mat> {
        let mut m = Mat::zeros(n_classes, self.n_prime());
        let mut filled = vec![false; n_classes];
        for (ids, rows) in [(&self.seen, &self.b_s), (&self.unseen, &self.b_u)] {
            for (r, id) in ids.iter().enumerate() {
                if id.0 >= n_classes {
                    return Err(Error::invalid(format!("label id {} out of range", id.0)));
                }
                m.row_mut(id.0).copy_from(&rows.row(r));
                filled[id.0] = true;
            }
        }
        if let Some(missing) = filled.iter().position(|f| !f) {
            return Err(Error::MissingData(format!(
                "no property vector for label id {missing}"
            )));
        }
        Ok(m)
    }

    pub fn to_file(&self, classes: &Vocab) -> PropertyModelFile {
        PropertyModelFile {
            n_prime: self.n_prime(),
            alpha: self.config.alpha,
            lambda_w: self.config.lambda_w,
            labels_seen: classes.names(&self.seen),
            labels_unseen: classes.names(&self.unseen),
            w: self.w.clone(),
            b_s: self.b_s.clone(),
            b_u: self.b_u.clone(),
            normalized: self.normalized,
        }
    }
}

/// JSON layout of a property model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyModelFile {
    pub n_prime: usize,
    pub alpha: f64,
    pub lambda_w: f64,
    pub labels_seen: Vec<String>,
    pub labels_unseen: Vec<String>,
    #[serde(rename = "W", with = "math::serde_rows")]
    pub w: Mat,
    #[serde(rename = "B_s", with = "math::serde_rows")]
    pub b_s: Mat,
    #[serde(rename = "B_u", with = "math::serde_rows")]
    pub b_u: Mat,
    pub normalized: bool,
}
