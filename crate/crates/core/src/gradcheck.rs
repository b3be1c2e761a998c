//! Finite-difference checks of every analytic gradient on random instances.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::LabelId;
use crate::error::Result;
use crate::math::{finite_diff_grad, l2_normalize_rows, relative_error};
use crate::nsm::u_eval;
use crate::property::{j_s_eval, j_u_eval};
use crate::rng::{derive_seed, gaussian_mat, seeded_rng, Rng};

pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub instances: usize,
    /// Worst relative error of the seen-label objective, over both `W` and `B_s`.
    pub j_s: f64,
    pub j_s_w: f64,
    pub j_s_bs: f64,
    pub j_u: f64,
    pub u: f64,
}

impl GradcheckReport {
    pub fn max(&self) -> f64 {
        self.j_s.max(self.j_u).max(self.u)
    }
}

fn dim(rng: &mut Rng, lo: usize, hi: usize) -> usize {
    rng.random_range(lo..=hi)
}

fn check_j_s(rng: &mut Rng) -> Result<(f64, f64)> {
    let (s, f, p, d) = (
        dim(rng, 2, 5),
        dim(rng, 1, 6),
        dim(rng, 1, 6),
        dim(rng, 1, 6),
    );
    let x = gaussian_mat(s, f, 1.0, rng);
    let w = gaussian_mat(f, p, 1.0, rng);
    let b_s = gaussian_mat(s, p, 1.0, rng);
    let l_s = gaussian_mat(s, d, 1.0, rng);
    let alpha = rng.random_range(0.0..=1.0);
    let lambda = rng.random_range(0.0..=1.0);
    let (_, gw, gb) = j_s_eval(&w, &b_s, &x, &l_s, alpha, lambda)?;
    let fw = finite_diff_grad(
        |m| j_s_eval(m, &b_s, &x, &l_s, alpha, lambda).map_or(f64::NAN, |r| r.0),
        &w,
        FD_STEP,
    )?;
    let fb = finite_diff_grad(
        |m| j_s_eval(&w, m, &x, &l_s, alpha, lambda).map_or(f64::NAN, |r| r.0),
        &b_s,
        FD_STEP,
    )?;
    Ok((relative_error(&gw, &fw), relative_error(&gb, &fb)))
}

fn check_j_u(rng: &mut Rng) -> Result<f64> {
    let (s, u, p, d) = (
        dim(rng, 1, 4),
        dim(rng, 1, 4),
        dim(rng, 1, 6),
        dim(rng, 1, 6),
    );
    let b_s = gaussian_mat(s, p, 1.0, rng);
    let b_u = gaussian_mat(u, p, 1.0, rng);
    let l_s = gaussian_mat(s, d, 1.0, rng);
    let l_u = gaussian_mat(u, d, 1.0, rng);
    let (_, g) = j_u_eval(&b_u, &b_s, &l_s, &l_u)?;
    let fd = finite_diff_grad(
        |m| j_u_eval(m, &b_s, &l_s, &l_u).map_or(f64::NAN, |r| r.0),
        &b_u,
        FD_STEP,
    )?;
    Ok(relative_error(&g, &fd))
}

fn check_u(rng: &mut Rng) -> Result<f64> {
    let (n, c, f, p) = (
        dim(rng, 1, 6),
        dim(rng, 2, 5),
        dim(rng, 1, 6),
        dim(rng, 1, 6),
    );
    let x = gaussian_mat(n, f, 1.0, rng);
    let labels: Vec<LabelId> = (0..n).map(|_| LabelId(rng.random_range(0..c))).collect();
    let b = l2_normalize_rows(&gaussian_mat(c, p, 1.0, rng)).mat;
    let v = gaussian_mat(f, p, 0.5, rng);
    let lambda = rng.random_range(0.0..=1.0);
    let (_, g) = u_eval(&v, &x, &labels, &b, lambda)?;
    let fd = finite_diff_grad(
        |m| u_eval(m, &x, &labels, &b, lambda).map_or(f64::NAN, |r| r.0),
        &v,
        FD_STEP,
    )?;
    Ok(relative_error(&g, &fd))
}

/// Runs each suite on `instances` random problems (dims <= 6, <= 5 classes).
pub fn run_gradcheck(instances: usize, seed: u64) -> Result<GradcheckReport> {
    let mut rng_s = seeded_rng(derive_seed(seed, 1));
    let mut rng_u = seeded_rng(derive_seed(seed, 2));
    let mut rng_v = seeded_rng(derive_seed(seed, 3));
    let mut rep = GradcheckReport {
        instances,
        j_s: 0.0,
        j_s_w: 0.0,
        j_s_bs: 0.0,
        j_u: 0.0,
        u: 0.0,
    };
    for _ in 0..instances {
        let (ew, eb) = check_j_s(&mut rng_s)?;
        rep.j_s_w = rep.j_s_w.max(ew);
        rep.j_s_bs = rep.j_s_bs.max(eb);
        rep.j_u = rep.j_u.max(check_j_u(&mut rng_u)?);
        rep.u = rep.u.max(check_u(&mut rng_v)?);
    }
    rep.j_s = rep.j_s_w.max(rep.j_s_bs);
    Ok(rep)
}
