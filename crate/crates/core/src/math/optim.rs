use serde::{Deserialize, Serialize};

use super::{is_finite, Mat};
use crate::error::{Error, Result};

/// Settings for [`gd_descend`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GdConfig {
    /// Initial step tried at every iteration before backtracking.
    pub step_size: f64,
    pub max_iters: usize,
    /// Stop once `(f_prev - f_next) <= rel_tol * |f_prev|`.
    pub rel_tol: f64,
    /// Seed for any random initialization performed by the caller.
    pub seed: u64,
}

impl Default for GdConfig {
    fn default() -> Self {
        Self {
            step_size: 0.1,
            max_iters: 2000,
            rel_tol: 1e-6,
            seed: 0,
        }
    }
}

impl GdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::invalid(format!(
                "step_size must be > 0, got {}",
                self.step_size
            )));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::invalid(format!(
                "rel_tol must be > 0, got {}",
                self.rel_tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be >= 1"));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    RelTol,
    MaxIters,
    /// No step size down to `step_size * 2^-MAX_HALVINGS` decreased the objective.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct Descent {
    pub params: Vec<Mat>,
    /// Objective at the initial point followed by one entry per accepted step.
    pub trace: Vec<f64>,
    pub stop: StopReason,
}

impl Descent {
    pub fn final_value(&self) -> f64 {
        *self
            .trace
            .last()
            .expect("trace always holds the initial value")
    }
}

const MAX_HALVINGS: u32 = 60;

/// Full-batch gradient descent with step halving.
///
/// Every iteration starts from `cfg.step_size` and halves it until the
/// objective does not increase, so the recorded trace is non-increasing.
pub fn gd_descend<F>(mut objective: F, init: Vec<Mat>, cfg: &GdConfig) -> Result<Descent>
where
    F: FnMut(&[Mat]) -> Result<(f64, Vec<Mat>)>,
{
    cfg.validate()?;
    let mut params = init;
    let (mut value, mut grads) = objective(&params)?;
    check_grads(&params, &grads)?;
    if !value.is_finite() || !grads.iter().all(is_finite) {
        return Err(Error::Numeric(
            "objective or gradient not finite at the initial point".into(),
        ));
    }

    let mut trace = vec![value];
    let mut stop = StopReason::MaxIters;
    for _ in 0..cfg.max_iters {
        let mut step = cfg.step_size;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let candidate: Vec<Mat> = params
                .iter()
                .zip(&grads)
                .map(|(p, g)| p - g * step)
                .collect();
            let (cand_value, cand_grads) = objective(&candidate)?;
            if cand_value.is_finite() && cand_value <= value && cand_grads.iter().all(is_finite) {
                accepted = Some((candidate, cand_value, cand_grads));
                break;
            }
            step *= 0.5;
        }
        let Some((candidate, cand_value, cand_grads)) = accepted else {
            stop = StopReason::Stalled;
            break;
        };
        check_grads(&candidate, &cand_grads)?;
        let decrease = value - cand_value;
        let done = decrease <= cfg.rel_tol * value.abs();
        params = candidate;
        value = cand_value;
        grads = cand_grads;
        trace.push(value);
        if done {
            stop = StopReason::RelTol;
            break;
        }
    }
    Ok(Descent {
        params,
        trace,
        stop,
    })
}

fn check_grads(params: &[Mat], grads: &[Mat]) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::shape(format!(
            "{} parameter blocks but {} gradients",
            params.len(),
            grads.len()
        )));
    }
    for (k, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() {
            return Err(Error::shape(format!(
                "gradient {k} is {:?}, parameter is {:?}",
                g.shape(),
                p.shape()
            )));
        }
    }
    Ok(())
}
