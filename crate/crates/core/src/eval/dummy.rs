//! Reference learners with known behavior, for checking the harness itself.

use std::sync::Mutex;

use rand::seq::SliceRandom;

use super::{Learner, Predictor};
use crate::classifiers::Ranking;
use crate::data::{Instance, LabelId};
use crate::error::Result;
use crate::pipeline::ZeroShotTask;
use crate::rng::{derive_seed, seeded_rng, stream, Rng};

/// Always ranks the true label first.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleLearner;

/// Orders candidates by label id, ignoring the instance.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantLearner;

/// Uniformly random ordering, seeded from the trial seed.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomLearner;

struct Oracle;
struct Constant;
struct Shuffler(Mutex<Rng>);

impl Learner for OracleLearner {
    fn name(&self) -> String {
        "ORACLE".into()
    }

    fn fit(&self, _task: &ZeroShotTask<'_>) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(Oracle))
    }
}

impl Learner for ConstantLearner {
    fn name(&self) -> String {
        "CONSTANT".into()
    }

    fn fit(&self, _task: &ZeroShotTask<'_>) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(Constant))
    }
}

impl Learner for RandomLearner {
    fn name(&self) -> String {
        "RANDOM".into()
    }

    fn fit(&self, task: &ZeroShotTask<'_>) -> Result<Box<dyn Predictor>> {
        let rng = seeded_rng(derive_seed(task.seed(), stream::DUMMY));
        Ok(Box::new(Shuffler(Mutex::new(rng))))
    }
}

impl Predictor for Oracle {
    fn rank(&self, instance: &Instance, candidates: &[LabelId]) -> Result<Ranking> {
        Ok(Ranking::from_scores(
            candidates
                .iter()
                .map(|&c| (c, if c == instance.label { 0.0 } else { 1.0 }))
                .collect(),
        ))
    }
}

impl Predictor for Constant {
    fn rank(&self, _instance: &Instance, candidates: &[LabelId]) -> Result<Ranking> {
        Ok(Ranking::from_scores(
            candidates.iter().map(|&c| (c, 0.0)).collect(),
        ))
    }
}

impl Predictor for Shuffler {
    fn rank(&self, _instance: &Instance, candidates: &[LabelId]) -> Result<Ranking> {
        let mut order = candidates.to_vec();
        order.sort_unstable();
        order.dedup();
        order.shuffle(&mut *self.0.lock().expect("rng lock"));
        Ok(Ranking::from_scores(
            order
                .into_iter()
                .enumerate()
                .map(|(i, c)| (c, i as f64))
                .collect(),
        ))
    }
}
