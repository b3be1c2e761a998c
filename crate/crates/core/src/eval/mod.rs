//! Zero-shot evaluation protocols.
//!
//! Every protocol repeats the same trial shape: pick held-out labels, drop
//! them from training, refit every method, then rank the held-out
//! instances against a candidate set. The protocols differ in how many
//! labels are held out and which candidates are offered:
//!
//! | kind           | held out          | candidates |
//! |----------------|-------------------|------------|
//! | `binary_pairs` | 2                 | the pair   |
//! | `kway`         | `group_size`      | the group  |
//! | `full_set`     | 1                 | all labels |
//! | `topk`         | `n_unseen`        | all labels |
//!
//! Trial `t` is seeded with `derive_seed(master_seed, t)` and depends on
//! nothing else, so trials can run in any order or in parallel.

pub mod dummy;
mod stats;

pub use stats::{mean_rank, paired_ttest, rank_positions, topk_accuracy, TTest};

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::classifiers::{predict, Method, MethodKind, Ranking};
use crate::data::{fmt_f64, sample_labels, FeatureDataset, Instance, LabelId, SplitSpec};
use crate::error::{Error, Result};
use crate::math::Mat;
use crate::pipeline::{ModelSettings, ZeroShotTask};
use crate::rng::{derive_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    BinaryPairs,
    Kway,
    FullSet,
    Topk,
}

impl ProtocolKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::BinaryPairs => "binary_pairs",
            Self::Kway => "kway",
            Self::FullSet => "full_set",
            Self::Topk => "topk",
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub kind: ProtocolKind,
    pub trials: usize,
    /// Labels per group for `kway`.
    pub group_size: usize,
    /// Held-out labels per split for `topk`.
    pub n_unseen: usize,
    /// Cutoffs for `topk`, strictly ascending.
    pub k_values: Vec<usize>,
    pub master_seed: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            kind: ProtocolKind::BinaryPairs,
            trials: 100,
            group_size: 5,
            n_unseen: 100,
            k_values: vec![5, 10, 50],
            master_seed: 0,
        }
    }
}

impl ProtocolConfig {
    /// Checks that do not depend on the dataset.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials must be >= 1"));
        }
        match self.kind {
            ProtocolKind::Kway if self.group_size < 2 => Err(Error::invalid(format!(
                "group_size must be >= 2, got {}",
                self.group_size
            ))),
            ProtocolKind::Topk if self.n_unseen == 0 => {
                Err(Error::invalid("n_unseen must be >= 1"))
            }
            ProtocolKind::Topk if self.k_values.is_empty() => {
                Err(Error::invalid("k_values must not be empty"))
            }
            ProtocolKind::Topk
                if self.k_values[0] == 0 || self.k_values.windows(2).any(|w| w[1] <= w[0]) =>
            {
                Err(Error::invalid(format!(
                    "k_values must be positive and ascending, got {:?}",
                    self.k_values
                )))
            }
            _ => Ok(()),
        }
    }

    fn validate_for(&self, n_labels: usize) -> Result<()> {
        self.validate()?;
        let held_out = self.held_out_count();
        match self.kind {
            ProtocolKind::BinaryPairs | ProtocolKind::FullSet if n_labels < 2 => {
                Err(Error::invalid(format!(
                    "{} needs at least 2 labels, got {n_labels}",
                    self.kind
                )))
            }
            ProtocolKind::Kway if held_out > n_labels => Err(Error::invalid(format!(
                "group_size {held_out} exceeds label count {n_labels}"
            ))),
            ProtocolKind::Topk if held_out >= n_labels => Err(Error::invalid(format!(
                "n_unseen {held_out} must be below label count {n_labels}"
            ))),
            ProtocolKind::Topk if self.k_values.iter().any(|&k| k >= n_labels) => {
                Err(Error::invalid(format!(
                    "every K must be below the label count {n_labels}, got {:?}",
                    self.k_values
                )))
            }
            _ => Ok(()),
        }
    }

    fn held_out_count(&self) -> usize {
        match self.kind {
            ProtocolKind::BinaryPairs => 2,
            ProtocolKind::Kway => self.group_size,
            ProtocolKind::FullSet => 1,
            ProtocolKind::Topk => self.n_unseen,
        }
    }

    /// Metric names reported for this protocol, in report order.
    pub fn metric_names(&self) -> Vec<String> {
        match self.kind {
            ProtocolKind::BinaryPairs => vec!["accuracy".into()],
            ProtocolKind::Kway | ProtocolKind::FullSet => {
                vec!["accuracy".into(), "mean_rank".into()]
            }
            ProtocolKind::Topk => self
                .k_values
                .iter()
                .map(|k| format!("top{k}"))
                .chain(std::iter::once("mean_rank".into()))
                .collect(),
        }
    }

    fn metrics(&self, positions: &[usize]) -> BTreeMap<String, f64> {
        let mean = |p: &[usize]| p.iter().sum::<usize>() as f64 / p.len() as f64;
        let mut out = BTreeMap::new();
        match self.kind {
            ProtocolKind::BinaryPairs => {
                out.insert("accuracy".into(), topk_accuracy(positions, 1));
            }
            ProtocolKind::Kway | ProtocolKind::FullSet => {
                out.insert("accuracy".into(), topk_accuracy(positions, 1));
                out.insert("mean_rank".into(), mean(positions));
            }
            ProtocolKind::Topk => {
                for &k in &self.k_values {
                    out.insert(format!("top{k}"), topk_accuracy(positions, k));
                }
                out.insert("mean_rank".into(), mean(positions));
            }
        }
        out
    }
}

/// Something the harness can train per trial.
pub trait Learner: Sync {
    fn name(&self) -> String;
    fn fit(&self, task: &ZeroShotTask<'_>) -> Result<Box<dyn Predictor>>;
}

/// A trained model that ranks candidate labels for an instance.
///
/// The instance carries its true label so that test doubles can cheat; real
/// methods only read the features.
pub trait Predictor {
    fn rank(&self, instance: &Instance, candidates: &[LabelId]) -> Result<Ranking>;
}

impl Learner for MethodKind {
    fn name(&self) -> String {
        MethodKind::name(*self).to_owned()
    }

    fn fit(&self, task: &ZeroShotTask<'_>) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(task.fit(*self)?))
    }
}

impl Predictor for Method {
    fn rank(&self, instance: &Instance, candidates: &[LabelId]) -> Result<Ranking> {
        predict(self, &instance.features, candidates)
    }
}

/// Options shared by every protocol run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    pub settings: ModelSettings,
    pub standardize_features: bool,
    /// Worker threads for trials. Results do not depend on this.
    #[serde(skip)]
    pub jobs: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            settings: ModelSettings::default(),
            standardize_features: false,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: String,
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub held_out: Vec<String>,
    pub n_test: usize,
    pub results: Vec<MethodResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub means: BTreeMap<String, f64>,
}

/// Paired t-test between two methods on one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestRecord {
    pub metric: String,
    pub method_a: String,
    pub method_b: String,
    pub t: Option<f64>,
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: ProtocolConfig,
    pub options: EvalOptions,
    /// Resolved run configuration supplied by the caller, if any.
    pub config: serde_json::Value,
    pub methods: Vec<String>,
    pub metrics: Vec<String>,
    pub trials: Vec<TrialRecord>,
    pub summary: Vec<MethodSummary>,
    pub ttests: Vec<TTestRecord>,
}

impl EvalReport {
    /// Per-trial values of one metric for one method.
    pub fn values(&self, method: &str, metric: &str) -> Vec<f64> {
        self.trials
            .iter()
            .filter_map(|t| t.results.iter().find(|r| r.method == method))
            .filter_map(|r| r.values.get(metric).copied())
            .collect()
    }

    pub fn mean(&self, method: &str, metric: &str) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.method == method)
            .and_then(|s| s.means.get(metric).copied())
    }

    /// `trial,method,metric,value` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,method,metric,value\n");
        for trial in &self.trials {
            for r in &trial.results {
                for metric in &self.metrics {
                    if let Some(v) = r.values.get(metric) {
                        let _ = writeln!(
                            out,
                            "{},{},{},{}",
                            trial.trial,
                            r.method,
                            metric,
                            fmt_f64(*v)
                        );
                    }
                }
            }
        }
        out
    }

    pub fn file_stem(&self) -> String {
        format!(
            "report_{}_seed{}",
            self.protocol.kind, self.protocol.master_seed
        )
    }

    fn assemble(
        protocol: ProtocolConfig,
        options: EvalOptions,
        methods: Vec<String>,
        trials: Vec<TrialRecord>,
    ) -> Self {
        let metrics = protocol.metric_names();
        let mut report = EvalReport {
            protocol,
            options,
            config: serde_json::Value::Null,
            methods,
            metrics,
            trials,
            summary: Vec::new(),
            ttests: Vec::new(),
        };
        report.summary = report
            .methods
            .iter()
            .map(|m| MethodSummary {
                method: m.clone(),
                means: report
                    .metrics
                    .iter()
                    .map(|metric| {
                        let v = report.values(m, metric);
                        (metric.clone(), v.iter().sum::<f64>() / v.len() as f64)
                    })
                    .collect(),
            })
            .collect();
        for metric in &report.metrics {
            for (i, a) in report.methods.iter().enumerate() {
                for b in &report.methods[i + 1..] {
                    let rec =
                        match paired_ttest(&report.values(a, metric), &report.values(b, metric)) {
                            Ok(tt) => TTestRecord {
                                metric: metric.clone(),
                                method_a: a.clone(),
                                method_b: b.clone(),
                                t: Some(tt.t).filter(|t| t.is_finite()),
                                p: Some(tt.p),
                                note: (!tt.t.is_finite())
                                    .then(|| "constant nonzero difference".to_owned()),
                            },
                            Err(e) => TTestRecord {
                                metric: metric.clone(),
                                method_a: a.clone(),
                                method_b: b.clone(),
                                t: None,
                                p: None,
                                note: Some(e.to_string()),
                            },
                        };
                    report.ttests.push(rec);
                }
            }
        }
        report
    }
}

/// Everything a trial needs.
pub struct Evaluation<'a> {
    pub dataset: &'a FeatureDataset,
    /// Semantic vectors, one row per class id.
    pub class_semantics: &'a Mat,
    pub learners: &'a [&'a dyn Learner],
    pub protocol: &'a ProtocolConfig,
    pub options: &'a EvalOptions,
}

impl Evaluation<'_> {
    fn check(&self) -> Result<()> {
        self.protocol.validate_for(self.dataset.n_classes())?;
        self.options.settings.validate()?;
        if self.learners.is_empty() {
            return Err(Error::invalid("no methods to evaluate"));
        }
        if self.class_semantics.nrows() != self.dataset.n_classes() {
            return Err(Error::shape("one semantic row per class is required"));
        }
        Ok(())
    }

    /// Labels held out in trial `t`.
    pub fn held_out(&self, trial: usize) -> Vec<LabelId> {
        let seed = derive_seed(self.protocol.master_seed, trial as u64);
        sample_labels(
            self.dataset.n_classes(),
            self.protocol.held_out_count(),
            derive_seed(seed, stream::SPLIT),
        )
        .into_iter()
        .collect()
    }

    /// Runs a single trial.
    pub fn run_trial(&self, trial: usize) -> Result<TrialRecord> {
        let n = self.dataset.n_classes();
        let seed = derive_seed(self.protocol.master_seed, trial as u64);
        let held_out = self.held_out(trial);
        let split = SplitSpec {
            unseen: held_out.iter().copied().collect(),
            seed,
        };
        let candidates: Vec<LabelId> = match self.protocol.kind {
            ProtocolKind::BinaryPairs | ProtocolKind::Kway => held_out.clone(),
            ProtocolKind::FullSet | ProtocolKind::Topk => (0..n).map(LabelId).collect(),
        };
        let task = ZeroShotTask::new(
            self.dataset,
            self.class_semantics,
            &split,
            &self.options.settings,
            seed,
            self.options.standardize_features,
        )?;
        let tests: Vec<&Instance> = task.test_instances().collect();
        let mut results = Vec::with_capacity(self.learners.len());
        for learner in self.learners {
            let predictor = learner.fit(&task)?;
            let positions = tests
                .iter()
                .map(|inst| {
                    let ranking = predictor.rank(inst, &candidates)?;
                    ranking.rank_of(inst.label).ok_or_else(|| {
                        Error::invalid(format!(
                            "{} dropped the true label from its ranking",
                            learner.name()
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            results.push(MethodResult {
                method: learner.name(),
                values: self.protocol.metrics(&positions),
            });
        }
        Ok(TrialRecord {
            trial,
            seed,
            held_out: self.dataset.classes.names(&held_out),
            n_test: tests.len(),
            results,
        })
    }

    /// Runs every trial and assembles the report.
    pub fn run(&self) -> Result<EvalReport> {
        self.check()?;
        let trials = self.run_all()?;
        Ok(EvalReport::assemble(
            self.protocol.clone(),
            self.options.clone(),
            self.learners.iter().map(|l| l.name()).collect(),
            trials,
        ))
    }

    #[cfg(feature = "parallel")]
    fn run_all(&self) -> Result<Vec<TrialRecord>> {
        use rayon::prelude::*;
        if self.options.jobs <= 1 {
            return (0..self.protocol.trials)
                .map(|t| self.run_trial(t))
                .collect();
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.options.jobs)
            .build()
            .map_err(|e| Error::Io(format!("thread pool: {e}")))?;
        pool.install(|| {
            (0..self.protocol.trials)
                .into_par_iter()
                .map(|t| self.run_trial(t))
                .collect()
        })
    }

    #[cfg(not(feature = "parallel"))]
    fn run_all(&self) -> Result<Vec<TrialRecord>> {
        (0..self.protocol.trials)
            .map(|t| self.run_trial(t))
            .collect()
    }
}

fn run_kind(
    kind: ProtocolKind,
    ds: &FeatureDataset,
    class_semantics: &Mat,
    learners: &[&dyn Learner],
    cfg: &ProtocolConfig,
    options: &EvalOptions,
) -> Result<EvalReport> {
    if cfg.kind != kind {
        return Err(Error::invalid(format!(
            "protocol kind is {}, expected {kind}",
            cfg.kind
        )));
    }
    Evaluation {
        dataset: ds,
        class_semantics,
        learners,
        protocol: cfg,
        options,
    }
    .run()
}

/// Pairs of held-out labels, candidates restricted to the pair.
pub fn run_binary_pairs(
    ds: &FeatureDataset,
    class_semantics: &Mat,
    learners: &[&dyn Learner],
    cfg: &ProtocolConfig,
    options: &EvalOptions,
) -> Result<EvalReport> {
    run_kind(
        ProtocolKind::BinaryPairs,
        ds,
        class_semantics,
        learners,
        cfg,
        options,
    )
}

/// Groups of `group_size` held-out labels, candidates restricted to the group.
pub fn run_kway_groups(
    ds: &FeatureDataset,
    class_semantics: &Mat,
    learners: &[&dyn Learner],
    cfg: &ProtocolConfig,
    options: &EvalOptions,
) -> Result<EvalReport> {
    run_kind(
        ProtocolKind::Kway,
        ds,
        class_semantics,
        learners,
        cfg,
        options,
    )
}

/// One held-out label ranked against every label.
pub fn run_full_set(
    ds: &FeatureDataset,
    class_semantics: &Mat,
    learners: &[&dyn Learner],
    cfg: &ProtocolConfig,
    options: &EvalOptions,
) -> Result<EvalReport> {
    run_kind(
        ProtocolKind::FullSet,
        ds,
        class_semantics,
        learners,
        cfg,
        options,
    )
}

/// `n_unseen` held-out labels ranked against every label, scored by top-K hits.
pub fn run_topk(
    ds: &FeatureDataset,
    class_semantics: &Mat,
    learners: &[&dyn Learner],
    cfg: &ProtocolConfig,
    options: &EvalOptions,
) -> Result<EvalReport> {
    run_kind(
        ProtocolKind::Topk,
        ds,
        class_semantics,
        learners,
        cfg,
        options,
    )
}

/// Dispatches on `cfg.kind`.
pub fn run_protocol(
    ds: &FeatureDataset,
    class_semantics: &Mat,
    learners: &[&dyn Learner],
    cfg: &ProtocolConfig,
    options: &EvalOptions,
) -> Result<EvalReport> {
    run_kind(cfg.kind, ds, class_semantics, learners, cfg, options)
}
