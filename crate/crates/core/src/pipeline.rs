//! Fitting every method for one seen/unseen split.

use std::borrow::Cow;
use std::collections::BTreeSet;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::classifiers::{fit_conse, fit_lm, ConseConfig, Method, MethodKind};
use crate::data::{average_by_label, FeatureDataset, Instance, LabelId, SplitSpec};
use crate::error::{Error, Result};
use crate::math::{l2_normalize_rows, Mat};
use crate::nsm::{fit_nsm, NsmConfig, NsmFit};
use crate::property::{fit_property_model, PropertyConfig, PropertyFit};
use crate::rng::{derive_seed, stream};

/// Hyperparameters for every learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSettings {
    pub property: PropertyConfig,
    pub nsm: NsmConfig,
    /// Ridge penalty of the LM and LM_PB maps.
    pub lm_lambda: f64,
    pub conse: ConseConfig,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            property: PropertyConfig::default(),
            nsm: NsmConfig::default(),
            lm_lambda: 0.5,
            conse: ConseConfig::default(),
        }
    }
}

impl ModelSettings {
    pub fn validate(&self) -> Result<()> {
        self.property.validate()?;
        self.nsm.validate()?;
        self.conse.validate()?;
        if !(self.lm_lambda >= 0.0 && self.lm_lambda.is_finite()) {
            return Err(Error::invalid(format!(
                "lm_lambda must be >= 0, got {}",
                self.lm_lambda
            )));
        }
        Ok(())
    }
}

/// One zero-shot training problem: a dataset, its class semantics and a split.
///
/// The property model is fitted at most once and shared by NSM_PB and LM_PB.
pub struct ZeroShotTask<'a> {
    dataset: Cow<'a, FeatureDataset>,
    semantics: Mat,
    seen: Vec<LabelId>,
    unseen: Vec<LabelId>,
    settings: ModelSettings,
    seed: u64,
    x_train: Mat,
    y_train: Vec<LabelId>,
    property: OnceLock<Result<PropertyFit>>,
}

impl<'a> ZeroShotTask<'a> {
    /// `class_semantics` has one row per class id; it is unit-normalized here.
    /// With `standardize`, features are scaled using seen-label instances only.
    pub fn new(
        dataset: &'a FeatureDataset,
        class_semantics: &Mat,
        split: &SplitSpec,
        settings: &ModelSettings,
        seed: u64,
        standardize: bool,
    ) -> Result<Self> {
        let n = dataset.n_classes();
        if class_semantics.nrows() != n {
            return Err(Error::shape(format!(
                "{} semantic rows for {n} classes",
                class_semantics.nrows()
            )));
        }
        if let Some(bad) = split.unseen.iter().find(|id| id.0 >= n) {
            return Err(Error::invalid(format!(
                "unseen label id {} out of range",
                bad.0
            )));
        }
        let seen_set: BTreeSet<LabelId> = split.seen(n);
        if seen_set.is_empty() {
            return Err(Error::invalid("no seen labels left for training"));
        }
        let dataset = if standardize {
            Cow::Owned(dataset.standardized(&seen_set)?)
        } else {
            Cow::Borrowed(dataset)
        };
        let train: Vec<&Instance> = dataset.instances_with(&seen_set).collect();
        let x_train = dataset.feature_matrix(train.iter().copied());
        let y_train = train.iter().map(|i| i.label).collect();
        Ok(Self {
            semantics: l2_normalize_rows(class_semantics).mat,
            seen: seen_set.into_iter().collect(),
            unseen: split.unseen.iter().copied().collect(),
            settings: settings.clone(),
            seed,
            x_train,
            y_train,
            property: OnceLock::new(),
            dataset,
        })
    }

    pub fn dataset(&self) -> &FeatureDataset {
        &self.dataset
    }

    pub fn n_classes(&self) -> usize {
        self.dataset.n_classes()
    }

    pub fn seen(&self) -> &[LabelId] {
        &self.seen
    }

    pub fn unseen(&self) -> &[LabelId] {
        &self.unseen
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn settings(&self) -> &ModelSettings {
        &self.settings
    }

    /// Unit-normalized semantic rows for every class.
    pub fn semantics(&self) -> &Mat {
        &self.semantics
    }

    /// Instances whose label is unseen.
    pub fn test_instances(&self) -> impl Iterator<Item = &Instance> {
        let unseen: BTreeSet<LabelId> = self.unseen.iter().copied().collect();
        self.dataset
            .instances
            .iter()
            .filter(move |i| unseen.contains(&i.label))
    }

    /// Seen-label training instances as rows, with their labels.
    pub fn training_data(&self) -> (&Mat, &[LabelId]) {
        (&self.x_train, &self.y_train)
    }

    pub fn property_fit(&self) -> Result<&PropertyFit> {
        self.property
            .get_or_init(|| {
                let x_avg = average_by_label(&self.dataset, &self.seen)?;
                let mut cfg = self.settings.property.clone();
                cfg.gd.seed = derive_seed(self.seed, stream::PROPERTY_INIT);
                fit_property_model(&x_avg, &self.semantics, &self.seen, &self.unseen, &cfg)
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    /// Unit-normalized property vectors for every class.
    pub fn property_classes(&self) -> Result<Mat> {
        self.property_fit()?.model().class_matrix(self.n_classes())
    }

    pub fn fit_nsm_against(&self, classes: &Mat) -> Result<NsmFit> {
        fit_nsm(&self.x_train, &self.y_train, classes, &self.settings.nsm)
    }

    /// Trains one method on the seen-label instances.
    pub fn fit(&self, kind: MethodKind) -> Result<Method> {
        let lam = self.settings.lm_lambda;
        Ok(match kind {
            MethodKind::NsmPb => {
                let classes = self.property_classes()?;
                let map = self.fit_nsm_against(&classes)?.model.v;
                Method::NsmPb { map, classes }
            }
            MethodKind::LmPb => {
                let classes = self.property_classes()?;
                let map = fit_lm(&self.x_train, &self.y_train, &classes, lam)?;
                Method::LmPb { map, classes }
            }
            MethodKind::Lm => {
                let classes = self.semantics.clone();
                let map = fit_lm(&self.x_train, &self.y_train, &classes, lam)?;
                Method::Lm { map, classes }
            }
            MethodKind::Nsm => {
                let classes = self.semantics.clone();
                let map = self.fit_nsm_against(&classes)?.model.v;
                Method::Nsm { map, classes }
            }
            MethodKind::Conse => {
                let mut cfg = self.settings.conse.clone();
                cfg.gd.seed = derive_seed(self.seed, stream::CONSE);
                let fit = fit_conse(&self.x_train, &self.y_train, &self.semantics, &cfg)?;
                Method::Conse { model: fit.model }
            }
        })
    }
}
