//! Synthetic zero-shot problems with known ground truth.
//!
//! Each class owns a low-dimensional property vector. Its semantic vector is
//! that property vector followed by pure-noise dimensions, unit-normalized,
//! and its instances are `property * A + N(0, feature_noise^2)` for a shared
//! random mixing matrix `A`. Only the property block of the semantic vectors
//! is predictable from features.

use serde::{Deserialize, Serialize};

use crate::data::{FeatureDataset, Instance, LabelId, SemanticTable, Vocab};
use crate::error::{Error, Result};
use crate::math::{l2_normalize_rows, Mat};
use crate::rng::{derive_seed, gaussian_mat, seeded_rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_classes: usize,
    pub property_dim: usize,
    /// Total semantic dimensionality, property block included.
    pub semantic_dim: usize,
    /// Standard deviation of each noise dimension before normalization.
    pub semantic_noise: f64,
    pub feature_dim: usize,
    pub per_class: usize,
    pub feature_noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_classes: 12,
            property_dim: 4,
            semantic_dim: 300,
            semantic_noise: 0.1,
            feature_dim: 20,
            per_class: 20,
            feature_noise: 0.05,
            seed: 2016,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub table: SemanticTable,
    pub dataset: FeatureDataset,
    /// Ground-truth property vectors, one row per class.
    pub properties: Mat,
    /// `property_dim x feature_dim` mixing matrix.
    pub mixing: Mat,
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    if cfg.n_classes < 2 || cfg.property_dim == 0 || cfg.feature_dim == 0 || cfg.per_class == 0 {
        return Err(Error::invalid(
            "synthetic generator needs >= 2 classes and non-empty dims",
        ));
    }
    if cfg.semantic_dim < cfg.property_dim {
        return Err(Error::invalid("semantic_dim must be >= property_dim"));
    }
    if !(cfg.semantic_noise >= 0.0 && cfg.feature_noise >= 0.0) {
        return Err(Error::invalid("noise levels must be >= 0"));
    }
    let properties = gaussian_mat(
        cfg.n_classes,
        cfg.property_dim,
        1.0,
        &mut seeded_rng(derive_seed(cfg.seed, 1)),
    );
    let mixing = gaussian_mat(
        cfg.property_dim,
        cfg.feature_dim,
        1.0,
        &mut seeded_rng(derive_seed(cfg.seed, 2)),
    );
    let noise_dims = cfg.semantic_dim - cfg.property_dim;
    let sem_noise = gaussian_mat(
        cfg.n_classes,
        noise_dims,
        cfg.semantic_noise,
        &mut seeded_rng(derive_seed(cfg.seed, 3)),
    );

    let mut semantic = Mat::zeros(cfg.n_classes, cfg.semantic_dim);
    semantic
        .columns_mut(0, cfg.property_dim)
        .copy_from(&properties);
    semantic
        .columns_mut(cfg.property_dim, noise_dims)
        .copy_from(&sem_noise);
    let semantic = l2_normalize_rows(&semantic).mat;

    let labels: Vec<String> = (0..cfg.n_classes).map(|c| format!("class{c:02}")).collect();
    let vocab = Vocab::from_labels(labels).expect("generated labels are unique");
    let table = SemanticTable::new(vocab.clone(), semantic)?;

    let clean = &properties * &mixing;
    let mut rng = seeded_rng(derive_seed(cfg.seed, 4));
    let noise = gaussian_mat(
        cfg.n_classes * cfg.per_class,
        cfg.feature_dim,
        cfg.feature_noise,
        &mut rng,
    );
    let mut instances = Vec::with_capacity(cfg.n_classes * cfg.per_class);
    for c in 0..cfg.n_classes {
        for k in 0..cfg.per_class {
            let row = c * cfg.per_class + k;
            let features = (0..cfg.feature_dim)
                .map(|j| clean[(c, j)] + noise[(row, j)])
                .collect();
            instances.push(Instance {
                features,
                label: LabelId(c),
            });
        }
    }
    let dataset = FeatureDataset {
        classes: vocab,
        dim: cfg.feature_dim,
        instances,
    };
    Ok(SynthData {
        table,
        dataset,
        properties,
        mixing,
    })
}
