//! Zero-shot classification through learned property embeddings and a
//! neighborhood-sensitive linear map.
//!
//! The crate is organized bottom-up:
//!
//! - [`math`]: dense matrices, ridge solves, gradient descent, finite differences.
//! - [`data`]: embedding tables, feature datasets and seen/unseen splits.
//! - [`property`]: property embeddings for seen and unseen labels.
//! - [`nsm`]: the neighborhood-sensitive map from features to property space.
//! - [`classifiers`]: the five zero-shot methods and nearest-label ranking.
//! - [`pipeline`]: fitting every method on one split.
//! - [`eval`]: evaluation protocols, metrics and paired t-tests.
//! - [`synth`]: synthetic problems with known ground truth.

pub mod classifiers;
pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod math;
pub mod nsm;
pub mod pipeline;
pub mod property;
pub mod rng;
pub mod synth;

#[cfg(feature = "cli")]
pub mod cli;

pub use classifiers::{predict, Method, MethodKind, Ranking};
pub use data::{FeatureDataset, Instance, LabelId, SemanticTable, SplitSpec, Vocab};
pub use error::{Error, Result};
pub use math::Mat;
pub use pipeline::{ModelSettings, ZeroShotTask};
