//! Class-imbalance experiments with inspectable models.
//!
//! Resamplers produce an [`AugmentedDataset`] that records where every row
//! came from. Models are trained on it and then measured: weight changes,
//! support-vector census, and top-K feature sets compared with a model
//! trained on the untreated data.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod latent;
pub mod metrics;
pub mod models;
pub mod resampling;
pub mod rng;

pub use ndarray;

pub use dataset::{Dataset, LabelColumn, ScalerParams};
pub use error::{Error, Result};
pub use harness::{ExperimentConfig, Method, ModelKind};
pub use models::{Classifier, ModelSnapshot, TrainedModel};
pub use resampling::{AugmentedDataset, ClassWeights, Origin, SyntheticProvenance};
