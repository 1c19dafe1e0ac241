//! Classifiers whose internals (weights, support vectors, activations) stay
//! inspectable after training.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::dataset::ScalerParams;
use crate::error::{Error, Result};
use crate::resampling::{AugmentedDataset, ClassWeights};

mod logreg;
mod mlp;
mod svm;

pub use logreg::{logreg_objective, train_logreg, LinearModel};
pub use mlp::{
    input_gradients, latent_encode, mlp_widths, retrain_head, train_mlp, Dense, MlpGradients,
    MlpModel,
};
pub use svm::{train_svm, Kernel, KernelSpec, SvmConfig, SvmModel};

/// Optimizer settings shared by the gradient-trained models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Mini-batch size; logistic regression always uses the full batch.
    pub batch_size: usize,
    pub l2: f64,
    pub seed: u64,
    /// Gradient-norm threshold for early stopping (logistic regression).
    pub tolerance: f64,
}

impl TrainConfig {
    pub fn logreg() -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 20_000,
            batch_size: usize::MAX,
            l2: 1e-2,
            seed: 0,
            tolerance: 1e-6,
        }
    }

    pub fn mlp() -> Self {
        Self {
            learning_rate: 0.05,
            epochs: 40,
            batch_size: 32,
            l2: 1e-4,
            seed: 0,
            tolerance: 1e-6,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !(self.l2 >= 0.0) || !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate and tolerance must be positive, l2 non-negative: {self:?}"
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        Ok(())
    }
}

/// Prediction interface common to all models.
pub trait Classifier {
    fn n_features(&self) -> usize;

    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>>;

    fn check_width(&self, x: &ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: x.ncols(),
            });
        }
        Ok(())
    }
}

/// Raw model outputs: one score per row for binary margin models, one
/// logit per class for the network.
#[derive(Debug, Clone, PartialEq)]
pub enum DecisionValues {
    Scores(Array1<f64>),
    PerClass(Array2<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrainedModel {
    Logreg(LinearModel),
    Svm(SvmModel),
    Mlp(MlpModel),
}

impl TrainedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            TrainedModel::Logreg(_) => "logreg",
            TrainedModel::Svm(_) => "svm",
            TrainedModel::Mlp(_) => "mlp",
        }
    }

    pub fn decision_values(&self, x: ArrayView2<'_, f64>) -> Result<DecisionValues> {
        Ok(match self {
            TrainedModel::Logreg(m) => DecisionValues::Scores(m.decision_function(x)?),
            TrainedModel::Svm(m) => DecisionValues::Scores(m.decision_function(x)?),
            TrainedModel::Mlp(m) => DecisionValues::PerClass(m.logits(x)?),
        })
    }
}

impl Classifier for TrainedModel {
    fn n_features(&self) -> usize {
        match self {
            TrainedModel::Logreg(m) => m.n_features(),
            TrainedModel::Svm(m) => m.n_features(),
            TrainedModel::Mlp(m) => m.n_features(),
        }
    }

    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        match self {
            TrainedModel::Logreg(m) => m.predict(x),
            TrainedModel::Svm(m) => m.predict(x),
            TrainedModel::Mlp(m) => m.predict(x),
        }
    }
}

/// A serialized model together with the standardizer its inputs expect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub model: TrainedModel,
    pub scaler: Option<ScalerParams>,
}

impl ModelSnapshot {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Label of a binary score: class 1 only for strictly positive scores.
pub(crate) fn score_label(score: f64) -> usize {
    usize::from(score > 0.0)
}

/// First index of the maximum, so ties resolve to the lower class id.
pub(crate) fn argmax(row: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in row.into_iter().enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

pub(crate) fn require_binary(train: &AugmentedDataset) -> Result<()> {
    if train.data.n_classes() != 2 {
        return Err(Error::InvalidArgument(format!(
            "binary labels required, got {} classes",
            train.data.n_classes()
        )));
    }
    Ok(())
}

/// Per-row loss multipliers: the class weight of each row's (soft) target.
pub(crate) fn sample_weights(
    targets: &Array2<f64>,
    weights: Option<&ClassWeights>,
) -> Result<Array1<f64>> {
    match weights {
        None => Ok(Array1::ones(targets.nrows())),
        Some(w) => {
            if w.weights.len() != targets.ncols() {
                return Err(Error::DimensionMismatch {
                    expected: targets.ncols(),
                    got: w.weights.len(),
                });
            }
            Ok(targets
                .rows()
                .into_iter()
                .map(|t| t.iter().zip(&w.weights).map(|(a, b)| a * b).sum())
                .collect())
        }
    }
}
