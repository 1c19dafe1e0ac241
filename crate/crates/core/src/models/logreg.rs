use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{require_binary, sample_weights, score_label, Classifier, TrainConfig};
use crate::error::Result;
use crate::resampling::{AugmentedDataset, ClassWeights};

/// Binary logistic regression. Positive scores predict class 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub l2: f64,
    pub converged: bool,
    pub epochs_run: usize,
    pub final_grad_norm: f64,
    pub config: TrainConfig,
}

impl LinearModel {
    pub fn zeros(d: usize) -> Self {
        Self {
            weights: vec![0.0; d],
            bias: 0.0,
            l2: 0.0,
            converged: true,
            epochs_run: 0,
            final_grad_norm: 0.0,
            config: TrainConfig::logreg(),
        }
    }

    pub fn decision_function(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        self.check_width(&x)?;
        let w = ArrayView1::from(&self.weights);
        Ok(x.dot(&w) + self.bias)
    }
}

impl Classifier for LinearModel {
    fn n_features(&self) -> usize {
        self.weights.len()
    }

    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        Ok(self
            .decision_function(x)?
            .iter()
            .map(|&s| score_label(s))
            .collect())
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Weighted mean cross-entropy plus `l2/2 * |w|^2` (bias unpenalized).
/// `targets` are class-1 probabilities in `[0, 1]`. Returns the objective and
/// its gradient with respect to the weights and bias.
pub fn logreg_objective(
    x: ArrayView2<'_, f64>,
    targets: ArrayView1<'_, f64>,
    sample_weights: ArrayView1<'_, f64>,
    weights: ArrayView1<'_, f64>,
    bias: f64,
    l2: f64,
) -> (f64, Array1<f64>, f64) {
    let n = x.nrows() as f64;
    let z = x.dot(&weights) + bias;
    let mut loss = 0.0;
    let mut resid = Array1::<f64>::zeros(x.nrows());
    for i in 0..x.nrows() {
        loss += sample_weights[i] * (softplus(z[i]) - targets[i] * z[i]);
        resid[i] = sample_weights[i] * (sigmoid(z[i]) - targets[i]) / n;
    }
    let penalty = 0.5 * l2 * weights.dot(&weights);
    let grad_w = x.t().dot(&resid) + &(&weights * l2);
    let grad_b = resid.sum();
    (loss / n + penalty, grad_w, grad_b)
}

/// Full-batch gradient descent from zero with a fixed step. Stops once the
/// gradient norm drops below `cfg.tolerance` or after `cfg.epochs` steps.
/// Soft labels (when present) are used as fractional targets.
pub fn train_logreg(
    train: &AugmentedDataset,
    weights: Option<&ClassWeights>,
    cfg: &TrainConfig,
) -> Result<LinearModel> {
    require_binary(train)?;
    cfg.validate()?;
    let x = train.data.features();
    let soft = train.targets();
    let targets = soft.column(1).to_owned();
    let sw = sample_weights(&soft, weights)?;

    let mut w = Array1::<f64>::zeros(x.ncols());
    let mut b = 0.0;
    let mut grad_norm = f64::INFINITY;
    let mut epochs_run = 0;
    let mut converged = false;
    for epoch in 0..=cfg.epochs {
        let (_, gw, gb) = logreg_objective(x, targets.view(), sw.view(), w.view(), b, cfg.l2);
        grad_norm = (gw.dot(&gw) + gb * gb).sqrt();
        if grad_norm < cfg.tolerance {
            converged = true;
            break;
        }
        if epoch == cfg.epochs {
            break;
        }
        w.scaled_add(-cfg.learning_rate, &gw);
        b -= cfg.learning_rate * gb;
        epochs_run = epoch + 1;
    }
    if !converged {
        log::warn!("logistic regression stopped at gradient norm {grad_norm:.3e}");
    }
    Ok(LinearModel {
        weights: w.to_vec(),
        bias: b,
        l2: cfg.l2,
        converged,
        epochs_run,
        final_grad_norm: grad_norm,
        config: cfg.clone(),
    })
}
