//! Dense rectifier network `d -> 100 -> 50 -> ceil(d/2) -> N` trained with
//! plain mini-batch gradient descent on (soft-target) cross-entropy.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, sample_weights, Classifier, TrainConfig};
use crate::error::{Error, Result};
use crate::resampling::{AugmentedDataset, ClassWeights};
use crate::rng::{derive_seed, seeded};

/// Layer widths from input to logits.
pub fn mlp_widths(d: usize, n_classes: usize) -> Vec<usize> {
    vec![d, 100, 50, d.div_ceil(2), n_classes]
}

/// Fully connected layer; `weights` is `out x in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn forward(&self, h: &Array2<f64>) -> Array2<f64> {
        h.dot(&self.weights.t()) + &self.bias
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layers: Vec<Dense>,
    pub config: TrainConfig,
    /// Mean batch loss per epoch (pre-update).
    pub loss_history: Vec<f64>,
}

/// Parameter gradients, one entry per layer.
pub type MlpGradients = Vec<Dense>;

fn relu(mut z: Array2<f64>) -> Array2<f64> {
    z.mapv_inplace(|v| v.max(0.0));
    z
}

impl MlpModel {
    /// Seeded uniform fan-in initialization: `U(-sqrt(6/fan_in), +)` for
    /// rectified layers, `U(-sqrt(3/fan_in), +)` for the output layer; zero
    /// biases.
    pub fn init(d: usize, n_classes: usize, cfg: &TrainConfig) -> Self {
        let widths = mlp_widths(d, n_classes);
        let mut rng = seeded(derive_seed(cfg.seed, &[0]));
        let last = widths.len() - 2;
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let scale = if l == last { 3.0 } else { 6.0 };
                let bound = (scale / fan_in as f64).sqrt();
                Dense {
                    weights: Array2::from_shape_fn((fan_out, fan_in), |_| {
                        rng.random_range(-bound..bound)
                    }),
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Self {
            layers,
            config: cfg.clone(),
            loss_history: Vec::new(),
        }
    }

    pub fn n_classes(&self) -> usize {
        self.layers.last().map_or(0, Dense::out_dim)
    }

    pub fn latent_width(&self) -> usize {
        self.head().in_dim()
    }

    pub fn head(&self) -> &Dense {
        self.layers.last().expect("network has layers")
    }

    pub fn encoder(&self) -> &[Dense] {
        &self.layers[..self.layers.len() - 1]
    }

    /// Pre-activations and activations of every layer.
    fn forward_trace(&self, x: &Array2<f64>) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut act = Vec::with_capacity(self.layers.len() + 1);
        act.push(x.clone());
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(act.last().unwrap());
            pre.push(z.clone());
            act.push(if l == last { z } else { relu(z) });
        }
        (pre, act)
    }

    fn encode_unchecked(&self, x: &Array2<f64>) -> Array2<f64> {
        self.encoder()
            .iter()
            .fold(x.clone(), |h, layer| relu(layer.forward(&h)))
    }

    pub fn logits(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_width(&x)?;
        let h = self.encode_unchecked(&x.to_owned());
        Ok(self.head().forward(&h))
    }

    /// Weighted soft-target cross-entropy averaged over rows, plus
    /// `l2/2 * sum |W|^2` over weight matrices, and its gradients.
    pub fn loss_and_gradients(
        &self,
        x: ArrayView2<'_, f64>,
        targets: ArrayView2<'_, f64>,
        sample_weights: ArrayView1<'_, f64>,
        l2: f64,
    ) -> (f64, MlpGradients) {
        let (pre, act) = self.forward_trace(&x.to_owned());
        let n = x.nrows() as f64;
        let logits = act.last().unwrap();
        let (loss, mut delta) = softmax_xent(logits, targets, sample_weights);
        let mut loss = loss / n;
        delta /= n;
        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        for l in (0..self.layers.len()).rev() {
            let gw = delta.t().dot(&act[l]) + &(&self.layers[l].weights * l2);
            let gb = delta.sum_axis(Axis(0));
            grads.push(Dense {
                weights: gw,
                bias: gb,
            });
            if l > 0 {
                let mut back = delta.dot(&self.layers[l].weights);
                back.zip_mut_with(&pre[l - 1], |g, &z| {
                    if z <= 0.0 {
                        *g = 0.0
                    }
                });
                delta = back;
            }
        }
        grads.reverse();
        loss += 0.5 * l2 * self.layers.iter().map(|l| l.weights.iter().map(|w| w * w).sum::<f64>()).sum::<f64>();
        (loss, grads)
    }

    fn apply(&mut self, grads: &[Dense], lr: f64, from_layer: usize) {
        for (layer, g) in self.layers.iter_mut().zip(grads).skip(from_layer) {
            layer.weights.scaled_add(-lr, &g.weights);
            layer.bias.scaled_add(-lr, &g.bias);
        }
    }

    /// Mini-batch training over all layers from `from_layer` on.
    fn fit(
        &mut self,
        x: ArrayView2<'_, f64>,
        targets: &Array2<f64>,
        sw: &Array1<f64>,
        cfg: &TrainConfig,
        from_layer: usize,
    ) {
        let n = x.nrows();
        let batch = cfg.batch_size.min(n).max(1);
        let mut rng = seeded(derive_seed(cfg.seed, &[1]));
        let mut order: Vec<usize> = (0..n).collect();
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            let mut batches = 0usize;
            for chunk in order.chunks(batch) {
                let xb = x.select(Axis(0), chunk);
                let tb = targets.select(Axis(0), chunk);
                let sb = sw.select(Axis(0), chunk);
                let (loss, grads) = if from_layer == 0 {
                    self.loss_and_gradients(xb.view(), tb.view(), sb.view(), cfg.l2)
                } else {
                    self.head_loss_and_gradients(xb.view(), tb.view(), sb.view(), cfg.l2)
                };
                total += loss;
                batches += 1;
                self.apply(&grads, cfg.learning_rate, from_layer);
            }
            self.loss_history.push(total / batches.max(1) as f64);
        }
    }

    /// Gradients of the head only, with `x` already in latent space. Encoder
    /// entries are returned as zeros so indices line up with `layers`.
    fn head_loss_and_gradients(
        &self,
        latent: ArrayView2<'_, f64>,
        targets: ArrayView2<'_, f64>,
        sample_weights: ArrayView1<'_, f64>,
        l2: f64,
    ) -> (f64, MlpGradients) {
        let head = self.head();
        let n = latent.nrows() as f64;
        let h = latent.to_owned();
        let logits = head.forward(&h);
        let (loss, mut delta) = softmax_xent(&logits, targets, sample_weights);
        delta /= n;
        let mut grads: Vec<Dense> = self
            .encoder()
            .iter()
            .map(|l| Dense {
                weights: Array2::zeros(l.weights.dim()),
                bias: Array1::zeros(l.bias.len()),
            })
            .collect();
        grads.push(Dense {
            weights: delta.t().dot(&h) + &(&head.weights * l2),
            bias: delta.sum_axis(Axis(0)),
        });
        let reg = 0.5 * l2 * head.weights.iter().map(|w| w * w).sum::<f64>();
        (loss / n + reg, grads)
    }
}

/// Sum over rows of `s_i * CE(softmax(z_i), t_i)` and the per-row logit
/// gradient `s_i * (softmax(z_i) - t_i)`.
fn softmax_xent(
    logits: &Array2<f64>,
    targets: ArrayView2<'_, f64>,
    sample_weights: ArrayView1<'_, f64>,
) -> (f64, Array2<f64>) {
    let mut delta = Array2::<f64>::zeros(logits.dim());
    let mut loss = 0.0;
    for (i, z) in logits.rows().into_iter().enumerate() {
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = z.iter().map(|v| (v - m).exp()).sum();
        let log_z = m + sum.ln();
        let s = sample_weights[i];
        for c in 0..z.len() {
            let t = targets[[i, c]];
            let p = (z[c] - log_z).exp();
            if t > 0.0 {
                loss -= s * t * (z[c] - log_z);
            }
            delta[[i, c]] = s * (p - t);
        }
    }
    (loss, delta)
}

impl Classifier for MlpModel {
    fn n_features(&self) -> usize {
        self.layers[0].in_dim()
    }

    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        Ok(self
            .logits(x)?
            .rows()
            .into_iter()
            .map(|r| argmax(r.iter().copied()))
            .collect())
    }
}

/// Trains a fresh network. Deterministic under `cfg.seed`: initialization
/// and per-epoch shuffles use separate derived streams.
pub fn train_mlp(
    train: &AugmentedDataset,
    cfg: &TrainConfig,
    weights: Option<&ClassWeights>,
) -> Result<MlpModel> {
    cfg.validate()?;
    let data = &train.data;
    let mut model = MlpModel::init(data.feature_count(), data.n_classes(), cfg);
    let targets = train.targets();
    let sw = sample_weights(&targets, weights)?;
    model.fit(data.features(), &targets, &sw, cfg, 0);
    Ok(model)
}

/// Post-activation outputs of the last hidden layer (the classifier input).
pub fn latent_encode(model: &MlpModel, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    model.check_width(&x)?;
    Ok(model.encode_unchecked(&x.to_owned()))
}

/// Continues training only the output layer on latent-space rows. Encoder
/// layers are copied bit-for-bit.
pub fn retrain_head(
    model: &MlpModel,
    latent_data: &AugmentedDataset,
    cfg: &TrainConfig,
) -> Result<MlpModel> {
    cfg.validate()?;
    let width = latent_data.data.feature_count();
    if width != model.latent_width() {
        return Err(Error::DimensionMismatch {
            expected: model.latent_width(),
            got: width,
        });
    }
    if latent_data.data.n_classes() != model.n_classes() {
        return Err(Error::DimensionMismatch {
            expected: model.n_classes(),
            got: latent_data.data.n_classes(),
        });
    }
    let mut out = model.clone();
    out.config = cfg.clone();
    out.loss_history.clear();
    let targets = latent_data.targets();
    let sw = Array1::ones(targets.nrows());
    let head_index = out.layers.len() - 1;
    out.fit(latent_data.data.features(), &targets, &sw, cfg, head_index);
    Ok(out)
}

/// Gradient of the predicted class's logit with respect to the input.
pub fn input_gradients(model: &MlpModel, x: ArrayView1<'_, f64>) -> Result<Vec<f64>> {
    let row = x.insert_axis(Axis(0));
    model.check_width(&row)?;
    let (pre, act) = model.forward_trace(&row.to_owned());
    let logits = act.last().unwrap().row(0);
    let pred = argmax(logits.iter().copied());
    let mut g = Array2::<f64>::zeros((1, model.n_classes()));
    g[[0, pred]] = 1.0;
    for l in (0..model.layers.len()).rev() {
        g = g.dot(&model.layers[l].weights);
        if l > 0 {
            g.zip_mut_with(&pre[l - 1], |v, &z| {
                if z <= 0.0 {
                    *v = 0.0
                }
            });
        }
    }
    Ok(g.row(0).to_vec())
}
