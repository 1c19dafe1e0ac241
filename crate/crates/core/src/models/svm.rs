//! Soft-margin SVM trained in the dual with sequential minimal optimization
//! (second-order working-set selection). Support vectors keep the instance
//! ids of the rows they came from.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::{require_binary, score_label, Classifier};
use crate::error::{Error, Result};
use crate::resampling::{AugmentedDataset, ClassWeights};

/// Multipliers at or below this magnitude are not support vectors.
pub const SV_THRESHOLD: f64 = 1e-8;
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
        match *self {
            Kernel::Linear => a.dot(&b),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

/// Kernel choice before `gamma` is resolved against training data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum KernelSpec {
    Linear,
    /// `gamma = None` means `1 / (d * mean per-feature variance)`.
    Rbf { gamma: Option<f64> },
}

impl KernelSpec {
    pub fn resolve(&self, x: ArrayView2<'_, f64>) -> Kernel {
        match *self {
            KernelSpec::Linear => Kernel::Linear,
            KernelSpec::Rbf { gamma: Some(g) } => Kernel::Rbf { gamma: g },
            KernelSpec::Rbf { gamma: None } => Kernel::Rbf {
                gamma: default_gamma(x),
            },
        }
    }
}

pub fn default_gamma(x: ArrayView2<'_, f64>) -> f64 {
    let d = x.ncols() as f64;
    let mean_var = x.var_axis(Axis(0), 0.0).mean().unwrap_or(1.0);
    if mean_var > 0.0 {
        1.0 / (d * mean_var)
    } else {
        1.0 / d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub c: f64,
    pub kernel: KernelSpec,
    /// Maximal KKT violation at termination.
    pub tolerance: f64,
    /// `None` means `max(100_000, 100 * n)`.
    pub max_iter: Option<usize>,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            kernel: KernelSpec::Rbf { gamma: None },
            tolerance: 1e-3,
            max_iter: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    /// Instance ids of the training rows with nonzero multipliers.
    pub support_ids: Vec<u64>,
    /// Signed multipliers `alpha_i * y_i`, `y = +1` for class 1.
    pub dual_coefs: Vec<f64>,
    pub support_vectors: Array2<f64>,
    /// Class of each support vector.
    pub support_labels: Vec<usize>,
    pub bias: f64,
    pub kernel: Kernel,
    pub c: f64,
    /// Box constraint multiplier per class (`C_c = c * w_c`).
    pub class_weights: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl SvmModel {
    /// `sum_i dual_i K(sv_i, x) + bias`.
    pub fn decision_function(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        self.check_width(&x)?;
        Ok(x.rows()
            .into_iter()
            .map(|row| {
                self.support_vectors
                    .rows()
                    .into_iter()
                    .zip(&self.dual_coefs)
                    .map(|(sv, a)| a * self.kernel.eval(sv, row))
                    .sum::<f64>()
                    + self.bias
            })
            .collect())
    }

    pub fn n_support(&self) -> usize {
        self.support_ids.len()
    }

    /// Signed sum of dual coefficients per class.
    pub fn dual_sum_per_class(&self) -> [f64; 2] {
        let mut s = [0.0; 2];
        for (&a, &y) in self.dual_coefs.iter().zip(&self.support_labels) {
            s[y] += a;
        }
        s
    }
}

impl Classifier for SvmModel {
    fn n_features(&self) -> usize {
        self.support_vectors.ncols()
    }

    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        Ok(self
            .decision_function(x)?
            .iter()
            .map(|&s| score_label(s))
            .collect())
    }
}

/// Lazily computed kernel rows.
struct KernelCache<'a> {
    x: ArrayView2<'a, f64>,
    kernel: Kernel,
    rows: Vec<Option<Box<[f64]>>>,
    diag: Vec<f64>,
}

impl<'a> KernelCache<'a> {
    fn new(x: ArrayView2<'a, f64>, kernel: Kernel) -> Self {
        let diag = x.rows().into_iter().map(|r| kernel.eval(r, r)).collect();
        Self {
            x,
            kernel,
            rows: vec![None; x.nrows()],
            diag,
        }
    }

    fn row(&mut self, i: usize) -> &[f64] {
        if self.rows[i].is_none() {
            let xi = self.x.row(i);
            let k: Box<[f64]> = self
                .x
                .rows()
                .into_iter()
                .map(|xj| self.kernel.eval(xi, xj))
                .collect();
            self.rows[i] = Some(k);
        }
        self.rows[i].as_deref().unwrap()
    }
}

struct Solution {
    alpha: Vec<f64>,
    rho: f64,
    iterations: usize,
    converged: bool,
}

/// Dual problem: min 1/2 a'Qa - e'a, 0 <= a_i <= C_i, y'a = 0, with
/// `Q_ij = y_i y_j K_ij`. Pair updates and working-set selection follow the
/// second-order scheme of Fan, Chen & Lin (2005).
fn solve(cache: &mut KernelCache<'_>, y: &[f64], upper: &[f64], eps: f64, max_iter: usize) -> Solution {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let at_upper = |a: f64, c: f64| a >= c;
    let at_lower = |a: f64| a <= 0.0;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        // select i: maximal violating index in I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            if y[t] > 0.0 {
                if !at_upper(alpha[t], upper[t]) && -grad[t] >= gmax {
                    gmax = -grad[t];
                    i_sel = t;
                }
            } else if !at_lower(alpha[t]) && grad[t] >= gmax {
                gmax = grad[t];
                i_sel = t;
            }
        }
        if i_sel == usize::MAX {
            converged = true;
            break;
        }
        let i = i_sel;
        let qd_i = cache.diag[i];
        let k_i = cache.row(i).to_vec();
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = usize::MAX;
        let mut obj_min = f64::INFINITY;
        for t in 0..n {
            if y[t] > 0.0 {
                if !at_lower(alpha[t]) {
                    let grad_diff = gmax + grad[t];
                    if grad[t] >= gmax2 {
                        gmax2 = grad[t];
                    }
                    if grad_diff > 0.0 {
                        // y_i Q_it = K_it when y_t = +1
                        let mut quad = qd_i + cache.diag[t] - 2.0 * y[i] * y[i] * k_i[t];
                        if quad <= 0.0 {
                            quad = TAU;
                        }
                        let obj = -(grad_diff * grad_diff) / quad;
                        if obj <= obj_min {
                            j_sel = t;
                            obj_min = obj;
                        }
                    }
                }
            } else if !at_upper(alpha[t], upper[t]) {
                let grad_diff = gmax - grad[t];
                if -grad[t] >= gmax2 {
                    gmax2 = -grad[t];
                }
                if grad_diff > 0.0 {
                    let mut quad = qd_i + cache.diag[t] - 2.0 * k_i[t];
                    if quad <= 0.0 {
                        quad = TAU;
                    }
                    let obj = -(grad_diff * grad_diff) / quad;
                    if obj <= obj_min {
                        j_sel = t;
                        obj_min = obj;
                    }
                }
            }
        }
        if gmax + gmax2 < eps || j_sel == usize::MAX {
            converged = true;
            break;
        }
        let j = j_sel;
        iterations += 1;

        let k_j = cache.row(j).to_vec();
        let q_ij = y[i] * y[j] * k_i[j];
        let (ci, cj) = (upper[i], upper[j]);
        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = cache.diag[i] + cache.diag[j] + 2.0 * q_ij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let mut quad = cache.diag[i] + cache.diag[j] - 2.0 * q_ij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let d_ai = alpha[i] - old_ai;
        let d_aj = alpha[j] - old_aj;
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k_i[t] * d_ai + y[j] * k_j[t] * d_aj);
        }
    }

    // offset from free multipliers, or the midpoint of the feasible interval
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut n_free = 0usize;
    for t in 0..n {
        let yg = y[t] * grad[t];
        if at_upper(alpha[t], upper[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            free_sum += yg;
        }
    }
    let rho = if n_free > 0 {
        free_sum / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    Solution {
        alpha,
        rho,
        iterations,
        converged,
    }
}

/// Trains a binary soft-margin SVM. Class 1 is the positive side. With class
/// weights, rows of class `c` get box constraint `C * w_c`. Soft labels are
/// ignored; the hard (argmax) labels are used.
pub fn train_svm(
    train: &AugmentedDataset,
    cfg: &SvmConfig,
    weights: Option<&ClassWeights>,
) -> Result<SvmModel> {
    require_binary(train)?;
    if !(cfg.c > 0.0) || !(cfg.tolerance > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "SVM needs C > 0 and tolerance > 0, got C = {}, tol = {}",
            cfg.c, cfg.tolerance
        )));
    }
    let x = train.data.features();
    let labels = train.data.labels();
    let class_w = weights
        .map(|w| w.weights.clone())
        .unwrap_or_else(|| vec![1.0, 1.0]);
    if class_w.len() != 2 || class_w.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::InvalidArgument(format!("bad class weights {class_w:?}")));
    }
    let y: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let upper: Vec<f64> = labels.iter().map(|&l| cfg.c * class_w[l]).collect();
    let kernel = cfg.kernel.resolve(x);
    let max_iter = cfg.max_iter.unwrap_or_else(|| (100 * x.nrows()).max(100_000));

    let mut cache = KernelCache::new(x, kernel);
    let sol = solve(&mut cache, &y, &upper, cfg.tolerance, max_iter);
    if !sol.converged {
        log::warn!(
            "SMO hit the iteration cap ({max_iter}) before reaching tolerance {}",
            cfg.tolerance
        );
    }

    let sv_rows: Vec<usize> = (0..x.nrows())
        .filter(|&i| sol.alpha[i].abs() > SV_THRESHOLD)
        .collect();
    let ids = train.data.instance_ids();
    Ok(SvmModel {
        support_ids: sv_rows.iter().map(|&i| ids[i]).collect(),
        dual_coefs: sv_rows.iter().map(|&i| sol.alpha[i] * y[i]).collect(),
        support_vectors: x.select(Axis(0), &sv_rows),
        support_labels: sv_rows.iter().map(|&i| labels[i]).collect(),
        bias: -sol.rho,
        kernel,
        c: cfg.c,
        class_weights: class_w,
        converged: sol.converged,
        iterations: sol.iterations,
    })
}
