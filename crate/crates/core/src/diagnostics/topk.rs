use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{input_gradients, Classifier, LinearModel, MlpModel};

pub const DEFAULT_TOP_K: usize = 10;
pub const DEFAULT_GRADIENT_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopKMode {
    PerClassAggregate,
    PerInstance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopKReport {
    pub mode: TopKMode,
    pub k: usize,
    /// One entry per class (aggregate mode) or per instance.
    pub sets: Vec<Vec<usize>>,
    /// Aggregate mode: per-feature magnitude for each class. Instance mode:
    /// the magnitudes of each set's members, in rank order.
    pub magnitudes: Vec<Vec<f64>>,
    /// Overlap with a base report, when one was compared.
    pub overlap_i_m: Option<f64>,
}

/// How many features to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KSpec {
    Count(usize),
    /// Fraction of the feature count, rounded up.
    Fraction(f64),
}

impl KSpec {
    pub fn resolve(&self, d: usize) -> Result<usize> {
        let k = match *self {
            KSpec::Count(k) => k,
            KSpec::Fraction(f) => {
                if !(f > 0.0 && f <= 1.0) {
                    return Err(Error::InvalidArgument(format!("top fraction {f} not in (0, 1]")));
                }
                ((f * d as f64).ceil() as usize).max(1)
            }
        };
        check_k(k, d)?;
        Ok(k)
    }
}

fn check_k(k: usize, d: usize) -> Result<()> {
    if k == 0 || k > d {
        return Err(Error::InvalidArgument(format!("top-K = {k} with {d} features")));
    }
    Ok(())
}

/// Indices of the `k` largest values; ties go to the lower index.
pub fn top_k_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Top-K classification embeddings of a linear model. For each class, the
/// per-feature mean of `|x_j * w_j|` over that class's rows is ranked in
/// descending order.
pub fn topk_ce(
    model: &LinearModel,
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    k: usize,
) -> Result<TopKReport> {
    model.check_width(&x)?;
    if labels.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: labels.len(),
        });
    }
    let d = x.ncols();
    check_k(k, d)?;
    let n_classes = 2;
    let mut sums = vec![vec![0.0; d]; n_classes];
    let mut counts = vec![0usize; n_classes];
    for (row, &y) in x.rows().into_iter().zip(labels) {
        if y >= n_classes {
            return Err(Error::InvalidArgument(format!("label {y} for a binary model")));
        }
        counts[y] += 1;
        for j in 0..d {
            sums[y][j] += (row[j] * model.weights[j]).abs();
        }
    }
    let magnitudes: Vec<Vec<f64>> = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, &n)| s.into_iter().map(|v| if n > 0 { v / n as f64 } else { 0.0 }).collect())
        .collect();
    let sets = magnitudes.iter().map(|m| top_k_indices(m, k)).collect();
    Ok(TopKReport {
        mode: TopKMode::PerClassAggregate,
        k,
        sets,
        magnitudes,
        overlap_i_m: None,
    })
}

/// Sum of per-set intersection sizes over `n_sets * K`.
pub fn topk_overlap(base: &TopKReport, other: &TopKReport) -> Result<f64> {
    if base.mode != other.mode || base.k != other.k || base.sets.len() != other.sets.len() {
        return Err(Error::InvalidArgument(format!(
            "incomparable top-K reports: {:?}/K={}/{} sets vs {:?}/K={}/{} sets",
            base.mode,
            base.k,
            base.sets.len(),
            other.mode,
            other.k,
            other.sets.len()
        )));
    }
    if base.sets.is_empty() {
        return Err(Error::InvalidArgument("empty top-K reports".into()));
    }
    let shared: usize = base
        .sets
        .iter()
        .zip(&other.sets)
        .map(|(a, b)| a.iter().filter(|i| b.contains(i)).count())
        .sum();
    Ok(shared as f64 / (base.sets.len() * base.k) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientTopK {
    pub per_instance: TopKReport,
    pub per_class: TopKReport,
}

/// Top-K input-gradient features per instance, plus per-class sets of the
/// features that occur most often across those instance sets (ties to the
/// lower index). Rows are grouped by `groups` when given, otherwise by the
/// model's predictions.
pub fn topk_input_grad(
    model: &MlpModel,
    x: ArrayView2<'_, f64>,
    k_spec: KSpec,
    groups: Option<&[usize]>,
) -> Result<GradientTopK> {
    model.check_width(&x)?;
    let d = x.ncols();
    let k = k_spec.resolve(d)?;
    let n_classes = model.n_classes();
    let owned_groups;
    let groups = match groups {
        Some(g) => {
            if g.len() != x.nrows() {
                return Err(Error::DimensionMismatch {
                    expected: x.nrows(),
                    got: g.len(),
                });
            }
            g
        }
        None => {
            owned_groups = model.predict(x)?;
            &owned_groups
        }
    };

    let mut sets = Vec::with_capacity(x.nrows());
    let mut inst_mags = Vec::with_capacity(x.nrows());
    let mut freq = vec![vec![0.0; d]; n_classes];
    let mut mean_mag = vec![vec![0.0; d]; n_classes];
    let mut counts = vec![0usize; n_classes];
    for (row, &c) in x.rows().into_iter().zip(groups) {
        if c >= n_classes {
            return Err(Error::InvalidArgument(format!("group {c} for {n_classes} classes")));
        }
        let g: Vec<f64> = input_gradients(model, row)?.into_iter().map(f64::abs).collect();
        let top = top_k_indices(&g, k);
        for &j in &top {
            freq[c][j] += 1.0;
        }
        for j in 0..d {
            mean_mag[c][j] += g[j];
        }
        counts[c] += 1;
        inst_mags.push(top.iter().map(|&j| g[j]).collect());
        sets.push(top);
    }
    for (m, &n) in mean_mag.iter_mut().zip(&counts) {
        if n > 0 {
            m.iter_mut().for_each(|v| *v /= n as f64);
        }
    }
    let class_sets = freq.iter().map(|f| top_k_indices(f, k)).collect();
    Ok(GradientTopK {
        per_instance: TopKReport {
            mode: TopKMode::PerInstance,
            k,
            sets,
            magnitudes: inst_mags,
            overlap_i_m: None,
        },
        per_class: TopKReport {
            mode: TopKMode::PerClassAggregate,
            k,
            sets: class_sets,
            magnitudes: mean_mag,
            overlap_i_m: None,
        },
    })
}
