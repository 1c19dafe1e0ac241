use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution};

use super::{AugmentBuilder, AugmentedDataset};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::seeded;

pub const DEFAULT_REMIX_ALPHA: f64 = 0.2;

/// Mixup-style rebalancing with soft labels.
///
/// Every class is resampled to the geometric mean `m` of the class counts
/// (larger classes drop rows, smaller ones gain duplicates). Pooled rows are
/// then paired across classes and mixed with weight `w ~ Beta(alpha, alpha)`
/// on the first parent; each pair emits the mix and its mirror (weight
/// `1 - w`), so every class receives exactly the same soft-label mass. In the
/// binary case the first parent is always the majority row. Hard labels are
/// the argmax of the soft label, ties going to the smaller class.
pub fn remix(data: &Dataset, alpha: f64, seed: u64) -> Result<AugmentedDataset> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("remix alpha {alpha} must be > 0")));
    }
    let beta = Beta::new(alpha, alpha).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = seeded(seed);
    let counts = data.class_counts();
    let n_classes = data.n_classes();
    let log_mean = counts.iter().map(|&c| (c as f64).ln()).sum::<f64>() / n_classes as f64;
    let target = (log_mean.exp().round() as usize).max(1);

    let mut out = AugmentBuilder::empty(data);
    let mut pools: Vec<Vec<usize>> = Vec::with_capacity(n_classes);
    for rows in data.class_indices() {
        let mut pool = rows.clone();
        if rows.len() >= target {
            pool.shuffle(&mut rng);
            pool.truncate(target);
            pool.sort_unstable();
            for &r in &pool {
                out.push_original(r);
            }
        } else {
            for &r in &rows {
                out.push_original(r);
            }
            for _ in rows.len()..target {
                let r = rows[rng.random_range(0..rows.len())];
                out.push_copy(r);
                pool.push(r);
            }
        }
        pools.push(pool);
    }
    let n_natural = out.len();

    let majority = data.majority_class();
    let pairs: Vec<(usize, usize)> = if n_classes == 2 {
        vec![(majority, 1 - majority)]
    } else {
        (0..n_classes).map(|c| (c, (c + 1) % n_classes)).collect()
    };
    // ties go to the class with fewer original rows, then the lower id
    let prefer = |a: usize, b: usize| -> usize {
        if (counts[a], a) <= (counts[b], b) {
            a
        } else {
            b
        }
    };
    let mut soft_rows: Vec<[f64; 2]> = Vec::new();
    let mut soft_classes: Vec<(usize, usize)> = Vec::new();
    for &(ca, cb) in &pairs {
        let mut pa = pools[ca].clone();
        let mut pb = pools[cb].clone();
        pa.shuffle(&mut rng);
        pb.shuffle(&mut rng);
        for (&ra, &rb) in pa.iter().zip(&pb) {
            let w: f64 = beta.sample(&mut rng);
            // step from a toward b is 1 - weight on a
            for step in [1.0 - w, w] {
                let wa = 1.0 - step;
                let label = if wa > step {
                    ca
                } else if step > wa {
                    cb
                } else {
                    prefer(ca, cb)
                };
                out.push_interpolated(ra, rb, step, label);
                soft_rows.push([wa, step]);
                soft_classes.push((ca, cb));
            }
        }
    }

    let n = out.len();
    let mut soft = Array2::<f64>::zeros((n, n_classes));
    // natural rows keep one-hot targets; filled after finish() from labels
    for (k, (w, (ca, cb))) in soft_rows.iter().zip(&soft_classes).enumerate() {
        soft[[n_natural + k, *ca]] = w[0];
        soft[[n_natural + k, *cb]] = w[1];
    }
    let mut aug = out.finish(None)?;
    for i in 0..n_natural {
        soft[[i, aug.data.labels()[i]]] = 1.0;
    }
    aug = AugmentedDataset {
        soft_labels: Some(soft),
        ..aug
    };
    aug.metadata.insert("method".into(), "remix".into());
    aug.metadata.insert("remix_alpha".into(), alpha.to_string());
    aug.metadata.insert("remix_lambda_prior".into(), format!("beta({alpha},{alpha})"));
    aug.metadata.insert("remix_target_per_class".into(), target.to_string());
    aug.metadata
        .insert("remix_target_rule".into(), "geometric mean of class counts".into());
    Ok(aug)
}
