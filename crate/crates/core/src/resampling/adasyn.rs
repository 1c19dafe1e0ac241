use log::warn;
use rand::Rng;

use super::knn::knn_same_set;
use super::smote::class_neighbors;
use super::{deficits, AugmentBuilder, AugmentedDataset};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::seeded;

/// Fraction of each row's `k` nearest neighbours (over the full dataset) that
/// belong to another class.
pub fn adasyn_hardness(data: &Dataset, rows: &[usize], k: usize) -> Result<Vec<f64>> {
    let k = k.min(data.len() - 1);
    let nb = knn_same_set(data.features(), k, true)?;
    let labels = data.labels();
    Ok(rows
        .iter()
        .map(|&r| {
            let other = nb[r].iter().filter(|&&j| labels[j] != labels[r]).count();
            other as f64 / k as f64
        })
        .collect())
}

/// Splits `deficit` across rows in proportion to `hardness`. Each share is
/// the floor or ceiling of its exact quota; leftover units go to the largest
/// remainders (lower index first), so the shares sum to `deficit`. When all
/// hardness values are zero the split is uniform and the flag is set.
pub fn adasyn_allocation(hardness: &[f64], deficit: usize) -> (Vec<usize>, bool) {
    let total: f64 = hardness.iter().sum();
    let fallback = total <= 0.0;
    let quotas: Vec<f64> = if fallback {
        vec![deficit as f64 / hardness.len() as f64; hardness.len()]
    } else {
        hardness
            .iter()
            .map(|h| h / total * deficit as f64)
            .collect()
    };
    let mut alloc: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = alloc.iter().sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(deficit.saturating_sub(assigned)) {
        alloc[i] += 1;
    }
    (alloc, fallback)
}

/// ADASYN: like SMOTE, but each class member's share of the synthetic rows
/// grows with the share of other-class points among its neighbours.
pub fn adasyn(data: &Dataset, k: usize, seed: u64) -> Result<AugmentedDataset> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let mut rng = seeded(seed);
    let by_class = data.class_indices();
    let mut out = AugmentBuilder::with_originals(data);
    let mut fallbacks = Vec::new();
    for (class, (rows, deficit)) in by_class.iter().zip(deficits(data)).enumerate() {
        if deficit == 0 {
            continue;
        }
        if rows.len() < 2 {
            return Err(Error::TooFewInstances {
                class,
                count: rows.len(),
                needed: 2,
            });
        }
        let hardness = adasyn_hardness(data, rows, k)?;
        let (alloc, fallback) = adasyn_allocation(&hardness, deficit);
        if fallback {
            warn!("ADASYN: class {class} has no borderline instances; allocating uniformly");
            fallbacks.push(class.to_string());
        }
        let neighbors = class_neighbors(data, rows, k)?;
        for (i, &g) in alloc.iter().enumerate() {
            let nb = &neighbors[i];
            for _ in 0..g {
                let j = nb[rng.random_range(0..nb.len())];
                let lambda: f64 = rng.random();
                out.push_interpolated(rows[i], rows[j], lambda, class);
            }
        }
    }
    let mut aug = out.finish(None)?;
    aug.metadata.insert("method".into(), "adasyn".into());
    aug.metadata.insert("k_neighbors".into(), k.to_string());
    if !fallbacks.is_empty() {
        aug.metadata
            .insert("uniform_fallback_classes".into(), fallbacks.join(","));
    }
    Ok(aug)
}
