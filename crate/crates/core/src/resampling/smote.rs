use rand::Rng;

use super::knn::knn_same_set;
use super::{deficits, AugmentBuilder, AugmentedDataset};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::{seeded, Rng as SeededRng};

/// SMOTE: each synthetic row interpolates a uniformly drawn class member
/// toward one of its `k` nearest same-class neighbours with step
/// `lambda ~ U(0, 1)`, until all classes are balanced.
pub fn smote(data: &Dataset, k: usize, seed: u64) -> Result<AugmentedDataset> {
    let mut rng = seeded(seed);
    let mut aug = oversample_same_class(data, k, &mut rng)?;
    aug.metadata.insert("method".into(), "smote".into());
    aug.metadata.insert("k_neighbors".into(), k.to_string());
    Ok(aug)
}

/// Same-class neighbour lists for class `rows`, in local indices.
pub(crate) fn class_neighbors(data: &Dataset, rows: &[usize], k: usize) -> Result<Vec<Vec<usize>>> {
    let x = data.features().select(ndarray::Axis(0), rows);
    knn_same_set(x.view(), k.min(rows.len() - 1), true)
}

pub(crate) fn oversample_same_class(
    data: &Dataset,
    k: usize,
    rng: &mut SeededRng,
) -> Result<AugmentedDataset> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let by_class = data.class_indices();
    let mut out = AugmentBuilder::with_originals(data);
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
        let neighbors = class_neighbors(data, rows, k)?;
        for _ in 0..deficit {
            let i = rng.random_range(0..rows.len());
            let nb = &neighbors[i];
            let j = nb[rng.random_range(0..nb.len())];
            let lambda: f64 = rng.random();
            out.push_interpolated(rows[i], rows[j], lambda, class);
        }
    }
    out.finish(None)
}
