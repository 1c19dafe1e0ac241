//! Oversampling in a network's latent space: same-class interpolation (DSM)
//! and interpolation toward nearest other-class rows (EOS).

use ndarray::Axis;
use rand::Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::resampling::{knn_cross, oversample_same_class, AugmentBuilder, AugmentedDataset};
use crate::rng::seeded;

/// Upper end (exclusive) of the EOS interpolation step.
pub const EOS_MAX_STEP: f64 = 0.5;

/// SMOTE on latent rows: interpolate toward same-class neighbours until
/// every class matches the largest one.
pub fn dsm(latent: &Dataset, k: usize, seed: u64) -> Result<AugmentedDataset> {
    let mut rng = seeded(seed);
    let mut aug = oversample_same_class(latent, k, &mut rng)?;
    aug.metadata.insert("method".into(), "dsm".into());
    aug.metadata.insert("k_neighbors".into(), k.to_string());
    Ok(aug)
}

/// Expansion oversampling: from a uniformly drawn class member step toward one
/// of its `k` nearest rows of any other class by `lambda ~ U(0, 0.5)`. The new
/// row keeps the member's class and lies strictly closer to it than to the
/// adversary. Adversaries at zero distance are skipped since they give no
/// direction.
pub fn eos(latent: &Dataset, k: usize, seed: u64) -> Result<AugmentedDataset> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let mut rng = seeded(seed);
    let counts = latent.class_counts();
    let target = counts.iter().copied().max().unwrap_or(0);
    let by_class = latent.class_indices();
    let mut out = AugmentBuilder::with_originals(latent);
    for (class, rows) in by_class.iter().enumerate() {
        let deficit = target - rows.len();
        if deficit == 0 {
            continue;
        }
        let others: Vec<usize> = (0..latent.len())
            .filter(|&i| latent.labels()[i] != class)
            .collect();
        if others.is_empty() {
            return Err(Error::InvalidData(format!("class {class} has no adversary rows")));
        }
        let q = latent.features().select(Axis(0), rows);
        let r = latent.features().select(Axis(0), &others);
        let adversaries = knn_cross(q.view(), r.view(), k, true)?;
        let usable: Vec<usize> = (0..rows.len())
            .filter(|&i| !adversaries[i].is_empty())
            .collect();
        if usable.is_empty() {
            return Err(Error::InvalidData(format!(
                "every row of class {class} coincides with all adversary rows"
            )));
        }
        for _ in 0..deficit {
            let i = usable[rng.random_range(0..usable.len())];
            let nb = &adversaries[i];
            let adv = others[nb[rng.random_range(0..nb.len())]];
            let lambda = EOS_MAX_STEP * rng.random::<f64>();
            out.push_interpolated(rows[i], adv, lambda, class);
        }
    }
    let mut aug = out.finish(None)?;
    aug.metadata.insert("method".into(), "eos".into());
    aug.metadata.insert("k_neighbors".into(), k.to_string());
    aug.metadata
        .insert("eos_step_range".into(), format!("[0, {EOS_MAX_STEP})"));
    Ok(aug)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::make_gaussian_imbalanced;
    use crate::resampling::knn::euclidean;
    use ndarray::array;

    #[test]
    fn dsm_balances_within_bounds() {
        let d = make_gaussian_imbalanced(120, 15, 3, 1.0, 1).unwrap();
        let a = dsm(&d, 5, 2).unwrap();
        assert_eq!(a.data.class_counts(), vec![120, 120]);
        for i in d.len()..a.len() {
            let p = a.provenance[i];
            let (pa, pb) = (d.row(p.parent_a as usize), d.row(p.parent_b.unwrap() as usize));
            for c in 0..3 {
                let v = a.data.features()[[i, c]];
                assert!(v >= pa[c].min(pb[c]) && v <= pa[c].max(pb[c]));
            }
        }
        let one = Dataset::new(array![[0.0], [1.0], [2.0]], vec![0, 0, 1], vec![0, 1, 2], 2).unwrap();
        assert!(dsm(&one, 5, 0).is_err());
    }

    #[test]
    fn eos_rows_stay_on_the_minority_side() {
        let d = make_gaussian_imbalanced(150, 20, 4, 1.5, 3).unwrap();
        let a = eos(&d, 5, 4).unwrap();
        assert_eq!(a.data.class_counts(), vec![150, 150]);
        for i in d.len()..a.len() {
            let p = a.provenance[i];
            assert_eq!(d.labels()[p.parent_a as usize], 1);
            assert_eq!(d.labels()[p.parent_b.unwrap() as usize], 0);
            assert_eq!(a.data.labels()[i], 1);
            let lambda = p.lambda.unwrap();
            assert!((0.0..0.5).contains(&lambda));
            let x = a.data.row(i);
            let to_parent = euclidean(x, d.row(p.parent_a as usize));
            let to_adv = euclidean(x, d.row(p.parent_b.unwrap() as usize));
            assert!(to_parent < to_adv);
        }
    }

    #[test]
    fn eos_skips_coincident_adversaries() {
        let x = array![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [0.0, 0.0], [0.5, 3.0]];
        let d = Dataset::new(x, vec![0, 0, 0, 1, 1], (0..5).collect(), 2).unwrap();
        let a = eos(&d, 1, 0).unwrap();
        for p in &a.provenance[5..] {
            // row 3 sits on row 0, so its adversary must be row 1
            if p.parent_a == 3 {
                assert_eq!(p.parent_b, Some(1));
            }
        }
    }
}
