use rand::Rng;

use super::{deficits, AugmentBuilder, AugmentedDataset};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::seeded;

/// Random over-sampling: duplicates drawn with replacement until every class
/// matches the largest one. Copies keep natural origin and point at their
/// source row through `parent_a`.
pub fn ros(data: &Dataset, seed: u64) -> Result<AugmentedDataset> {
    if data.n_classes() < 2 {
        return Err(Error::InvalidArgument("ROS needs at least two classes".into()));
    }
    let mut rng = seeded(seed);
    let by_class = data.class_indices();
    let mut out = AugmentBuilder::with_originals(data);
    for (rows, deficit) in by_class.iter().zip(deficits(data)) {
        for _ in 0..deficit {
            let src = rows[rng.random_range(0..rows.len())];
            out.push_copy(src);
        }
    }
    let mut aug = out.finish(None)?;
    aug.metadata.insert("method".into(), "ros".into());
    Ok(aug)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::make_gaussian_imbalanced;

    #[test]
    fn balances_by_copying() {
        let d = make_gaussian_imbalanced(900, 100, 3, 2.0, 1).unwrap();
        let a = ros(&d, 5).unwrap();
        assert_eq!(a.data.class_counts(), vec![900, 900]);
        assert_eq!(a.len() - d.len(), 800);
        assert_eq!(a.synthetic_count(), 0);
        for i in d.len()..a.len() {
            let src = a.provenance[i].parent_a as usize;
            assert_eq!(d.labels()[src], 1);
            assert_eq!(a.data.row(i), d.row(src));
            assert_ne!(a.data.instance_ids()[i], a.provenance[i].parent_a);
        }
        assert_eq!(a, ros(&d, 5).unwrap());
    }

    #[test]
    fn balanced_input_is_unchanged() {
        let d = make_gaussian_imbalanced(10, 10, 2, 2.0, 1).unwrap();
        let a = ros(&d, 0).unwrap();
        assert_eq!(a.data, d);
    }
}
