use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::SvmModel;
use crate::resampling::AugmentedDataset;

/// Support-vector counts and identities relative to a base model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvCensus {
    pub sv_count_per_class: Vec<usize>,
    pub sv_count: usize,
    /// Support-vector count over the base model's (1 without a base).
    pub sv_multiple_vs_base: f64,
    /// Majority over minority support vectors; classes ranked by their
    /// number of original (non-generated) training rows. `None` when the
    /// minority has no support vectors.
    pub class_ratio_maj_min: Option<f64>,
    pub dual_sum_per_class: Vec<f64>,
    /// Share of natural-origin support vectors whose source instance is not a
    /// support vector of the base model.
    pub new_sv_ratio: f64,
    /// Share of support vectors with synthetic provenance.
    pub synthetic_sv_ratio: f64,
}

/// Tallies a trained SVM's support vectors by class and provenance. Identity
/// comes only from instance ids and provenance records: a duplicated row
/// resolves to its source instance through `parent_a`.
pub fn sv_census(
    model: &SvmModel,
    train: &AugmentedDataset,
    base_model: Option<&SvmModel>,
) -> Result<SvCensus> {
    let row_of: HashMap<u64, usize> = train
        .data
        .instance_ids()
        .iter()
        .enumerate()
        .map(|(r, &id)| (id, r))
        .collect();
    let n_classes = train.data.n_classes();
    let mut per_class = vec![0usize; n_classes];
    let mut dual = vec![0.0; n_classes];
    let mut synthetic = 0usize;
    let mut natural_sources = Vec::new();
    for (&id, &coef) in model.support_ids.iter().zip(&model.dual_coefs) {
        let &row = row_of.get(&id).ok_or_else(|| {
            Error::InvalidData(format!("support vector {id} is not a training instance"))
        })?;
        let class = train.data.labels()[row];
        per_class[class] += 1;
        dual[class] += coef;
        let p = &train.provenance[row];
        if p.is_synthetic() {
            synthetic += 1;
        } else {
            natural_sources.push(p.parent_a);
        }
    }
    let count = model.support_ids.len();

    // rank classes by original rows (natural and their own source)
    let mut originals = vec![0usize; n_classes];
    for (i, p) in train.provenance.iter().enumerate() {
        if !p.is_synthetic() && p.parent_a == train.data.instance_ids()[i] {
            originals[train.data.labels()[i]] += 1;
        }
    }
    let majority = (0..n_classes).max_by_key(|&c| (originals[c], usize::MAX - c)).unwrap_or(0);
    let minority = (0..n_classes).min_by_key(|&c| (originals[c], c)).unwrap_or(0);
    let class_ratio = (per_class[minority] > 0)
        .then(|| per_class[majority] as f64 / per_class[minority] as f64);

    let (multiple, new_ratio) = match base_model {
        Some(base) => {
            let base_ids: HashSet<u64> = base.support_ids.iter().copied().collect();
            let multiple = if base.n_support() > 0 {
                count as f64 / base.n_support() as f64
            } else {
                0.0
            };
            let new = natural_sources.iter().filter(|s| !base_ids.contains(s)).count();
            let ratio = if natural_sources.is_empty() {
                0.0
            } else {
                new as f64 / natural_sources.len() as f64
            };
            (multiple, ratio)
        }
        None => (1.0, 0.0),
    };

    Ok(SvCensus {
        sv_count_per_class: per_class,
        sv_count: count,
        sv_multiple_vs_base: multiple,
        class_ratio_maj_min: class_ratio,
        dual_sum_per_class: dual,
        new_sv_ratio: new_ratio,
        synthetic_sv_ratio: if count > 0 {
            synthetic as f64 / count as f64
        } else {
            0.0
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;
    use crate::models::Kernel;
    use crate::resampling::{ros, smote};
    use ndarray::{array, Array2};

    fn fake_model(ids: &[u64], coefs: &[f64], labels: &[usize]) -> SvmModel {
        SvmModel {
            support_ids: ids.to_vec(),
            dual_coefs: coefs.to_vec(),
            support_vectors: Array2::zeros((ids.len(), 1)),
            support_labels: labels.to_vec(),
            bias: 0.0,
            kernel: Kernel::Linear,
            c: 1.0,
            class_weights: vec![1.0, 1.0],
            converged: true,
            iterations: 0,
        }
    }

    fn six() -> Dataset {
        Dataset::new(
            array![[0.0], [1.0], [2.0], [3.0], [10.0], [11.0]],
            vec![0, 0, 0, 0, 1, 1],
            (0..6).collect(),
            2,
        )
        .unwrap()
    }

    #[test]
    fn counts_and_ratios_against_base() {
        let d = six();
        let base_train = AugmentedDataset::natural(d.clone());
        let base = fake_model(&[2, 3, 4], &[-0.5, -0.5, 1.0], &[0, 0, 1]);
        let b = sv_census(&base, &base_train, None).unwrap();
        assert_eq!(b.sv_count_per_class, vec![2, 1]);
        assert_eq!(b.class_ratio_maj_min, Some(2.0));
        assert_eq!(b.sv_multiple_vs_base, 1.0);

        // copies of rows 4 and 5 get ids 6 and 7
        let aug = ros(&d, 0).unwrap();
        assert_eq!(aug.data.instance_ids(), &[0, 1, 2, 3, 4, 5, 6, 7]);
        let source_of_6 = aug.provenance[6].parent_a;
        let m = fake_model(
            &[1, 2, 3, 5, 6, 7],
            &[-0.2, -0.4, -0.4, 0.5, 0.25, 0.25],
            &[0, 0, 0, 1, 1, 1],
        );
        let c = sv_census(&m, &aug, Some(&base)).unwrap();
        assert_eq!(c.sv_count, 6);
        assert_eq!(c.sv_count_per_class, vec![3, 3]);
        assert_eq!(c.sv_multiple_vs_base, 2.0);
        assert_eq!(c.class_ratio_maj_min, Some(1.0));
        assert_eq!(c.synthetic_sv_ratio, 0.0);
        assert!((c.dual_sum_per_class[0] + 1.0).abs() < 1e-12);
        assert!((c.dual_sum_per_class[1] - 1.0).abs() < 1e-12);
        // sources: 1, 2, 3, 5, parent(6), parent(7); base SVs are 2, 3, 4
        let sources = [1u64, 2, 3, 5, source_of_6, aug.provenance[7].parent_a];
        let new = sources.iter().filter(|s| ![2, 3, 4].contains(*s)).count();
        assert_eq!(c.new_sv_ratio, new as f64 / 6.0);
    }

    #[test]
    fn synthetic_share_and_missing_ids() {
        let d = Dataset::new(
            array![[0.0], [1.0], [2.0], [3.0], [10.0], [11.0], [12.0]],
            vec![0, 0, 0, 0, 1, 1, 1],
            (0..7).collect(),
            2,
        )
        .unwrap();
        let aug = smote(&d, 2, 4).unwrap();
        assert_eq!(aug.synthetic_count(), 1);
        let m = fake_model(&[3, 4, 7], &[-1.0, 0.5, 0.5], &[0, 1, 1]);
        let c = sv_census(&m, &aug, None).unwrap();
        assert!((c.synthetic_sv_ratio - 1.0 / 3.0).abs() < 1e-15);
        // majority is ranked by original rows, not by post-augmentation counts
        assert_eq!(c.class_ratio_maj_min, Some(0.5));

        let bad = fake_model(&[99], &[1.0], &[1]);
        assert!(sv_census(&bad, &aug, None).is_err());
        let none = fake_model(&[3], &[-1.0], &[0]);
        assert_eq!(sv_census(&none, &aug, None).unwrap().class_ratio_maj_min, None);
    }
}
