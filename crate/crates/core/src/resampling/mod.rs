//! Input-space class balancing and the provenance bookkeeping shared with the
//! latent-space samplers.

use std::collections::{BTreeMap, HashMap};

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

mod adasyn;
pub mod knn;
mod remix;
mod ros;
mod smote;

pub use adasyn::{adasyn, adasyn_allocation, adasyn_hardness};
pub use knn::{knn_cross, knn_same_set};
pub use remix::{remix, DEFAULT_REMIX_ALPHA};
pub use ros::ros;
pub use smote::smote;
pub(crate) use smote::oversample_same_class;

pub const DEFAULT_K_NEIGHBORS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Natural,
    Synthetic,
}

/// Where a row came from. For synthetic rows `lambda` is the interpolation
/// step from `parent_a` toward `parent_b`: `x = a + lambda * (b - a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticProvenance {
    pub origin: Origin,
    pub parent_a: u64,
    pub parent_b: Option<u64>,
    pub lambda: Option<f64>,
}

impl SyntheticProvenance {
    pub fn natural(id: u64) -> Self {
        Self {
            origin: Origin::Natural,
            parent_a: id,
            parent_b: None,
            lambda: None,
        }
    }

    /// Exact duplicate of `source` stored under a fresh id.
    pub fn copy_of(source: u64) -> Self {
        Self::natural(source)
    }

    pub fn interpolated(a: u64, b: u64, lambda: f64) -> Self {
        Self {
            origin: Origin::Synthetic,
            parent_a: a,
            parent_b: Some(b),
            lambda: Some(lambda),
        }
    }

    pub fn is_synthetic(&self) -> bool {
        self.origin == Origin::Synthetic
    }
}

/// `a + lambda * (b - a)` per component, clamped to the closed segment
/// between the parents so last-bit rounding never leaves it.
pub fn interpolate(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>, lambda: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let v = x + lambda * (y - x);
            v.clamp(x.min(y), x.max(y))
        })
        .collect()
}

/// A dataset plus per-row provenance and, for mixing methods, soft labels.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedDataset {
    pub data: Dataset,
    pub provenance: Vec<SyntheticProvenance>,
    pub soft_labels: Option<Array2<f64>>,
    /// Method parameters and warnings, carried into reports.
    pub metadata: BTreeMap<String, String>,
}

impl AugmentedDataset {
    pub fn new(
        data: Dataset,
        provenance: Vec<SyntheticProvenance>,
        soft_labels: Option<Array2<f64>>,
    ) -> Result<Self> {
        if provenance.len() != data.len() {
            return Err(Error::InvalidData(format!(
                "{} provenance records for {} rows",
                provenance.len(),
                data.len()
            )));
        }
        for p in &provenance {
            if p.is_synthetic() && p.lambda.is_none() {
                return Err(Error::InvalidData(
                    "synthetic row without interpolation coefficient".into(),
                ));
            }
        }
        if let Some(soft) = &soft_labels {
            if soft.dim() != (data.len(), data.n_classes()) {
                return Err(Error::InvalidData("soft label matrix has wrong shape".into()));
            }
            for (i, row) in soft.rows().into_iter().enumerate() {
                if (row.sum() - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidData(format!(
                        "soft labels of row {i} sum to {}",
                        row.sum()
                    )));
                }
            }
        }
        Ok(Self {
            data,
            provenance,
            soft_labels,
            metadata: BTreeMap::new(),
        })
    }

    /// Wraps unmodified data: every row is natural and its own parent.
    pub fn natural(data: Dataset) -> Self {
        let provenance = data
            .instance_ids()
            .iter()
            .map(|&id| SyntheticProvenance::natural(id))
            .collect();
        Self {
            data,
            provenance,
            soft_labels: None,
            metadata: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn synthetic_count(&self) -> usize {
        self.provenance.iter().filter(|p| p.is_synthetic()).count()
    }

    /// Soft labels when present, otherwise one-hot hard labels.
    pub fn targets(&self) -> Array2<f64> {
        match &self.soft_labels {
            Some(s) => s.clone(),
            None => {
                let mut t = Array2::zeros((self.len(), self.data.n_classes()));
                for (i, &y) in self.data.labels().iter().enumerate() {
                    t[[i, y]] = 1.0;
                }
                t
            }
        }
    }

    /// Per-class sums of the targets (hard counts when there are no soft labels).
    pub fn class_mass(&self) -> Vec<f64> {
        let t = self.targets();
        t.columns().into_iter().map(|c| c.sum()).collect()
    }

    /// Rebuilds row `i` from its recorded parents, looked up by instance id in
    /// `source`.
    pub fn replay_row(&self, i: usize, source: &Dataset) -> Option<Vec<f64>> {
        let index: HashMap<u64, usize> = source
            .instance_ids()
            .iter()
            .enumerate()
            .map(|(r, &id)| (id, r))
            .collect();
        let p = &self.provenance[i];
        let a = source.row(*index.get(&p.parent_a)?);
        match (p.parent_b, p.lambda) {
            (Some(b), Some(lambda)) => {
                let b = source.row(*index.get(&b)?);
                Some(interpolate(a, b, lambda))
            }
            _ => Some(a.to_vec()),
        }
    }
}

/// Accumulates the original rows followed by generated ones.
pub(crate) struct AugmentBuilder<'a> {
    source: &'a Dataset,
    values: Vec<f64>,
    labels: Vec<usize>,
    ids: Vec<u64>,
    provenance: Vec<SyntheticProvenance>,
    next_id: u64,
}

impl<'a> AugmentBuilder<'a> {
    /// Starts empty; callers add natural rows explicitly.
    pub fn empty(source: &'a Dataset) -> Self {
        Self {
            source,
            values: Vec::new(),
            labels: Vec::new(),
            ids: Vec::new(),
            provenance: Vec::new(),
            next_id: source.max_instance_id() + 1,
        }
    }

    /// Starts with every source row, unmodified.
    pub fn with_originals(source: &'a Dataset) -> Self {
        let mut b = Self::empty(source);
        b.values = source.features().iter().copied().collect();
        b.labels = source.labels().to_vec();
        b.ids = source.instance_ids().to_vec();
        b.provenance = source
            .instance_ids()
            .iter()
            .map(|&id| SyntheticProvenance::natural(id))
            .collect();
        b
    }

    pub fn push_original(&mut self, row: usize) {
        let id = self.source.instance_ids()[row];
        self.values.extend(self.source.row(row).iter());
        self.labels.push(self.source.labels()[row]);
        self.ids.push(id);
        self.provenance.push(SyntheticProvenance::natural(id));
    }

    pub fn push_copy(&mut self, row: usize) {
        let source_id = self.source.instance_ids()[row];
        self.values.extend(self.source.row(row).iter());
        self.labels.push(self.source.labels()[row]);
        self.push_id(SyntheticProvenance::copy_of(source_id));
    }

    /// Interpolates from source row `a` toward source row `b`.
    pub fn push_interpolated(&mut self, a: usize, b: usize, lambda: f64, label: usize) {
        let row = interpolate(self.source.row(a), self.source.row(b), lambda);
        self.values.extend(row);
        self.labels.push(label);
        let ids = self.source.instance_ids();
        self.push_id(SyntheticProvenance::interpolated(ids[a], ids[b], lambda));
    }

    fn push_id(&mut self, p: SyntheticProvenance) {
        self.ids.push(self.next_id);
        self.next_id += 1;
        self.provenance.push(p);
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn finish(self, soft_labels: Option<Array2<f64>>) -> Result<AugmentedDataset> {
        let n = self.labels.len();
        let d = self.source.feature_count();
        let features = Array2::from_shape_vec((n, d), self.values)
            .map_err(|e| Error::InvalidData(e.to_string()))?;
        let data = Dataset::with_label_names(
            features,
            self.labels,
            self.ids,
            self.source.n_classes(),
            self.source.label_names().to_vec(),
        )?;
        AugmentedDataset::new(data, self.provenance, soft_labels)
    }
}

/// Per-class loss multipliers `n / (N * n_c)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub weights: Vec<f64>,
}

impl ClassWeights {
    pub fn uniform(n_classes: usize) -> Self {
        Self {
            weights: vec![1.0; n_classes],
        }
    }

    pub fn get(&self, class: usize) -> f64 {
        self.weights[class]
    }
}

pub fn class_weights(data: &Dataset) -> ClassWeights {
    let n = data.len() as f64;
    let k = data.n_classes() as f64;
    ClassWeights {
        weights: data
            .class_counts()
            .into_iter()
            .map(|c| n / (k * c as f64))
            .collect(),
    }
}

/// Rows each class needs to reach the largest class count.
pub(crate) fn deficits(data: &Dataset) -> Vec<usize> {
    let counts = data.class_counts();
    let target = counts.iter().copied().max().unwrap_or(0);
    counts.into_iter().map(|c| target - c).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn weights_balanced_and_skewed() {
        let d = Dataset::new(array![[0.0], [1.0]], vec![0, 1], vec![0, 1], 2).unwrap();
        assert_eq!(class_weights(&d).weights, vec![1.0, 1.0]);

        let mut labels = vec![0; 900];
        labels.extend(vec![1; 100]);
        let d = Dataset::new(Array2::zeros((1000, 1)), labels, (0..1000).collect(), 2).unwrap();
        let w = class_weights(&d);
        assert!((w.weights[0] - 0.556).abs() < 1e-3);
        assert!((w.weights[1] - 5.0).abs() < 1e-12);
        let total: f64 = w
            .weights
            .iter()
            .zip(d.class_counts())
            .map(|(w, c)| w * c as f64)
            .sum();
        assert!((total - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn interpolation_endpoints() {
        let a = array![1.0, -2.0, 3.0];
        let b = array![4.0, 5.0, -6.0];
        assert_eq!(interpolate(a.view(), b.view(), 0.0), a.to_vec());
        assert_eq!(interpolate(a.view(), b.view(), 1.0), b.to_vec());
    }

    #[test]
    fn provenance_requires_lambda_for_synthetic() {
        let d = Dataset::new(array![[0.0], [1.0]], vec![0, 1], vec![0, 1], 2).unwrap();
        let bad = SyntheticProvenance {
            origin: Origin::Synthetic,
            parent_a: 0,
            parent_b: Some(1),
            lambda: None,
        };
        assert!(AugmentedDataset::new(d.clone(), vec![bad, SyntheticProvenance::natural(1)], None)
            .is_err());
        let soft = array![[0.5, 0.4], [0.0, 1.0]];
        let nat = vec![SyntheticProvenance::natural(0), SyntheticProvenance::natural(1)];
        assert!(AugmentedDataset::new(d, nat, Some(soft)).is_err());
    }
}
