//! Balanced accuracy and macro F1 over a confusion matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts with rows = true class, columns = predicted class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    /// Class count is the larger of the highest label seen plus one and
    /// `min_classes`.
    pub fn new(truth: &[usize], pred: &[usize], min_classes: usize) -> Result<Self> {
        if truth.len() != pred.len() {
            return Err(Error::DimensionMismatch {
                expected: truth.len(),
                got: pred.len(),
            });
        }
        let k = truth
            .iter()
            .chain(pred)
            .map(|&c| c + 1)
            .max()
            .unwrap_or(0)
            .max(min_classes);
        let mut counts = vec![vec![0; k]; k];
        for (&t, &p) in truth.iter().zip(pred) {
            counts[t][p] += 1;
        }
        Ok(Self { counts })
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn support(&self, c: usize) -> usize {
        self.counts[c].iter().sum()
    }

    pub fn predicted(&self, c: usize) -> usize {
        self.counts.iter().map(|r| r[c]).sum()
    }

    pub fn recall(&self, c: usize) -> Option<f64> {
        let s = self.support(c);
        (s > 0).then(|| self.counts[c][c] as f64 / s as f64)
    }

    pub fn precision(&self, c: usize) -> Option<f64> {
        let p = self.predicted(c);
        (p > 0).then(|| self.counts[c][c] as f64 / p as f64)
    }

    /// F1 of class `c`; 0 when precision and recall are both 0 or undefined.
    pub fn f1(&self, c: usize) -> f64 {
        let p = self.precision(c).unwrap_or(0.0);
        let r = self.recall(c).unwrap_or(0.0);
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    /// Classes present in the ground truth.
    fn true_classes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_classes()).filter(|&c| self.support(c) > 0)
    }
}

/// Mean per-class recall over the classes present in `truth`.
pub fn balanced_accuracy(truth: &[usize], pred: &[usize]) -> Result<f64> {
    let cm = ConfusionMatrix::new(truth, pred, 0)?;
    let recalls: Vec<f64> = cm.true_classes().filter_map(|c| cm.recall(c)).collect();
    if recalls.is_empty() {
        return Err(Error::InvalidArgument("no ground-truth labels".into()));
    }
    Ok(recalls.iter().sum::<f64>() / recalls.len() as f64)
}

/// Unweighted mean of per-class F1 over the classes present in `truth`.
/// Classes never predicted contribute an F1 of 0.
pub fn macro_f1(truth: &[usize], pred: &[usize]) -> Result<f64> {
    let cm = ConfusionMatrix::new(truth, pred, 0)?;
    let f1s: Vec<f64> = cm.true_classes().map(|c| cm.f1(c)).collect();
    if f1s.is_empty() {
        return Err(Error::InvalidArgument("no ground-truth labels".into()));
    }
    Ok(f1s.iter().sum::<f64>() / f1s.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn worked_examples() {
        let t = [0, 0, 1, 1];
        let p = [0, 1, 1, 1];
        assert_eq!(balanced_accuracy(&t, &p).unwrap(), 0.75);
        let f = macro_f1(&t, &p).unwrap();
        let want = (2.0 / 3.0 + 0.8) / 2.0;
        assert!((f - want).abs() < 1e-12);
        assert!((f - 0.733).abs() < 1e-3);
    }

    #[test]
    fn perfect_and_majority_predictors() {
        let t = [0, 1, 1, 0, 2];
        assert_eq!(balanced_accuracy(&t, &t).unwrap(), 1.0);
        assert_eq!(macro_f1(&t, &t).unwrap(), 1.0);
        let t = [0, 0, 0, 1];
        let p = [0, 0, 0, 0];
        assert_eq!(balanced_accuracy(&t, &p).unwrap(), 0.5);
        let cm = ConfusionMatrix::new(&t, &p, 2).unwrap();
        assert_eq!(cm.f1(1), 0.0);
        assert_eq!(cm.total(), 4);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(balanced_accuracy(&[0, 1], &[0]).is_err());
        assert!(macro_f1(&[0, 1], &[0]).is_err());
        assert!(balanced_accuracy(&[], &[]).is_err());
    }

    #[test]
    fn random_predictor_tends_to_half() {
        let mut rng = crate::rng::seeded(99);
        let truth: Vec<usize> = (0..10_000).map(|i| usize::from(i % 10 == 0)).collect();
        let pred: Vec<usize> = (0..10_000).map(|_| rng.random_range(0..2)).collect();
        let bac = balanced_accuracy(&truth, &pred).unwrap();
        assert!((bac - 0.5).abs() < 0.02, "{bac}");
    }

    proptest! {
        #[test]
        fn bounded_and_permutation_invariant(
            pairs in prop::collection::vec((0usize..3, 0usize..3), 1..60),
            perm_seed in 0u64..6,
        ) {
            let truth: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let pred: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let bac = balanced_accuracy(&truth, &pred).unwrap();
            let f1 = macro_f1(&truth, &pred).unwrap();
            prop_assert!((0.0..=1.0).contains(&bac));
            prop_assert!((0.0..=1.0).contains(&f1));

            let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
            let pm = perms[perm_seed as usize];
            let t2: Vec<usize> = truth.iter().map(|&c| pm[c]).collect();
            let p2: Vec<usize> = pred.iter().map(|&c| pm[c]).collect();
            prop_assert!((balanced_accuracy(&t2, &p2).unwrap() - bac).abs() < 1e-12);
            prop_assert!((macro_f1(&t2, &p2).unwrap() - f1).abs() < 1e-12);

            let tr: Vec<usize> = truth.iter().rev().copied().collect();
            let pr: Vec<usize> = pred.iter().rev().copied().collect();
            prop_assert!((balanced_accuracy(&tr, &pr).unwrap() - bac).abs() < 1e-12);
        }
    }
}
