use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{LinearModel, MlpModel};

/// Base weights below this magnitude are left out of percentage changes.
pub const NEAR_ZERO_WEIGHT: f64 = 1e-12;

/// Square root of the sum of squared entries.
pub fn frobenius_norm(weights: &[f64]) -> f64 {
    weights.iter().map(|w| w * w).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightDiff {
    /// Mean of `|aug - base| / |base|` over included entries (0 if none).
    pub mean_pct: f64,
    pub compared: usize,
    pub excluded: usize,
}

pub fn weight_diff_pct(base: &[f64], aug: &[f64]) -> Result<WeightDiff> {
    if base.len() != aug.len() {
        return Err(Error::DimensionMismatch {
            expected: base.len(),
            got: aug.len(),
        });
    }
    let mut sum = 0.0;
    let mut compared = 0;
    for (b, a) in base.iter().zip(aug) {
        if b.abs() < NEAR_ZERO_WEIGHT {
            continue;
        }
        sum += (a - b).abs() / b.abs();
        compared += 1;
    }
    Ok(WeightDiff {
        mean_pct: if compared > 0 { sum / compared as f64 } else { 0.0 },
        compared,
        excluded: base.len() - compared,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightReport {
    /// Norm over every weight matrix of the model (biases excluded).
    pub frobenius_total: f64,
    /// Network: norm of each class's row of the output layer. Linear model:
    /// norm of the weights pushing toward class 0 (negative) and class 1
    /// (positive).
    pub per_class_head_norms: Vec<f64>,
    /// Linear model: all weights. Network: output layer only.
    pub mean_pct_diff_vs_base: Option<f64>,
    pub excluded_near_zero: Option<usize>,
}

fn signed_norms(w: &[f64]) -> Vec<f64> {
    let neg: Vec<f64> = w.iter().copied().filter(|v| *v < 0.0).collect();
    let pos: Vec<f64> = w.iter().copied().filter(|v| *v > 0.0).collect();
    vec![frobenius_norm(&neg), frobenius_norm(&pos)]
}

pub fn linear_weight_report(model: &LinearModel, base: Option<&LinearModel>) -> Result<WeightReport> {
    let diff = base
        .map(|b| weight_diff_pct(&b.weights, &model.weights))
        .transpose()?;
    Ok(WeightReport {
        frobenius_total: frobenius_norm(&model.weights),
        per_class_head_norms: signed_norms(&model.weights),
        mean_pct_diff_vs_base: diff.map(|d| d.mean_pct),
        excluded_near_zero: diff.map(|d| d.excluded),
    })
}

pub fn mlp_weight_report(model: &MlpModel, base: Option<&MlpModel>) -> Result<WeightReport> {
    let all: Vec<f64> = model
        .layers
        .iter()
        .flat_map(|l| l.weights.iter().copied())
        .collect();
    let head = &model.head().weights;
    let per_class = head
        .rows()
        .into_iter()
        .map(|r| frobenius_norm(&r.to_vec()))
        .collect();
    let diff = match base {
        Some(b) => {
            let bh: Vec<f64> = b.head().weights.iter().copied().collect();
            let mh: Vec<f64> = head.iter().copied().collect();
            Some(weight_diff_pct(&bh, &mh)?)
        }
        None => None,
    };
    Ok(WeightReport {
        frobenius_total: frobenius_norm(&all),
        per_class_head_norms: per_class,
        mean_pct_diff_vs_base: diff.map(|d| d.mean_pct),
        excluded_near_zero: diff.map(|d| d.excluded),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn norm_cases() {
        assert_eq!(frobenius_norm(&[0.0; 6]), 0.0);
        assert!((frobenius_norm(&[1.0, 0.0, 0.0, 1.0]) - 2f64.sqrt()).abs() < 1e-15);
        assert!((frobenius_norm(&[1.0, 0.0, 0.0, 1.0]) - std::f64::consts::SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn norm_matches_naive_loop() {
        use rand::Rng;
        let mut rng = crate::rng::seeded(4);
        let m: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..4).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let mut s = 0.0;
        for row in &m {
            for v in row {
                s += v * v;
            }
        }
        let flat: Vec<f64> = m.concat();
        assert!((frobenius_norm(&flat) - s.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn diff_cases() {
        assert_eq!(weight_diff_pct(&[1.0, -3.0], &[1.0, -3.0]).unwrap().mean_pct, 0.0);
        assert_eq!(weight_diff_pct(&[1.0, -3.0], &[2.0, -6.0]).unwrap().mean_pct, 1.0);
        assert_eq!(weight_diff_pct(&[1.0, -2.0], &[2.0, -1.0]).unwrap().mean_pct, 0.75);
        let d = weight_diff_pct(&[0.0, 2.0], &[5.0, 3.0]).unwrap();
        assert_eq!((d.mean_pct, d.compared, d.excluded), (0.5, 1, 1));
        assert!(weight_diff_pct(&[1.0], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn diff_is_nonnegative_and_zero_only_on_equal(
            base in prop::collection::vec(-5.0f64..5.0, 1..20),
            noise in prop::collection::vec(-1.0f64..1.0, 20),
        ) {
            let aug: Vec<f64> = base.iter().zip(&noise).map(|(b, n)| b + n).collect();
            let d = weight_diff_pct(&base, &aug).unwrap();
            prop_assert!(d.mean_pct >= 0.0);
            let included_equal = base.iter().zip(&aug)
                .filter(|(b, _)| b.abs() >= NEAR_ZERO_WEIGHT)
                .all(|(b, a)| a == b);
            prop_assert_eq!(d.mean_pct == 0.0, included_equal);
        }
    }
}
