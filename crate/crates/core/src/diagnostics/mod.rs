//! Measurement instruments: weight norms and relative weight changes,
//! support-vector census, and top-K feature selection with overlap scores.

use serde::{Deserialize, Serialize};

mod census;
mod topk;
mod weights;

pub use census::{sv_census, SvCensus};
pub use topk::{
    top_k_indices, topk_ce, topk_input_grad, topk_overlap, GradientTopK, KSpec, TopKMode,
    TopKReport, DEFAULT_GRADIENT_FRACTION, DEFAULT_TOP_K,
};
pub use weights::{
    frobenius_norm, linear_weight_report, mlp_weight_report, weight_diff_pct, WeightDiff,
    WeightReport, NEAR_ZERO_WEIGHT,
};

/// Everything measured for one trained model, relative to its base model
/// where one applies.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub weights: Option<WeightReport>,
    pub sv_census: Option<SvCensus>,
    /// Per-class top-K sets (CE for linear models, gradient frequency for
    /// networks) with overlap against the base.
    pub topk: Option<TopKReport>,
    /// Network only: mean per-instance top-K overlap against the base.
    pub topk_instance_overlap: Option<f64>,
}
