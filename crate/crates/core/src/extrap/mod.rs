//! Per-item features, per-target ridge extrapolation, and evaluation metrics.

mod estimate;
mod eval;
mod features;
mod metrics;
mod ridge;

pub use estimate::{agreement, coreset_mean_estimate, estimate_accuracy, fit_on_coreset, predict_item};
pub use eval::{EvalResult, EvalSummary, TargetEval};
pub use features::{build_features, mean_correctness_feature, pc_features, FeatureMode, FeatureSpec};
pub use metrics::{mae, spearman};
pub use ridge::{fit_ridge, RidgeModel};

/// Ridge penalty used when none is configured.
pub const DEFAULT_LAMBDA: f64 = 1.0;
