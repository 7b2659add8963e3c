use ndarray::ArrayView1;

use super::features::FeatureSpec;
use super::ridge::{fit_ridge, RidgeModel};
use crate::coreset::Coreset;
use crate::error::{Error, Result};

fn check(features: &FeatureSpec, coreset: &Coreset, truth_len: usize) -> Result<()> {
    let n = features.num_items();
    if truth_len != n {
        return Err(Error::InvalidArgument(format!(
            "{truth_len} scores for {n} feature rows"
        )));
    }
    if let Some(&a) = coreset.anchors.iter().find(|&&a| a >= n) {
        return Err(Error::InvalidArgument(format!("anchor {a} out of range for {n} items")));
    }
    Ok(())
}

/// Clamped per-item prediction `ŝ_i = clamp(g(x_i), 0, 1)`.
pub fn predict_item(model: &RidgeModel, features: &FeatureSpec, item: usize) -> f64 {
    model.predict(features.values.row(item)).clamp(0.0, 1.0)
}

/// Fits `g_t` on the coreset rows of `features` against the target's coreset scores.
pub fn fit_on_coreset(
    features: &FeatureSpec,
    coreset: &Coreset,
    coreset_scores: &[u8],
    lambda: f64,
) -> Result<RidgeModel> {
    if coreset_scores.len() != coreset.len() {
        return Err(Error::InvalidArgument(format!(
            "{} coreset scores for {} anchors",
            coreset_scores.len(),
            coreset.len()
        )));
    }
    let x = features.values.select(ndarray::Axis(0), &coreset.anchors);
    let y: Vec<f64> = coreset_scores.iter().map(|&v| f64::from(v)).collect();
    fit_ridge(x.view(), &y, lambda)
}

/// `(Σ_{i∈C} y_i + Σ_{i∉C} ŝ_i) / |I|`, where `coreset_scores[j]` belongs to `coreset.anchors[j]`.
pub fn estimate_accuracy(
    model: &RidgeModel,
    features: &FeatureSpec,
    coreset: &Coreset,
    coreset_scores: &[u8],
) -> Result<f64> {
    let n = features.num_items();
    if n == 0 {
        return Err(Error::InvalidArgument("no items".into()));
    }
    if coreset_scores.len() != coreset.len() {
        return Err(Error::InvalidArgument("coreset scores and anchors differ in length".into()));
    }
    check(features, coreset, n)?;
    let mask = coreset.mask(n);
    let observed: u64 = coreset_scores.iter().map(|&v| u64::from(v)).sum();
    let predicted: f64 = (0..n)
        .filter(|&i| !mask[i])
        .map(|i| predict_item(model, features, i))
        .sum();
    Ok((observed as f64 + predicted) / n as f64)
}

/// Accuracy estimate that ignores features: the mean score on the coreset.
pub fn coreset_mean_estimate(coreset_scores: &[u8]) -> Result<f64> {
    if coreset_scores.is_empty() {
        return Err(Error::InvalidArgument("empty coreset".into()));
    }
    let hits: u64 = coreset_scores.iter().map(|&v| u64::from(v)).sum();
    Ok(hits as f64 / coreset_scores.len() as f64)
}

/// Fraction of items outside the coreset where `ŝ_i ≥ 0.5` matches `y_i`.
pub fn agreement(
    model: &RidgeModel,
    features: &FeatureSpec,
    coreset: &Coreset,
    full_truth: ArrayView1<'_, u8>,
) -> Result<f64> {
    let n = features.num_items();
    check(features, coreset, full_truth.len())?;
    let mask = coreset.mask(n);
    let mut total = 0usize;
    let mut hits = 0usize;
    for i in (0..n).filter(|&i| !mask[i]) {
        total += 1;
        let label = u8::from(predict_item(model, features, i) >= 0.5);
        if label == full_truth[i] {
            hits += 1;
        }
    }
    if total == 0 {
        return Err(Error::Undefined(
            "agreement needs at least one item outside the coreset".into(),
        ));
    }
    Ok(hits as f64 / total as f64)
}
