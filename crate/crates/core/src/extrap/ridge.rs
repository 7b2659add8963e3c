use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear predictor `g(x) = w·x + b` fitted with an unpenalized intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
}

impl RidgeModel {
    pub fn predict(&self, x: ArrayView1<'_, f64>) -> f64 {
        self.intercept + x.iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>()
    }

    pub fn predict_all(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        x.rows().into_iter().map(|r| self.predict(r)).collect()
    }
}

/// Minimizes `(1/n) Σ (g(x_i) − y_i)² + λ‖w‖²`.
///
/// Solved on centered features: `(XcᵀXc + nλI) w = Xcᵀ(y − ȳ)`, `b = ȳ − w·x̄`.
pub fn fit_ridge(features: ArrayView2<'_, f64>, targets: &[f64], lambda: f64) -> Result<RidgeModel> {
    let n = features.nrows();
    if n != targets.len() {
        return Err(Error::InvalidArgument(format!(
            "{n} feature rows for {} targets",
            targets.len()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("ridge fit needs at least 2 points".into()));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("lambda = {lambda} must be >= 0")));
    }
    let d = features.ncols();
    let x_mean = features.mean_axis(Axis(0)).expect("n >= 2");
    let y_mean = targets.iter().sum::<f64>() / n as f64;
    let xc = &features - &x_mean;

    let mut gram = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DVector::<f64>::zeros(d);
    for (row, &y) in xc.rows().into_iter().zip(targets) {
        let yc = y - y_mean;
        for a in 0..d {
            rhs[a] += row[a] * yc;
            for b in a..d {
                gram[(a, b)] += row[a] * row[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
        gram[(a, a)] += n as f64 * lambda;
    }

    let weights = if rhs.iter().all(|&v| v == 0.0) && lambda > 0.0 {
        // Constant targets: the exact minimizer is w = 0.
        DVector::zeros(d)
    } else {
        let scale = gram.diagonal().amax().max(f64::MIN_POSITIVE);
        let chol = gram.clone().cholesky().ok_or(Error::SingularSystem)?;
        let min_pivot = chol.l().diagonal().iter().fold(f64::INFINITY, |a, &b| a.min(b));
        if min_pivot * min_pivot <= 1e-12 * scale {
            return Err(Error::SingularSystem);
        }
        chol.solve(&rhs)
    };
    let weights: Vec<f64> = weights.iter().copied().collect();
    let intercept = y_mean - x_mean.iter().zip(&weights).map(|(m, w)| m * w).sum::<f64>();
    let model = RidgeModel {
        weights,
        intercept,
        lambda,
    };
    if !model.intercept.is_finite() || model.weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok(model)
}
