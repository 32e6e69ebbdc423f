use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::stats::{mean, rmse, zscore};

/// Linear model over z-scored features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftModel {
    pub target: String,
    /// Retained feature names, in weight order.
    pub features: Vec<String>,
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Normalization applied to raw feature values before the weights.
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub train_rmse: f64,
    /// Features dropped for having zero variance.
    pub dropped: Vec<String>,
}

fn check_shape(x: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} rows but {} targets",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::TooFewRows {
            need: 2,
            got: x.len(),
        });
    }
    let width = x[0].len();
    if let Some(bad) = x.iter().position(|r| r.len() != width) {
        return Err(Error::DimensionMismatch(format!(
            "row {bad} has {} columns, expected {width}",
            x[bad].len()
        )));
    }
    Ok(width)
}

/// Least squares with intercept on an already normalized matrix.
///
/// Columns are centred and the intercept recovered from the means, so the
/// intercept is never shrunk. Rank-deficient designs get the minimum-norm
/// weight vector. Feature names default to `x0, x1, ...` with identity
/// normalization.
pub fn fit_ols(x: &[Vec<f64>], y: &[f64]) -> Result<LiftModel> {
    let width = check_shape(x, y)?;
    let n = x.len();
    let col_means: Vec<f64> = (0..width)
        .map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let y_mean = mean(y);

    let weights = if width == 0 {
        Vec::new()
    } else {
        let a = DMatrix::from_fn(n, width, |i, j| x[i][j] - col_means[j]);
        let b = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
        let svd = a.svd(true, true);
        let max_sv = svd.singular_values.max();
        let tol = max_sv * n.max(width) as f64 * f64::EPSILON;
        let w = svd
            .solve(&b, tol)
            .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
        w.iter().copied().collect()
    };
    let intercept = y_mean
        - weights
            .iter()
            .zip(&col_means)
            .map(|(w, m)| w * m)
            .sum::<f64>();

    let mut model = LiftModel {
        target: String::new(),
        features: (0..width).map(|j| format!("x{j}")).collect(),
        weights,
        intercept,
        means: vec![0.0; width],
        stds: vec![1.0; width],
        train_rmse: 0.0,
        dropped: Vec::new(),
    };
    let fitted: Vec<f64> = x
        .iter()
        .map(|r| predict_row(&model, r))
        .collect::<Result<_>>()?;
    model.train_rmse = rmse(&fitted, y)?;
    Ok(model)
}

/// Z-scores raw features (dropping constant ones) and fits `target`.
pub fn fit_lift_model(
    feature_names: &[String],
    raw: &[Vec<f64>],
    y: &[f64],
    target: &str,
) -> Result<LiftModel> {
    let width = check_shape(raw, y)?;
    if width != feature_names.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} feature names for {width} columns",
            feature_names.len()
        )));
    }
    let z = zscore(raw)?;
    let mut model = fit_ols(&z.rows, y)?;
    model.target = target.to_owned();
    model.features = z.kept.iter().map(|&j| feature_names[j].clone()).collect();
    model.dropped = z
        .dropped
        .iter()
        .map(|&j| feature_names[j].clone())
        .collect();
    model.means = z.means;
    model.stds = z.stds;
    Ok(model)
}

/// Prediction from raw values given in `model.features` order.
pub fn predict_row(model: &LiftModel, values: &[f64]) -> Result<f64> {
    if values.len() != model.features.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} values for {} features",
            values.len(),
            model.features.len()
        )));
    }
    Ok(model.intercept
        + values
            .iter()
            .zip(&model.weights)
            .zip(model.means.iter().zip(&model.stds))
            .map(|((v, w), (m, s))| w * (v - m) / s)
            .sum::<f64>())
}

/// Prediction from raw values looked up by feature name. Extra entries are ignored.
pub fn predict(model: &LiftModel, features: &BTreeMap<String, f64>) -> Result<f64> {
    let values = model
        .features
        .iter()
        .map(|name| {
            features
                .get(name)
                .copied()
                .ok_or_else(|| Error::MissingFeature(name.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    predict_row(model, &values)
}

/// Leave-one-row-out RMSE. Normalization is refit on each training fold.
pub fn loo_rmse(feature_names: &[String], raw: &[Vec<f64>], y: &[f64]) -> Result<f64> {
    check_shape(raw, y)?;
    if raw.len() < 3 {
        return Err(Error::TooFewRows {
            need: 3,
            got: raw.len(),
        });
    }
    let mut predicted = Vec::with_capacity(y.len());
    for held in 0..raw.len() {
        let train_x: Vec<Vec<f64>> = (0..raw.len())
            .filter(|&i| i != held)
            .map(|i| raw[i].clone())
            .collect();
        let train_y: Vec<f64> = (0..y.len()).filter(|&i| i != held).map(|i| y[i]).collect();
        let model = fit_lift_model(feature_names, &train_x, &train_y, "")?;
        let row: BTreeMap<String, f64> = feature_names
            .iter()
            .cloned()
            .zip(raw[held].iter().copied())
            .collect();
        predicted.push(predict(&model, &row)?);
    }
    rmse(&predicted, y)
}
