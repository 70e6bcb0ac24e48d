//! Target-side transformation chain, fitted on training-fold values only:
//! centering-reduction, a shift making everything >= 1, Box-Cox with the
//! profile-likelihood lambda, then a final centering-reduction of the
//! Box-Cox output. Every step is strictly monotone increasing, so target
//! rank order (and with it any threshold class) is preserved.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LAMBDA_GRID_MIN: f64 = -2.0;
const LAMBDA_GRID_STEP: f64 = 0.01;
const LAMBDA_GRID_POINTS: usize = 401;

// Test values far enough below the training minimum can shift to w <= 0,
// where the power is undefined; clamp keeps the forward map total.
const POSITIVE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Fitted parameters of the full chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetTransform {
    /// Training mean of the raw target.
    pub mean: f64,
    /// Training sample standard deviation of the raw target (> 0).
    pub std: f64,
    /// Offset `1 - min(z_train)` applied after standardization.
    pub shift: f64,
    /// Box-Cox exponent.
    pub lambda: f64,
    /// Training mean of the Box-Cox output.
    pub post_mean: f64,
    /// Training sample standard deviation of the Box-Cox output (> 0).
    pub post_std: f64,
}

fn mean_and_sample_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn box_cox(w: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        w.ln()
    } else {
        (w.powf(lambda) - 1.0) / lambda
    }
}

/// Profile log-likelihood estimate of the Box-Cox exponent over the grid
/// [-2, 2] in steps of 0.01. Inputs must be strictly positive. Ties resolve
/// to the smallest lambda.
pub fn fit_boxcox_lambda(w: &[f64]) -> f64 {
    let n = w.len() as f64;
    let log_sum: f64 = w.iter().map(|v| v.ln()).sum();
    let mut best_lambda = LAMBDA_GRID_MIN;
    let mut best_llf = f64::NEG_INFINITY;
    for i in 0..LAMBDA_GRID_POINTS {
        let lambda = LAMBDA_GRID_MIN + i as f64 * LAMBDA_GRID_STEP;
        // round off accumulated float error so lambda = 0 is hit exactly
        let lambda = (lambda * 100.0).round() / 100.0;
        let transformed: Vec<f64> = w.iter().map(|&v| box_cox(v, lambda)).collect();
        let mean = transformed.iter().sum::<f64>() / n;
        let var = transformed.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let llf = -0.5 * n * var.ln() + (lambda - 1.0) * log_sum;
        if llf > best_llf {
            best_llf = llf;
            best_lambda = lambda;
        }
    }
    best_lambda
}

/// Fits the whole chain on training targets.
pub fn fit_target_transform(y_train: &[f64]) -> Result<TargetTransform> {
    if y_train.len() < 2 {
        return Err(Error::InvalidParameter(
            "need at least 2 training targets".into(),
        ));
    }
    let (mean, std) = mean_and_sample_std(y_train);
    if !(std > 0.0) {
        return Err(Error::DegenerateTarget);
    }

    let z: Vec<f64> = y_train.iter().map(|v| (v - mean) / std).collect();
    let min_z = z.iter().cloned().fold(f64::INFINITY, f64::min);
    let shift = 1.0 - min_z;
    let w: Vec<f64> = z.iter().map(|v| v + shift).collect();
    let lambda = fit_boxcox_lambda(&w);

    let transformed: Vec<f64> = w.iter().map(|&v| box_cox(v, lambda)).collect();
    let (post_mean, post_std) = mean_and_sample_std(&transformed);
    if !(post_std > 0.0) {
        return Err(Error::DegenerateTarget);
    }

    Ok(TargetTransform {
        mean,
        std,
        shift,
        lambda,
        post_mean,
        post_std,
    })
}

impl TargetTransform {
    pub fn forward_one(&self, y: f64) -> f64 {
        let w = ((y - self.mean) / self.std + self.shift).max(POSITIVE_FLOOR);
        (box_cox(w, self.lambda) - self.post_mean) / self.post_std
    }

    pub fn inverse_one(&self, v: f64) -> Result<f64> {
        let bc = v * self.post_std + self.post_mean;
        let w = if self.lambda == 0.0 {
            bc.exp()
        } else {
            let inner = self.lambda * bc + 1.0;
            if inner <= 0.0 {
                return Err(Error::NonInvertible {
                    value: v,
                    lambda: self.lambda,
                });
            }
            inner.powf(1.0 / self.lambda)
        };
        Ok((w - self.shift) * self.std + self.mean)
    }
}

/// Applies the chain (or its exact algebraic inverse) elementwise.
pub fn transform_target(t: &TargetTransform, y: &[f64], direction: Direction) -> Result<Vec<f64>> {
    match direction {
        Direction::Forward => Ok(y.iter().map(|&v| t.forward_one(v)).collect()),
        Direction::Inverse => y.iter().map(|&v| t.inverse_one(v)).collect(),
    }
}
