//! The feature constructor: S threshold classifiers fitted on a training
//! fold, whose predicted class-1 probabilities extend any feature matrix
//! with S extra columns.

use std::io::Write;

use rayon::prelude::*;

use crate::discretizer::{compute_thresholds, encode_classes, ThresholdSet};
use crate::error::{Error, Result};
use crate::forest::{fit_forest_classifier, ForestModel, ForestParams};
use crate::matrix::Matrix;

/// A fitted bundle of thresholds plus one binary classifier per threshold.
///
/// `transform` never consults target values; everything target-dependent
/// happened at fit time, on the training fold only.
#[derive(Debug, Clone, PartialEq)]
pub struct Augmenter {
    pub threshold_set: ThresholdSet,
    pub classifiers: Vec<ForestModel>,
    pub fitted_d: usize,
}

/// Fits thresholds on the transformed training target, encodes the
/// inferiority classes and trains classifier `i` with seed `seed + i`.
pub fn fit_augmenter(
    x_train: &Matrix,
    y_train_transformed: &[f64],
    s: usize,
    forest_params: &ForestParams,
    seed: u64,
) -> Result<Augmenter> {
    if x_train.n_rows() != y_train_transformed.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} feature rows vs {} targets",
            x_train.n_rows(),
            y_train_transformed.len()
        )));
    }
    let threshold_set = compute_thresholds(y_train_transformed, s)?;
    let labels = encode_classes(y_train_transformed, &threshold_set);

    let classifiers: Vec<ForestModel> = (0..threshold_set.effective_s())
        .into_par_iter()
        .map(|i| {
            fit_forest_classifier(
                x_train,
                labels.column(i),
                forest_params,
                seed.wrapping_add(i as u64),
            )
        })
        .collect::<Result<_>>()?;

    Ok(Augmenter {
        threshold_set,
        classifiers,
        fitted_d: x_train.n_cols(),
    })
}

impl Augmenter {
    pub fn effective_s(&self) -> usize {
        self.classifiers.len()
    }

    /// The probability block X' alone, shape `n x effective_s`.
    pub fn probability_features(&self, x: &Matrix) -> Result<Matrix> {
        if x.n_cols() != self.fitted_d {
            return Err(Error::DimensionMismatch(format!(
                "augmenter was fitted on {} columns, got {}",
                self.fitted_d,
                x.n_cols()
            )));
        }
        let n = x.n_rows();
        let mut block = Matrix::zeros(n, self.effective_s());
        for (i, classifier) in self.classifiers.iter().enumerate() {
            let probabilities = classifier.predict_class_probability(x)?;
            for (r, p) in probabilities.into_iter().enumerate() {
                block.set(r, i, p);
            }
        }
        Ok(block)
    }
}

/// The extended matrix `[X | X']`; original columns unmodified and first.
pub fn augment_features(augmenter: &Augmenter, x: &Matrix) -> Result<Matrix> {
    let block = augmenter.probability_features(x)?;
    x.hstack(&block)
}

/// Dumps X' (optionally preceded by the original columns) as delimited text.
/// Probability columns are named `X_prime_1 ... X_prime_S`.
pub fn write_features_csv<W: Write>(
    out: &mut W,
    augmenter: &Augmenter,
    x: &Matrix,
    include_original: bool,
) -> Result<()> {
    let io_err = |e: std::io::Error| Error::Serialization(e.to_string());
    let block = augmenter.probability_features(x)?;

    let mut header: Vec<String> = Vec::new();
    if include_original {
        header.extend((1..=x.n_cols()).map(|j| format!("x_{j}")));
    }
    header.extend((1..=block.n_cols()).map(|j| format!("X_prime_{j}")));
    writeln!(out, "{}", header.join(",")).map_err(io_err)?;

    for r in 0..x.n_rows() {
        let mut fields: Vec<String> = Vec::new();
        if include_original {
            fields.extend(x.row(r).iter().map(|v| v.to_string()));
        }
        fields.extend(block.row(r).iter().map(|v| v.to_string()));
        writeln!(out, "{}", fields.join(",")).map_err(io_err)?;
    }
    Ok(())
}
