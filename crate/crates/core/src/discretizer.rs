//! Equal-frequency threshold placement on the target scale, and the binary
//! "is the target at or below threshold i" class encoding built from it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Thresholds fitted on training targets.
///
/// The sorted training values are split into `requested_s + 1` bins of
/// near-equal size (the first `n mod (s+1)` bins take the remainder); each
/// threshold is the midpoint between the last value of a bin and the first
/// value of the next. Tied target values can collapse neighbouring midpoints;
/// duplicates are merged, so `effective_s() <= requested_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSet {
    pub thresholds: Vec<f64>,
    pub requested_s: usize,
}

impl ThresholdSet {
    pub fn effective_s(&self) -> usize {
        self.thresholds.len()
    }

    /// True when tied targets forced threshold merging.
    pub fn was_reduced(&self) -> bool {
        self.effective_s() < self.requested_s
    }
}

/// 0/1 label matrix, stored one column per threshold.
///
/// Column `i` holds `1` for rows whose target is at or below threshold `i`.
/// Because thresholds increase, every row is non-decreasing left to right.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryLabels {
    columns: Vec<Vec<u8>>,
    n_rows: usize,
}

impl BinaryLabels {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_thresholds(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, i: usize) -> &[u8] {
        &self.columns[i]
    }

    pub fn row(&self, r: usize) -> Vec<u8> {
        self.columns.iter().map(|c| c[r]).collect()
    }
}

/// Splits sorted training targets into `s + 1` equal-frequency bins and
/// returns the bin-boundary midpoints, deduplicated.
pub fn compute_thresholds(y_train: &[f64], s: usize) -> Result<ThresholdSet> {
    if s < 1 {
        return Err(Error::InvalidParameter(
            "threshold count s must be at least 1".into(),
        ));
    }
    let n = y_train.len();
    if n < s + 1 {
        return Err(Error::InvalidParameter(format!(
            "need at least s + 1 = {} training values, got {}",
            s + 1,
            n
        )));
    }

    let mut sorted = y_train.to_vec();
    sorted.sort_by(f64::total_cmp);

    let bins = s + 1;
    let base = n / bins;
    let remainder = n % bins;

    let mut thresholds: Vec<f64> = Vec::with_capacity(s);
    let mut boundary = 0usize; // rows consumed by the bins so far
    for bin in 0..s {
        boundary += base + usize::from(bin < remainder);
        let midpoint = (sorted[boundary - 1] + sorted[boundary]) / 2.0;
        if thresholds.last().is_none_or(|&last| midpoint > last) {
            thresholds.push(midpoint);
        }
    }

    let set = ThresholdSet {
        thresholds,
        requested_s: s,
    };
    if set.was_reduced() {
        log::warn!(
            "tied target values merged thresholds: requested {}, effective {}",
            set.requested_s,
            set.effective_s()
        );
    }
    Ok(set)
}

/// Encodes each value against every threshold: `labels[r][i] = 1` iff
/// `y[r] <= thresholds[i]`. Total on finite inputs.
pub fn encode_classes(y: &[f64], t: &ThresholdSet) -> BinaryLabels {
    let columns = t
        .thresholds
        .iter()
        .map(|&thr| y.iter().map(|&v| u8::from(v <= thr)).collect())
        .collect();
    BinaryLabels {
        columns,
        n_rows: y.len(),
    }
}
