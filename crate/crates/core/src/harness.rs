//! The experimental protocol: seeded k-fold cross-validation, per-fold
//! preprocessing with train-only statistics, a 70/30 grid-search split,
//! native-vs-augmented training and RMSE collection across S values.
//!
//! Leakage discipline: every fitted statistic (feature scaler, target
//! transform, thresholds, classifiers, tuned parameters) is computed from
//! training-fold rows only and then applied to both folds.

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{augment_features, fit_augmenter, Augmenter};
use crate::dataset::{load_dataset, preprocess_features, Dataset, LoadOptions};
use crate::error::{Error, Result};
use crate::forest::ForestParams;
use crate::matrix::Matrix;
use crate::regressors::{
    fit_regressor, predict_regressor, RegressorKind, RegressorParams, RegressorSpec,
};
use crate::seed::{derive_seed, rng_from_seed, streams};
use crate::stats::rmse;
use crate::target_transform::{fit_target_transform, TargetTransform};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub fold_index: usize,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// Seeded uniform permutation cut into k near-equal test blocks; train is
/// the complement. Test sizes differ by at most one.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<FoldSplit>> {
    if k < 2 {
        return Err(Error::InvalidParameter("fold count k must be >= 2".into()));
    }
    if n < k {
        return Err(Error::InvalidParameter(format!(
            "cannot split {n} rows into {k} folds"
        )));
    }
    let mut permutation: Vec<usize> = (0..n).collect();
    let mut rng = rng_from_seed(seed);
    use rand::Rng;
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        permutation.swap(i, j);
    }

    let base = n / k;
    let remainder = n % k;
    let mut splits = Vec::with_capacity(k);
    let mut start = 0usize;
    for fold_index in 0..k {
        let size = base + usize::from(fold_index < remainder);
        let mut test_indices: Vec<usize> = permutation[start..start + size].to_vec();
        start += size;
        test_indices.sort_unstable();
        let mut train_indices: Vec<usize> = Vec::with_capacity(n - size);
        let mut cursor = 0usize;
        for row in 0..n {
            if cursor < test_indices.len() && test_indices[cursor] == row {
                cursor += 1;
            } else {
                train_indices.push(row);
            }
        }
        splits.push(FoldSplit {
            fold_index,
            train_indices,
            test_indices,
        });
    }
    Ok(splits)
}

/// Per-column centering-reduction fitted on training rows and applied to
/// the whole matrix. Columns constant inside the fold pass through with a
/// unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix, train_rows: &[usize]) -> Self {
        let n = train_rows.len() as f64;
        let mut means = Vec::with_capacity(x.n_cols());
        let mut stds = Vec::with_capacity(x.n_cols());
        for j in 0..x.n_cols() {
            let mean = train_rows.iter().map(|&r| x.get(r, j)).sum::<f64>() / n;
            let var = train_rows
                .iter()
                .map(|&r| (x.get(r, j) - mean).powi(2))
                .sum::<f64>()
                / (n - 1.0).max(1.0);
            let std = var.sqrt();
            means.push(mean);
            stds.push(if std > 0.0 && std.is_finite() { std } else { 1.0 });
        }
        Standardizer { means, stds }
    }

    pub fn apply(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.n_rows(), x.n_cols());
        for r in 0..x.n_rows() {
            for j in 0..x.n_cols() {
                out.set(r, j, (x.get(r, j) - self.means[j]) / self.stds[j]);
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dataset_path: PathBuf,
    pub target: String,
    /// Name used in result records; defaults to the file stem.
    pub dataset_name: Option<String>,
    pub load: LoadOptions,
    /// Threshold counts to sweep; non-empty and ascending.
    pub s_values: Vec<usize>,
    pub regressors: Vec<RegressorSpec>,
    /// Fold count.
    pub k: usize,
    pub seed: u64,
    /// Threshold-classifier hyperparameters.
    pub forest: ForestParams,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.s_values.is_empty() {
            return Err(Error::InvalidConfig("s_values must be non-empty".into()));
        }
        if self.s_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "s_values must be strictly ascending".into(),
            ));
        }
        if self.k < 2 {
            return Err(Error::InvalidConfig("fold count k must be >= 2".into()));
        }
        if self.regressors.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one regressor is required".into(),
            ));
        }
        for spec in &self.regressors {
            spec.validate()?;
        }
        Ok(())
    }

    pub fn resolved_dataset_name(&self) -> String {
        self.dataset_name.clone().unwrap_or_else(|| {
            self.dataset_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".to_string())
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Native,
    Augmented,
}

/// One (fold x regressor x variant x S) measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset: String,
    pub fold: usize,
    pub regressor: RegressorKind,
    pub variant: Variant,
    /// Threshold count; `None` for the native variant.
    pub s: Option<usize>,
    pub train_rmse: f64,
    pub test_rmse: f64,
    pub chosen_params: RegressorParams,
    /// Not serialized: records files must be byte-identical across runs.
    #[serde(skip)]
    pub wall_time_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellError {
    pub fold: usize,
    pub regressor: Option<RegressorKind>,
    pub s: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentResult {
    pub dataset: String,
    pub records: Vec<RunRecord>,
    pub errors: Vec<CellError>,
}

/// Everything fitted on one training fold.
#[derive(Debug, Clone)]
pub struct FoldContext {
    pub split: FoldSplit,
    pub standardizer: Standardizer,
    pub target_transform: TargetTransform,
    /// One augmenter per configured S value.
    pub augmenters: Vec<Augmenter>,
    /// All rows, standardized with training statistics.
    pub x_standardized: Matrix,
    /// All targets, transformed with training statistics.
    pub y_transformed: Vec<f64>,
    /// `[X | X']` over all rows, one matrix per S value.
    pub augmented: Vec<Matrix>,
}

/// Fits the per-fold preprocessing stack. Consumes training-fold rows only;
/// test rows are merely transformed.
pub fn prepare_fold(
    dataset: &Dataset,
    split: &FoldSplit,
    s_values: &[usize],
    forest_params: &ForestParams,
    seed: u64,
) -> Result<FoldContext> {
    let standardizer = Standardizer::fit(&dataset.features, &split.train_indices);
    let x_standardized = standardizer.apply(&dataset.features);

    let y_train: Vec<f64> = split
        .train_indices
        .iter()
        .map(|&r| dataset.target[r])
        .collect();
    let target_transform = fit_target_transform(&y_train)?;
    let y_transformed: Vec<f64> = dataset
        .target
        .iter()
        .map(|&v| target_transform.forward_one(v))
        .collect();

    let x_train = x_standardized.select_rows(&split.train_indices);
    let y_train_t: Vec<f64> = split
        .train_indices
        .iter()
        .map(|&r| y_transformed[r])
        .collect();

    let mut augmenters = Vec::with_capacity(s_values.len());
    let mut augmented = Vec::with_capacity(s_values.len());
    for &s in s_values {
        let augmenter = fit_augmenter(
            &x_train,
            &y_train_t,
            s,
            forest_params,
            derive_seed(seed, &[streams::AUGMENTER, split.fold_index as u64, s as u64]),
        )?;
        augmented.push(augment_features(&augmenter, &x_standardized)?);
        augmenters.push(augmenter);
    }

    Ok(FoldContext {
        split: split.clone(),
        standardizer,
        target_transform,
        augmenters,
        x_standardized,
        y_transformed,
        augmented,
    })
}

/// Splits training-fold indices into a 70% fit part and a 30% validation
/// part, seeded so the split is identical for every regressor in the fold.
pub fn tuning_split(train_indices: &[usize], seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut shuffled = train_indices.to_vec();
    let mut rng = rng_from_seed(seed);
    use rand::Rng;
    for i in (1..shuffled.len()).rev() {
        let j = rng.random_range(0..=i);
        shuffled.swap(i, j);
    }
    let n_val = shuffled.len() * 3 / 10;
    let split_at = shuffled.len() - n_val;
    let mut fit_part = shuffled[..split_at].to_vec();
    let mut val_part = shuffled[split_at..].to_vec();
    fit_part.sort_unstable();
    val_part.sort_unstable();
    (fit_part, val_part)
}

/// Returns the grid point with the lowest validation RMSE (ties go to the
/// first in grid order). Non-tunable kinds pass their base params through.
pub fn grid_search(
    spec: &RegressorSpec,
    x_train70: &Matrix,
    y_train70: &[f64],
    x_val30: &Matrix,
    y_val30: &[f64],
) -> Result<RegressorParams> {
    if !spec.kind.requires_tuning() {
        return Ok(spec.params.clone());
    }
    if spec.grid.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "regressor kind {:?} requires a non-empty tuning grid",
            spec.kind
        )));
    }
    let mut best: Option<(f64, &RegressorParams)> = None;
    for candidate in &spec.grid {
        let fit_spec = RegressorSpec {
            kind: spec.kind,
            params: candidate.clone(),
            grid: spec.grid.clone(),
        };
        let model = fit_regressor(&fit_spec, x_train70, y_train70)?;
        let error = rmse(y_val30, &predict_regressor(&model, x_val30)?)?;
        if best.is_none_or(|(current, _)| error < current) {
            best = Some((error, candidate));
        }
    }
    Ok(best.expect("non-empty grid").1.clone())
}

struct VariantData {
    variant: Variant,
    s: Option<usize>,
    x_train70: Matrix,
    x_val30: Matrix,
    x_test: Matrix,
}

fn run_fold(
    dataset: &Dataset,
    dataset_name: &str,
    split: &FoldSplit,
    config: &ExperimentConfig,
) -> (Vec<RunRecord>, Vec<CellError>) {
    let fold = split.fold_index;
    let context = match prepare_fold(dataset, split, &config.s_values, &config.forest, config.seed)
    {
        Ok(ctx) => ctx,
        Err(e) => {
            return (
                Vec::new(),
                vec![CellError {
                    fold,
                    regressor: None,
                    s: None,
                    message: format!("fold preprocessing failed: {e}"),
                }],
            );
        }
    };

    let (train70, val30) = tuning_split(
        &split.train_indices,
        derive_seed(config.seed, &[streams::TUNING_SPLIT, fold as u64]),
    );
    if train70.len() < 2 || val30.is_empty() {
        return (
            Vec::new(),
            vec![CellError {
                fold,
                regressor: None,
                s: None,
                message: "training fold too small for a 70/30 tuning split".into(),
            }],
        );
    }

    let y70: Vec<f64> = train70.iter().map(|&r| context.y_transformed[r]).collect();
    let y30: Vec<f64> = val30.iter().map(|&r| context.y_transformed[r]).collect();
    let y_test: Vec<f64> = split
        .test_indices
        .iter()
        .map(|&r| context.y_transformed[r])
        .collect();

    let mut variants = Vec::with_capacity(1 + config.s_values.len());
    variants.push(VariantData {
        variant: Variant::Native,
        s: None,
        x_train70: context.x_standardized.select_rows(&train70),
        x_val30: context.x_standardized.select_rows(&val30),
        x_test: context.x_standardized.select_rows(&split.test_indices),
    });
    for (i, &s) in config.s_values.iter().enumerate() {
        variants.push(VariantData {
            variant: Variant::Augmented,
            s: Some(s),
            x_train70: context.augmented[i].select_rows(&train70),
            x_val30: context.augmented[i].select_rows(&val30),
            x_test: context.augmented[i].select_rows(&split.test_indices),
        });
    }

    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (spec_index, spec) in config.regressors.iter().enumerate() {
        for data in &variants {
            let started = Instant::now();
            let cell_seed = derive_seed(
                config.seed,
                &[
                    streams::REGRESSOR,
                    fold as u64,
                    spec_index as u64,
                    data.s.map_or(u64::MAX, |s| s as u64),
                ],
            );
            let result = (|| -> Result<RunRecord> {
                let seeded_spec = RegressorSpec {
                    kind: spec.kind,
                    params: spec.params.with_seed(cell_seed),
                    grid: spec.grid.iter().map(|g| g.with_seed(cell_seed)).collect(),
                };
                let chosen =
                    grid_search(&seeded_spec, &data.x_train70, &y70, &data.x_val30, &y30)?;
                let fit_spec = RegressorSpec {
                    kind: spec.kind,
                    params: chosen.clone(),
                    grid: seeded_spec.grid.clone(),
                };
                let model = fit_regressor(&fit_spec, &data.x_train70, &y70)?;
                let train_rmse = rmse(&y70, &predict_regressor(&model, &data.x_train70)?)?;
                let test_rmse = rmse(&y_test, &predict_regressor(&model, &data.x_test)?)?;
                Ok(RunRecord {
                    dataset: dataset_name.to_string(),
                    fold,
                    regressor: spec.kind,
                    variant: data.variant,
                    s: data.s,
                    train_rmse,
                    test_rmse,
                    chosen_params: chosen,
                    wall_time_ms: started.elapsed().as_millis() as u64,
                })
            })();
            match result {
                Ok(record) => records.push(record),
                Err(e) => errors.push(CellError {
                    fold,
                    regressor: Some(spec.kind),
                    s: data.s,
                    message: e.to_string(),
                }),
            }
        }
    }
    (records, errors)
}

/// Runs the full protocol on an already-preprocessed dataset.
///
/// Folds execute in parallel; record order and content are identical to a
/// sequential run (all seeds are index-derived, collection is ordered).
pub fn run_on_dataset(
    dataset: &Dataset,
    dataset_name: &str,
    config: &ExperimentConfig,
) -> Result<ExperimentResult> {
    config.validate()?;
    let splits = kfold_split(dataset.n(), config.k, config.seed)?;
    let fold_outputs: Vec<(Vec<RunRecord>, Vec<CellError>)> = splits
        .par_iter()
        .map(|split| run_fold(dataset, dataset_name, split, config))
        .collect();

    let mut result = ExperimentResult {
        dataset: dataset_name.to_string(),
        ..Default::default()
    };
    for (records, errors) in fold_outputs {
        result.records.extend(records);
        result.errors.extend(errors);
    }
    for error in &result.errors {
        log::warn!(
            "fold {} regressor {:?} s {:?}: {}",
            error.fold,
            error.regressor,
            error.s,
            error.message
        );
    }
    Ok(result)
}

/// Loads, preprocesses and runs the configured experiment.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let raw = load_dataset(&config.dataset_path, &config.target, &config.load)?;
    if raw.dropped_rows > 0 {
        log::info!("dropped {} rows with missing values", raw.dropped_rows);
    }
    let dataset = preprocess_features(&raw, &config.target)?;
    run_on_dataset(&dataset, &config.resolved_dataset_name(), config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regressors::TreeParams;
    use proptest::prelude::*;
    use rand::Rng;

    fn synthetic_dataset(seed: u64, n: usize) -> Dataset {
        let mut rng = rng_from_seed(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.random_range(-1.0f64..1.0), rng.random_range(-1.0f64..1.0)])
            .collect();
        let target: Vec<f64> = rows
            .iter()
            .map(|r| (3.0 * r[0]).sin() + r[1] * r[1] + 0.05 * rng.random_range(-1.0f64..1.0))
            .collect();
        Dataset {
            features: Matrix::from_rows(&rows).unwrap(),
            target,
            feature_names: vec!["x1".into(), "x2".into()],
        }
    }

    fn linear_only_config(s_values: Vec<usize>, k: usize, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            dataset_path: PathBuf::from("unused"),
            target: "y".into(),
            dataset_name: Some("synthetic".into()),
            load: LoadOptions::default(),
            s_values,
            regressors: vec![RegressorSpec::with_default_grid(RegressorKind::Linear)],
            k,
            seed,
            forest: ForestParams {
                n_trees: 25,
                ..ForestParams::default()
            },
            output_dir: None,
        }
    }

    #[test]
    fn kfold_examples() {
        let splits = kfold_split(10, 10, 1).unwrap();
        assert_eq!(splits.len(), 10);
        assert!(splits.iter().all(|s| s.test_indices.len() == 1));
        assert!(kfold_split(9, 10, 1).is_err());
        assert!(kfold_split(10, 1, 1).is_err());
    }

    proptest! {
        #[test]
        fn kfold_test_blocks_partition_everything(
            n in 5usize..80,
            k in 2usize..6,
            seed in 0u64..16,
        ) {
            prop_assume!(n >= k);
            let splits = kfold_split(n, k, seed).unwrap();
            let mut seen = vec![false; n];
            let mut sizes = Vec::new();
            for split in &splits {
                sizes.push(split.test_indices.len());
                for &t in &split.test_indices {
                    prop_assert!(!seen[t], "row {} in two test blocks", t);
                    seen[t] = true;
                }
                // train is the exact complement
                let mut all: Vec<usize> = split
                    .train_indices
                    .iter()
                    .chain(split.test_indices.iter())
                    .copied()
                    .collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            }
            prop_assert!(seen.into_iter().all(|s| s));
            let lo = *sizes.iter().min().unwrap();
            let hi = *sizes.iter().max().unwrap();
            prop_assert!(hi - lo <= 1);
        }
    }

    #[test]
    fn standardizer_uses_training_rows_only() {
        let x = Matrix::from_rows(&[vec![0.0], vec![2.0], vec![100.0]]).unwrap();
        let scaler = Standardizer::fit(&x, &[0, 1]);
        assert_eq!(scaler.means, vec![1.0]);
        let out = scaler.apply(&x);
        // mean 1, sample std sqrt(2)
        let sd = 2.0f64.sqrt();
        assert!((out.get(0, 0) - (-1.0 / sd)).abs() < 1e-12);
        assert!((out.get(2, 0) - (99.0 / sd)).abs() < 1e-12);
    }

    #[test]
    fn constant_fold_column_passes_through() {
        let x = Matrix::from_rows(&[vec![5.0], vec![5.0], vec![7.0]]).unwrap();
        let scaler = Standardizer::fit(&x, &[0, 1]);
        assert_eq!(scaler.stds, vec![1.0]);
        let out = scaler.apply(&x);
        assert_eq!(out.get(2, 0), 2.0);
    }

    #[test]
    fn tuning_split_is_deterministic_and_sized() {
        let train: Vec<usize> = (0..100).collect();
        let (fit_a, val_a) = tuning_split(&train, 9);
        let (fit_b, val_b) = tuning_split(&train, 9);
        assert_eq!(fit_a, fit_b);
        assert_eq!(val_a, val_b);
        assert_eq!(val_a.len(), 30);
        assert_eq!(fit_a.len(), 70);
        let mut all: Vec<usize> = fit_a.iter().chain(val_a.iter()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, train);
    }

    #[test]
    fn grid_search_single_point_returns_it() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let y = vec![0.0, 1.0, 2.0, 3.0];
        let spec = RegressorSpec {
            kind: RegressorKind::Tree,
            params: RegressorParams::Tree(TreeParams {
                max_depth: Some(2),
                min_leaf: 1,
            }),
            grid: vec![RegressorParams::Tree(TreeParams {
                max_depth: Some(2),
                min_leaf: 1,
            })],
        };
        let chosen = grid_search(&spec, &x, &y, &x, &y).unwrap();
        assert_eq!(chosen, spec.grid[0]);
    }

    #[test]
    fn grid_search_prefers_the_better_depth() {
        // nonlinear target: a depth-0 stump cannot match an unlimited tree
        let mut rng = rng_from_seed(3);
        let values: Vec<f64> = (0..200).map(|_| rng.random_range(-2.0f64..2.0)).collect();
        let y: Vec<f64> = values.iter().map(|v| v.signum() * v * v).collect();
        let x = Matrix::from_rows(&values.iter().map(|&v| vec![v]).collect::<Vec<_>>()).unwrap();
        let x_val = Matrix::from_rows(
            &(0..50)
                .map(|i| vec![-2.0 + i as f64 * 0.08])
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let y_val: Vec<f64> = (0..50)
            .map(|i| {
                let v: f64 = -2.0 + i as f64 * 0.08;
                v.signum() * v * v
            })
            .collect();
        let stump = RegressorParams::Tree(TreeParams {
            max_depth: Some(0),
            min_leaf: 1,
        });
        let deep = RegressorParams::Tree(TreeParams {
            max_depth: None,
            min_leaf: 1,
        });
        let spec = RegressorSpec {
            kind: RegressorKind::Tree,
            params: stump.clone(),
            grid: vec![stump, deep.clone()],
        };
        let chosen = grid_search(&spec, &x, &y, &x_val, &y_val).unwrap();
        assert_eq!(chosen, deep);
    }

    #[test]
    fn grid_search_passes_linear_through() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let spec = RegressorSpec::with_default_grid(RegressorKind::Linear);
        let chosen = grid_search(&spec, &x, &[0.0, 1.0], &x, &[0.0, 1.0]).unwrap();
        assert_eq!(chosen, RegressorParams::Linear);
    }

    #[test]
    fn record_count_matches_contract() {
        let dataset = synthetic_dataset(5, 120);
        let config = linear_only_config(vec![2], 5, 11);
        let result = run_on_dataset(&dataset, "synthetic", &config).unwrap();
        assert!(result.errors.is_empty());
        // k x |regressors| x (1 + |s_values|)
        assert_eq!(result.records.len(), 5 * 1 * 2);
        for s in &config.s_values {
            assert!(result
                .records
                .iter()
                .any(|r| r.s == Some(*s) && r.variant == Variant::Augmented));
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let dataset = synthetic_dataset(6, 100);
        let config = linear_only_config(vec![2, 4], 4, 3);
        let a = run_on_dataset(&dataset, "synthetic", &config).unwrap();
        let b = run_on_dataset(&dataset, "synthetic", &config).unwrap();
        assert_eq!(a.records, b.records);
        // byte-level: identical serialization
        let ja = serde_json::to_string(&a.records).unwrap();
        let jb = serde_json::to_string(&b.records).unwrap();
        assert_eq!(ja, jb);
    }

    #[test]
    fn augmentation_helps_linear_regression_on_nonlinear_data() {
        let dataset = synthetic_dataset(7, 400);
        let config = linear_only_config(vec![8], 5, 1);
        let result = run_on_dataset(&dataset, "synthetic", &config).unwrap();
        let native: f64 = result
            .records
            .iter()
            .filter(|r| r.variant == Variant::Native)
            .map(|r| r.test_rmse)
            .sum::<f64>()
            / 5.0;
        let augmented: f64 = result
            .records
            .iter()
            .filter(|r| r.variant == Variant::Augmented)
            .map(|r| r.test_rmse)
            .sum::<f64>()
            / 5.0;
        assert!(
            augmented < native,
            "augmented {augmented} should beat native {native}"
        );
    }

    #[test]
    fn fitted_state_ignores_test_fold_targets() {
        // overwrite test-fold targets with junk: every fitted parameter and
        // every augmented test feature must be bit-identical
        let dataset = synthetic_dataset(8, 150);
        let splits = kfold_split(dataset.n(), 5, 42).unwrap();
        let split = &splits[0];
        let params = ForestParams {
            n_trees: 20,
            ..ForestParams::default()
        };

        let baseline = prepare_fold(&dataset, split, &[2, 4], &params, 9).unwrap();

        let mut mutated = dataset.clone();
        let mut rng = rng_from_seed(1234);
        for &t in &split.test_indices {
            mutated.target[t] = rng.random_range(-100.0f64..100.0);
        }
        let refit = prepare_fold(&mutated, split, &[2, 4], &params, 9).unwrap();

        assert_eq!(baseline.standardizer, refit.standardizer);
        assert_eq!(baseline.target_transform, refit.target_transform);
        assert_eq!(baseline.augmenters.len(), refit.augmenters.len());
        for (a, b) in baseline.augmenters.iter().zip(&refit.augmenters) {
            assert_eq!(a, b);
        }
        for (a, b) in baseline.augmented.iter().zip(&refit.augmented) {
            for &t in &split.test_indices {
                for j in 0..a.n_cols() {
                    assert_eq!(a.get(t, j).to_bits(), b.get(t, j).to_bits());
                }
            }
        }
    }

    #[test]
    fn per_fold_failures_do_not_abort_the_run() {
        // a constant target makes every fold's transform degenerate
        let dataset = Dataset {
            features: Matrix::from_rows(
                &(0..30).map(|i| vec![i as f64]).collect::<Vec<_>>(),
            )
            .unwrap(),
            target: vec![5.0; 30],
            feature_names: vec!["x".into()],
        };
        let config = linear_only_config(vec![2], 3, 1);
        let result = run_on_dataset(&dataset, "constant", &config).unwrap();
        assert!(result.records.is_empty());
        assert_eq!(result.errors.len(), 3);
    }

    #[test]
    fn config_validation_rejects_bad_shapes() {
        let mut config = linear_only_config(vec![], 5, 1);
        assert!(config.validate().is_err());
        config.s_values = vec![4, 2];
        assert!(config.validate().is_err());
        config.s_values = vec![2, 4];
        config.k = 1;
        assert!(config.validate().is_err());
        config.k = 5;
        config.regressors.clear();
        assert!(config.validate().is_err());
    }
}
