//! Automatic feature construction for tabular regression: discretize the
//! target into S inferiority thresholds, train one binary random-forest
//! classifier per threshold, and append the predicted class probabilities to
//! the feature vector before handing it to an ordinary regressor. The crate
//! also ships the cross-validation harness and the statistics used to
//! benchmark regressors with and without the constructed features.

pub mod augment;
pub mod dataset;
pub mod discretizer;
pub mod error;
pub mod forest;
pub mod harness;
pub mod matrix;
pub mod regressors;
pub mod report;
pub mod seed;
pub mod stats;
pub mod target_transform;

pub use augment::{augment_features, fit_augmenter, Augmenter};
pub use dataset::{
    load_dataset, preprocess_features, ColumnKind, ColumnMeta, Dataset, LoadOptions, RawTable,
};
pub use discretizer::{compute_thresholds, encode_classes, BinaryLabels, ThresholdSet};
pub use error::{Error, Result};
pub use forest::{fit_forest_classifier, predict_class_probability, ForestModel, ForestParams};
pub use harness::{
    grid_search, kfold_split, prepare_fold, run_experiment, run_on_dataset, ExperimentConfig,
    ExperimentResult, FoldSplit, RunRecord, Standardizer, Variant,
};
pub use matrix::Matrix;
pub use regressors::{
    fit_regressor, predict_regressor, RegressorKind, RegressorModel, RegressorParams,
    RegressorSpec,
};
pub use stats::{
    friedman_mean_ranks, nemenyi_cd, paired_t_test, rmse, win_tie_loss, ComparisonCell, Outcome,
    RankSummary, WinTieLoss,
};
pub use target_transform::{fit_target_transform, transform_target, Direction, TargetTransform};
