//! Downstream regressor suite: ordinary least squares, a CART regression
//! tree, a bagged random-forest regressor and squared-loss gradient-boosted
//! trees. All tree variants share one variance-reduction split search.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressorKind {
    Linear,
    Tree,
    RandomForest,
    Gbt,
}

impl RegressorKind {
    pub fn requires_tuning(self) -> bool {
        !matches!(self, RegressorKind::Linear)
    }

    pub fn label(self) -> &'static str {
        match self {
            RegressorKind::Linear => "linear",
            RegressorKind::Tree => "tree",
            RegressorKind::RandomForest => "random_forest",
            RegressorKind::Gbt => "gbt",
        }
    }
}

/// How many features a random-forest regressor considers per split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubsample {
    Sqrt,
    Third,
    All,
}

impl FeatureSubsample {
    pub fn resolve(self, d: usize) -> usize {
        match self {
            FeatureSubsample::Sqrt => ((d as f64).sqrt().floor() as usize).max(1),
            FeatureSubsample::Third => (d / 3).max(1),
            FeatureSubsample::All => d.max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub features_per_split: FeatureSubsample,
    /// Injected by the harness; grids leave it at 0.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub learning_rate: f64,
    pub n_stages: usize,
    pub max_depth: Option<usize>,
}

/// Kind-tagged parameter set for one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegressorParams {
    Linear,
    Tree(TreeParams),
    RandomForest(RandomForestParams),
    Gbt(GbtParams),
}

impl RegressorParams {
    pub fn kind(&self) -> RegressorKind {
        match self {
            RegressorParams::Linear => RegressorKind::Linear,
            RegressorParams::Tree(_) => RegressorKind::Tree,
            RegressorParams::RandomForest(_) => RegressorKind::RandomForest,
            RegressorParams::Gbt(_) => RegressorKind::Gbt,
        }
    }

    /// Returns a copy with the forest seed replaced; other kinds are
    /// returned unchanged (they are deterministic already).
    pub fn with_seed(&self, seed: u64) -> RegressorParams {
        match self {
            RegressorParams::RandomForest(p) => {
                RegressorParams::RandomForest(RandomForestParams { seed, ..*p })
            }
            other => other.clone(),
        }
    }
}

/// A regressor kind plus its base parameters and tuning grid.
///
/// Tunable kinds must carry a non-empty grid; `linear` carries none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorSpec {
    pub kind: RegressorKind,
    pub params: RegressorParams,
    pub grid: Vec<RegressorParams>,
}

impl RegressorSpec {
    /// Spec with the built-in tuning grid for the kind.
    pub fn with_default_grid(kind: RegressorKind) -> Self {
        let grid = default_grid(kind);
        let params = grid
            .first()
            .cloned()
            .unwrap_or(RegressorParams::Linear);
        RegressorSpec { kind, params, grid }
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.kind() != self.kind {
            return Err(Error::InvalidParameter(format!(
                "params kind {:?} does not match spec kind {:?}",
                self.params.kind(),
                self.kind
            )));
        }
        if self.kind.requires_tuning() && self.grid.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "regressor kind {:?} requires a non-empty tuning grid",
                self.kind
            )));
        }
        for g in &self.grid {
            if g.kind() != self.kind {
                return Err(Error::InvalidParameter(format!(
                    "grid entry kind {:?} does not match spec kind {:?}",
                    g.kind(),
                    self.kind
                )));
            }
        }
        Ok(())
    }
}

/// Built-in grids.
pub fn default_grid(kind: RegressorKind) -> Vec<RegressorParams> {
    match kind {
        RegressorKind::Linear => Vec::new(),
        RegressorKind::Tree => {
            let mut grid = Vec::new();
            for max_depth in [Some(4), Some(8), Some(16), None] {
                for min_leaf in [1, 5, 20] {
                    grid.push(RegressorParams::Tree(TreeParams {
                        max_depth,
                        min_leaf,
                    }));
                }
            }
            grid
        }
        RegressorKind::RandomForest => {
            let mut grid = Vec::new();
            for max_depth in [Some(8), Some(16), None] {
                for features_per_split in [
                    FeatureSubsample::Sqrt,
                    FeatureSubsample::Third,
                    FeatureSubsample::All,
                ] {
                    grid.push(RegressorParams::RandomForest(RandomForestParams {
                        n_trees: 100,
                        max_depth,
                        features_per_split,
                        seed: 0,
                    }));
                }
            }
            grid
        }
        RegressorKind::Gbt => {
            let mut grid = Vec::new();
            for learning_rate in [0.05, 0.1, 0.3] {
                for n_stages in [100, 300] {
                    for max_depth in [Some(3), Some(6)] {
                        grid.push(RegressorParams::Gbt(GbtParams {
                            learning_rate,
                            n_stages,
                            max_depth,
                        }));
                    }
                }
            }
            grid
        }
    }
}

// ---------------------------------------------------------------------------
// Regression tree shared by the tree, forest and boosting regressors.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RegressionTreeNode {
    Internal {
        feature_index: usize,
        split_value: f64,
        left: Box<RegressionTreeNode>,
        right: Box<RegressionTreeNode>,
    },
    Leaf {
        value: f64,
    },
}

impl RegressionTreeNode {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                RegressionTreeNode::Leaf { value } => return *value,
                RegressionTreeNode::Internal {
                    feature_index,
                    split_value,
                    left,
                    right,
                } => {
                    node = if row[*feature_index] <= *split_value {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }
}

struct RegressionTreeBuilder<'a> {
    columns: &'a [Vec<f64>],
    targets: &'a [f64],
    max_depth: Option<usize>,
    min_leaf: usize,
    feature_subsample: usize,
    rng: Option<ChaCha8Rng>,
    feature_pool: Vec<usize>,
}

impl RegressionTreeBuilder<'_> {
    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.feature_pool.len();
        let k = self.feature_subsample.min(d);
        match self.rng.as_mut() {
            None => (0..d).collect(),
            Some(rng) => {
                for i in 0..k {
                    let j = rng.random_range(i..d);
                    self.feature_pool.swap(i, j);
                }
                let mut picked = self.feature_pool[..k].to_vec();
                picked.sort_unstable();
                picked
            }
        }
    }

    /// Best split minimizing `left SSE + right SSE`, i.e. maximizing variance
    /// reduction against the parent. Requires a strict reduction.
    fn best_split(&mut self, rows: &[usize]) -> Option<(usize, f64, f64)> {
        let n = rows.len();
        let total_sum: f64 = rows.iter().map(|&r| self.targets[r]).sum();
        let total_sum2: f64 = rows.iter().map(|&r| self.targets[r] * self.targets[r]).sum();
        let parent_sse = (total_sum2 - total_sum * total_sum / n as f64).max(0.0);
        if parent_sse == 0.0 {
            return None;
        }

        let mut best: Option<(usize, f64, f64)> = None;
        for feature in self.candidate_features() {
            let column = &self.columns[feature];
            let mut ordered: Vec<(f64, f64)> = rows
                .iter()
                .map(|&r| (column[r], self.targets[r]))
                .collect();
            ordered.sort_by(|a, b| a.0.total_cmp(&b.0));

            let mut left_sum = 0.0;
            let mut left_sum2 = 0.0;
            for i in 0..n - 1 {
                left_sum += ordered[i].1;
                left_sum2 += ordered[i].1 * ordered[i].1;
                if ordered[i].0 == ordered[i + 1].0 {
                    continue;
                }
                let left_n = i + 1;
                let right_n = n - left_n;
                if left_n < self.min_leaf || right_n < self.min_leaf {
                    continue;
                }
                let right_sum = total_sum - left_sum;
                let right_sum2 = total_sum2 - left_sum2;
                let left_sse = (left_sum2 - left_sum * left_sum / left_n as f64).max(0.0);
                let right_sse = (right_sum2 - right_sum * right_sum / right_n as f64).max(0.0);
                let children_sse = left_sse + right_sse;
                if children_sse < parent_sse
                    && best.is_none_or(|(_, _, b)| children_sse < b)
                {
                    best = Some((
                        feature,
                        (ordered[i].0 + ordered[i + 1].0) / 2.0,
                        children_sse,
                    ));
                }
            }
        }
        best
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize) -> RegressionTreeNode {
        let mean = rows.iter().map(|&r| self.targets[r]).sum::<f64>() / rows.len() as f64;
        let depth_reached = self.max_depth.is_some_and(|d| depth >= d);
        if depth_reached || rows.len() < 2 * self.min_leaf {
            return RegressionTreeNode::Leaf { value: mean };
        }
        let Some((feature, split_value, _)) = self.best_split(&rows) else {
            return RegressionTreeNode::Leaf { value: mean };
        };
        let column = &self.columns[feature];
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&r| column[r] <= split_value);
        let left = self.build(left_rows, depth + 1);
        let right = self.build(right_rows, depth + 1);
        RegressionTreeNode::Internal {
            feature_index: feature,
            split_value,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

fn fit_regression_tree(
    columns: &[Vec<f64>],
    rows: Vec<usize>,
    targets: &[f64],
    max_depth: Option<usize>,
    min_leaf: usize,
    feature_subsample: usize,
    rng: Option<ChaCha8Rng>,
) -> RegressionTreeNode {
    let mut builder = RegressionTreeBuilder {
        columns,
        targets,
        max_depth,
        min_leaf: min_leaf.max(1),
        feature_subsample,
        rng,
        feature_pool: (0..columns.len()).collect(),
    };
    builder.build(rows, 0)
}

// ---------------------------------------------------------------------------
// Fitted models
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RegressorModel {
    Linear {
        coefficients: Vec<f64>,
        intercept: f64,
    },
    Tree(RegressionTreeNode),
    RandomForest {
        trees: Vec<RegressionTreeNode>,
    },
    Gbt {
        base: f64,
        learning_rate: f64,
        stages: Vec<RegressionTreeNode>,
    },
}

impl RegressorModel {
    pub fn n_features(&self) -> Option<usize> {
        match self {
            RegressorModel::Linear { coefficients, .. } => Some(coefficients.len()),
            _ => None,
        }
    }
}

/// Least squares through an SVD: numerically stable, and rank-deficient
/// designs get the minimum-norm solution instead of failing (augmented
/// probability columns can be near-collinear).
fn fit_linear(x: &Matrix, y: &[f64]) -> Result<RegressorModel> {
    let n = x.n_rows();
    let d = x.n_cols();
    // intercept column appended last
    let design = DMatrix::from_fn(n, d + 1, |i, j| if j < d { x.get(i, j) } else { 1.0 });
    let rhs = DVector::from_column_slice(y);
    let svd = design.svd(true, true);
    let eps = svd.singular_values.max() * (n.max(d + 1) as f64) * f64::EPSILON;
    let solution = svd
        .solve(&rhs, eps)
        .map_err(|e| Error::InvalidParameter(format!("svd solve failed: {e}")))?;
    Ok(RegressorModel::Linear {
        coefficients: solution.as_slice()[..d].to_vec(),
        intercept: solution[d],
    })
}

/// Fits `spec.params` on `(x, y)`.
pub fn fit_regressor(spec: &RegressorSpec, x: &Matrix, y: &[f64]) -> Result<RegressorModel> {
    if x.n_rows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} rows vs {} targets",
            x.n_rows(),
            y.len()
        )));
    }
    if x.n_rows() < 2 {
        return Err(Error::InvalidParameter(
            "need at least 2 training rows".into(),
        ));
    }
    spec.validate()?;

    match &spec.params {
        RegressorParams::Linear => fit_linear(x, y),
        RegressorParams::Tree(p) => {
            let columns = x.to_columns();
            let rows: Vec<usize> = (0..x.n_rows()).collect();
            Ok(RegressorModel::Tree(fit_regression_tree(
                &columns,
                rows,
                y,
                p.max_depth,
                p.min_leaf,
                x.n_cols(),
                None,
            )))
        }
        RegressorParams::RandomForest(p) => {
            if p.n_trees < 1 {
                return Err(Error::InvalidParameter("n_trees must be at least 1".into()));
            }
            let columns = x.to_columns();
            let n = x.n_rows();
            let subsample = p.features_per_split.resolve(x.n_cols());
            let trees: Vec<RegressionTreeNode> = (0..p.n_trees)
                .map(|i| {
                    let mut rng = rng_from_seed(p.seed.wrapping_add(i as u64));
                    let bootstrap: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                    fit_regression_tree(
                        &columns,
                        bootstrap,
                        y,
                        p.max_depth,
                        1,
                        subsample,
                        Some(rng),
                    )
                })
                .collect();
            Ok(RegressorModel::RandomForest { trees })
        }
        RegressorParams::Gbt(p) => {
            if p.n_stages < 1 {
                return Err(Error::InvalidParameter(
                    "n_stages must be at least 1".into(),
                ));
            }
            if !(p.learning_rate > 0.0 && p.learning_rate <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "learning rate must be in (0, 1], got {}",
                    p.learning_rate
                )));
            }
            let columns = x.to_columns();
            let n = x.n_rows();
            let base = y.iter().sum::<f64>() / n as f64;
            let mut current: Vec<f64> = vec![base; n];
            let mut residuals = vec![0.0; n];
            let mut stages = Vec::with_capacity(p.n_stages);
            for _ in 0..p.n_stages {
                for i in 0..n {
                    residuals[i] = y[i] - current[i];
                }
                let tree = fit_regression_tree(
                    &columns,
                    (0..n).collect(),
                    &residuals,
                    p.max_depth,
                    1,
                    x.n_cols(),
                    None,
                );
                for (i, value) in current.iter_mut().enumerate() {
                    *value += p.learning_rate * tree.predict_row(x.row(i));
                }
                stages.push(tree);
            }
            Ok(RegressorModel::Gbt {
                base,
                learning_rate: p.learning_rate,
                stages,
            })
        }
    }
}

/// Evaluates a fitted model on every row of `x`.
pub fn predict_regressor(model: &RegressorModel, x: &Matrix) -> Result<Vec<f64>> {
    if let Some(d) = model.n_features() {
        if x.n_cols() != d {
            return Err(Error::DimensionMismatch(format!(
                "model expects {} feature columns, got {}",
                d,
                x.n_cols()
            )));
        }
    }
    let predict_row = |row: &[f64]| -> f64 {
        match model {
            RegressorModel::Linear {
                coefficients,
                intercept,
            } => {
                coefficients
                    .iter()
                    .zip(row)
                    .map(|(c, v)| c * v)
                    .sum::<f64>()
                    + intercept
            }
            RegressorModel::Tree(tree) => tree.predict_row(row),
            RegressorModel::RandomForest { trees } => {
                trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / trees.len() as f64
            }
            RegressorModel::Gbt {
                base,
                learning_rate,
                stages,
            } => {
                base + learning_rate
                    * stages.iter().map(|t| t.predict_row(row)).sum::<f64>()
            }
        }
    };
    Ok(x.rows().take(x.n_rows()).map(predict_row).collect())
}
