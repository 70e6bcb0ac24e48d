//! From-scratch random-forest binary classifier: bagged Gini decision trees
//! with per-split feature subsampling and vote-fraction probabilities.
//!
//! Determinism contract: tree `i` draws every random decision from a
//! `ChaCha8Rng` seeded with `seed + i`, so the forest is reproducible across
//! platforms and identical whether trees are trained in parallel or not.

use std::io::{BufRead, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until pure or `min_leaf_size` stops a split.
    pub max_depth: Option<usize>,
    pub min_leaf_size: usize,
    /// Features considered per split; `None` means `floor(sqrt(d))`.
    pub features_per_split: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: None,
            min_leaf_size: 1,
            features_per_split: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Internal {
        feature_index: usize,
        split_value: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        /// Bootstrap-sample counts of classes 0 and 1 at this leaf.
        class_counts: [u32; 2],
    },
}

impl TreeNode {
    /// Hard majority vote of the reached leaf; ties resolve to class 0.
    pub fn vote(&self, row: &[f64]) -> u8 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { class_counts } => {
                    return u8::from(class_counts[1] > class_counts[0]);
                }
                TreeNode::Internal {
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

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeNode>,
    pub n_features: usize,
    pub feature_subsample: usize,
    pub params: ForestParams,
    pub seed: u64,
}

/// Gini impurity of a two-class count pair: `1 - (a^2 + b^2) / (a + b)^2`.
/// Zero iff one class is absent, maximal (0.5) at a balanced node.
pub fn gini_impurity(a: u32, b: u32) -> f64 {
    let total = (a + b) as f64;
    if total == 0.0 {
        return 0.0;
    }
    let a = a as f64;
    let b = b as f64;
    1.0 - (a * a + b * b) / (total * total)
}

struct TreeBuilder<'a> {
    columns: &'a [Vec<f64>],
    labels: &'a [u8],
    max_depth: Option<usize>,
    min_leaf_size: usize,
    feature_subsample: usize,
    rng: rand_chacha::ChaCha8Rng,
    // scratch: feature indices 0..d, partially shuffled at each split
    feature_pool: Vec<usize>,
}

struct BestSplit {
    feature: usize,
    value: f64,
    weighted_gini: f64,
}

impl TreeBuilder<'_> {
    fn label_counts(&self, rows: &[usize]) -> [u32; 2] {
        let mut counts = [0u32; 2];
        for &r in rows {
            counts[self.labels[r] as usize] += 1;
        }
        counts
    }

    /// Draws `feature_subsample` distinct feature indices, returned sorted so
    /// the lowest-index tie-break falls out of scan order.
    fn sample_features(&mut self) -> Vec<usize> {
        let d = self.feature_pool.len();
        let k = self.feature_subsample.min(d);
        for i in 0..k {
            let j = self.rng.random_range(i..d);
            self.feature_pool.swap(i, j);
        }
        let mut picked = self.feature_pool[..k].to_vec();
        picked.sort_unstable();
        picked
    }

    fn best_split(&mut self, rows: &[usize], parent_counts: [u32; 2]) -> Option<BestSplit> {
        let n = rows.len() as f64;
        let parent_gini = gini_impurity(parent_counts[0], parent_counts[1]);
        let mut best: Option<BestSplit> = None;

        for feature in self.sample_features() {
            let column = &self.columns[feature];
            let mut ordered: Vec<(f64, u8)> =
                rows.iter().map(|&r| (column[r], self.labels[r])).collect();
            ordered.sort_by(|a, b| a.0.total_cmp(&b.0));

            let mut left = [0u32; 2];
            for i in 0..ordered.len() - 1 {
                left[ordered[i].1 as usize] += 1;
                // candidates sit between consecutive distinct values
                if ordered[i].0 == ordered[i + 1].0 {
                    continue;
                }
                let left_n = (i + 1) as u32;
                let right_n = (ordered.len() - i - 1) as u32;
                if (left_n as usize) < self.min_leaf_size
                    || (right_n as usize) < self.min_leaf_size
                {
                    continue;
                }
                let right = [parent_counts[0] - left[0], parent_counts[1] - left[1]];
                let weighted = (left_n as f64 * gini_impurity(left[0], left[1])
                    + right_n as f64 * gini_impurity(right[0], right[1]))
                    / n;
                if weighted < parent_gini
                    && best.as_ref().is_none_or(|b| weighted < b.weighted_gini)
                {
                    best = Some(BestSplit {
                        feature,
                        value: (ordered[i].0 + ordered[i + 1].0) / 2.0,
                        weighted_gini: weighted,
                    });
                }
            }
        }
        best
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize) -> TreeNode {
        let counts = self.label_counts(&rows);
        let pure = counts[0] == 0 || counts[1] == 0;
        let depth_reached = self.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_reached || rows.len() < 2 * self.min_leaf_size {
            return TreeNode::Leaf {
                class_counts: counts,
            };
        }
        let Some(split) = self.best_split(&rows, counts) else {
            return TreeNode::Leaf {
                class_counts: counts,
            };
        };

        let column = &self.columns[split.feature];
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&r| column[r] <= split.value);

        let left = self.build(left_rows, depth + 1);
        let right = self.build(right_rows, depth + 1);
        TreeNode::Internal {
            feature_index: split.feature,
            split_value: split.value,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

fn fit_one_tree(
    columns: &[Vec<f64>],
    labels: &[u8],
    params: &ForestParams,
    feature_subsample: usize,
    tree_seed: u64,
) -> TreeNode {
    let n = labels.len();
    let mut rng = rng_from_seed(tree_seed);
    let bootstrap: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    let mut builder = TreeBuilder {
        columns,
        labels,
        max_depth: params.max_depth,
        min_leaf_size: params.min_leaf_size.max(1),
        feature_subsample,
        rng,
        feature_pool: (0..columns.len()).collect(),
    };
    builder.build(bootstrap, 0)
}

/// Fits `params.n_trees` bagged trees on `(x, labels)`. Single-class label
/// vectors are allowed and produce constant forests.
pub fn fit_forest_classifier(
    x: &Matrix,
    labels: &[u8],
    params: &ForestParams,
    seed: u64,
) -> Result<ForestModel> {
    if x.n_rows() == 0 || x.n_cols() == 0 {
        return Err(Error::InvalidParameter("empty training data".into()));
    }
    if x.n_rows() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} rows vs {} labels",
            x.n_rows(),
            labels.len()
        )));
    }
    if params.n_trees < 1 {
        return Err(Error::InvalidParameter("n_trees must be at least 1".into()));
    }
    if let Some(bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::InvalidParameter(format!(
            "labels must be 0/1, found {bad}"
        )));
    }

    let d = x.n_cols();
    let feature_subsample = params
        .features_per_split
        .unwrap_or_else(|| (d as f64).sqrt().floor() as usize)
        .clamp(1, d);

    let columns = x.to_columns();
    let trees: Vec<TreeNode> = (0..params.n_trees)
        .into_par_iter()
        .map(|i| {
            fit_one_tree(
                &columns,
                labels,
                params,
                feature_subsample,
                seed.wrapping_add(i as u64),
            )
        })
        .collect();

    Ok(ForestModel {
        trees,
        n_features: d,
        feature_subsample,
        params: params.clone(),
        seed,
    })
}

impl ForestModel {
    /// Fraction of trees whose reached leaf holds a class-1 majority, one
    /// value per row of `x`. Output granularity is exactly `1 / n_trees`.
    pub fn predict_class_probability(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.n_features {
            return Err(Error::DimensionMismatch(format!(
                "model expects {} feature columns, got {}",
                self.n_features,
                x.n_cols()
            )));
        }
        let n_trees = self.trees.len() as f64;
        Ok(x.rows()
            .take(x.n_rows())
            .map(|row| {
                let votes: u32 = self.trees.iter().map(|t| u32::from(t.vote(row))).sum();
                votes as f64 / n_trees
            })
            .collect())
    }
}

/// Free-function form of [`ForestModel::predict_class_probability`].
pub fn predict_class_probability(model: &ForestModel, x: &Matrix) -> Result<Vec<f64>> {
    model.predict_class_probability(x)
}

const FORMAT_HEADER: &str = "threshaug-forest v1";

fn write_node<W: Write>(out: &mut W, node: &TreeNode) -> std::io::Result<()> {
    match node {
        TreeNode::Internal {
            feature_index,
            split_value,
            left,
            right,
        } => {
            writeln!(out, "I {} {:016x}", feature_index, split_value.to_bits())?;
            write_node(out, left)?;
            write_node(out, right)
        }
        TreeNode::Leaf { class_counts } => {
            writeln!(out, "L {} {}", class_counts[0], class_counts[1])
        }
    }
}

fn read_node<I: Iterator<Item = std::io::Result<String>>>(lines: &mut I) -> Result<TreeNode> {
    let line = lines
        .next()
        .ok_or_else(|| Error::Serialization("unexpected end of forest file".into()))?
        .map_err(|e| Error::Serialization(e.to_string()))?;
    let mut parts = line.split_whitespace();
    match parts.next() {
        Some("I") => {
            let feature_index: usize = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Serialization("bad internal node".into()))?;
            let bits = parts
                .next()
                .and_then(|s| u64::from_str_radix(s, 16).ok())
                .ok_or_else(|| Error::Serialization("bad split value".into()))?;
            let left = read_node(lines)?;
            let right = read_node(lines)?;
            Ok(TreeNode::Internal {
                feature_index,
                split_value: f64::from_bits(bits),
                left: Box::new(left),
                right: Box::new(right),
            })
        }
        Some("L") => {
            let a: u32 = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Serialization("bad leaf".into()))?;
            let b: u32 = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Serialization("bad leaf".into()))?;
            Ok(TreeNode::Leaf {
                class_counts: [a, b],
            })
        }
        other => Err(Error::Serialization(format!(
            "unknown node tag {other:?}"
        ))),
    }
}

/// Writes the model as versioned text: a header, one metadata line, then each
/// tree's nodes in preorder (split values as exact f64 bit patterns).
pub fn write_forest<W: Write>(out: &mut W, model: &ForestModel) -> Result<()> {
    let io_err = |e: std::io::Error| Error::Serialization(e.to_string());
    writeln!(out, "{FORMAT_HEADER}").map_err(io_err)?;
    writeln!(
        out,
        "n_trees={} n_features={} feature_subsample={} min_leaf_size={} max_depth={} seed={}",
        model.trees.len(),
        model.n_features,
        model.feature_subsample,
        model.params.min_leaf_size,
        model
            .params
            .max_depth
            .map_or("none".to_string(), |d| d.to_string()),
        model.seed
    )
    .map_err(io_err)?;
    for tree in &model.trees {
        write_node(out, tree).map_err(io_err)?;
    }
    Ok(())
}

/// Reads a model produced by [`write_forest`].
pub fn read_forest<R: BufRead>(input: R) -> Result<ForestModel> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Serialization("empty forest file".into()))?
        .map_err(|e| Error::Serialization(e.to_string()))?;
    if header != FORMAT_HEADER {
        return Err(Error::Serialization(format!(
            "unsupported forest format '{header}'"
        )));
    }
    let meta = lines
        .next()
        .ok_or_else(|| Error::Serialization("missing forest metadata".into()))?
        .map_err(|e| Error::Serialization(e.to_string()))?;
    let mut fields = std::collections::BTreeMap::new();
    for pair in meta.split_whitespace() {
        if let Some((key, value)) = pair.split_once('=') {
            fields.insert(key.to_string(), value.to_string());
        }
    }
    let get = |key: &str| {
        fields
            .get(key)
            .ok_or_else(|| Error::Serialization(format!("missing forest field '{key}'")))
    };
    let n_trees: usize = get("n_trees")?
        .parse()
        .map_err(|_| Error::Serialization("bad n_trees".into()))?;
    let n_features: usize = get("n_features")?
        .parse()
        .map_err(|_| Error::Serialization("bad n_features".into()))?;
    let feature_subsample: usize = get("feature_subsample")?
        .parse()
        .map_err(|_| Error::Serialization("bad feature_subsample".into()))?;
    let min_leaf_size: usize = get("min_leaf_size")?
        .parse()
        .map_err(|_| Error::Serialization("bad min_leaf_size".into()))?;
    let max_depth = match get("max_depth")?.as_str() {
        "none" => None,
        v => Some(
            v.parse()
                .map_err(|_| Error::Serialization("bad max_depth".into()))?,
        ),
    };
    let seed: u64 = get("seed")?
        .parse()
        .map_err(|_| Error::Serialization("bad seed".into()))?;

    let trees = (0..n_trees)
        .map(|_| read_node(&mut lines))
        .collect::<Result<Vec<_>>>()?;
    Ok(ForestModel {
        trees,
        n_features,
        feature_subsample,
        params: ForestParams {
            n_trees,
            max_depth,
            min_leaf_size,
            features_per_split: Some(feature_subsample),
        },
        seed,
    })
}
