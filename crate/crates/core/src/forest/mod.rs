//! CART regression forests with bootstrap resampling and out-of-bag
//! prediction.
//!
//! Each tree draws its randomness from its own ChaCha stream keyed by
//! `(seed, tree index)`, so a forest is a pure function of
//! `(data, params, seed)` no matter how many worker threads fit it.

mod split;
mod tree;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use split::{best_split, SplitCandidate, TIE_TOLERANCE};
pub use tree::{RegressionTree, TreeNode};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::stream_rng;
use tree::{grow_tree, GrowParams, Presort};

/// Current version of the JSON forest document.
pub const FOREST_FORMAT_VERSION: u32 = 1;

/// How each tree's training rows are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Resampling {
    /// Every tree sees every row once. No row is ever out of bag.
    None,
    /// Draw `round(fraction * n)` rows, with or without replacement.
    Bootstrap { fraction: f64, replace: bool },
}

impl Default for Resampling {
    fn default() -> Self {
        Resampling::Bootstrap {
            fraction: 1.0,
            replace: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features tried per split; `None` means `ceil(p / 3)`. Values above the
    /// number of available features are clamped.
    pub mtry: Option<usize>,
    /// Minimum number of rows in each child of a split.
    pub min_node_size: usize,
    pub max_depth: Option<usize>,
    pub resampling: Resampling,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 500,
            mtry: None,
            min_node_size: 5,
            max_depth: None,
            resampling: Resampling::default(),
        }
    }
}

impl ForestParams {
    pub fn with_n_trees(mut self, n_trees: usize) -> Self {
        self.n_trees = n_trees;
        self
    }

    pub fn with_mtry(mut self, mtry: usize) -> Self {
        self.mtry = Some(mtry);
        self
    }

    pub fn with_min_node_size(mut self, min_node_size: usize) -> Self {
        self.min_node_size = min_node_size;
        self
    }

    pub fn with_max_depth(mut self, depth: usize) -> Self {
        self.max_depth = Some(depth);
        self
    }

    pub fn with_resampling(mut self, resampling: Resampling) -> Self {
        self.resampling = resampling;
        self
    }

    pub fn without_bootstrap(self) -> Self {
        self.with_resampling(Resampling::None)
    }

    /// Effective number of split candidates for `p` features.
    pub fn mtry_for(&self, p: usize) -> usize {
        self.mtry.unwrap_or_else(|| p.div_ceil(3)).clamp(1, p.max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::param("n_trees", "must be positive"));
        }
        if self.mtry == Some(0) {
            return Err(Error::param("mtry", "must be positive"));
        }
        if self.min_node_size == 0 {
            return Err(Error::param("min_node_size", "must be at least 1"));
        }
        if let Resampling::Bootstrap { fraction, .. } = self.resampling {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(Error::param("resampling.fraction", "must lie in (0, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionForest {
    trees: Vec<RegressionTree>,
    bootstrap_indices: Vec<Vec<usize>>,
    params: ForestParams,
    seed: u64,
    n_features: usize,
    n_train: usize,
}

#[derive(Serialize, Deserialize)]
struct ForestDocument {
    format_version: u32,
    #[serde(flatten)]
    forest: RegressionForest,
}

impl RegressionForest {
    /// Fit `params.n_trees` trees, each on its own resample of `data`.
    pub fn fit(data: &Dataset, params: &ForestParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let n = data.n();
        if n < 2 {
            return Err(Error::InvalidDataset("need at least 2 rows to fit a forest".into()));
        }
        let grow = GrowParams {
            mtry: params.mtry_for(data.p()),
            min_node_size: params.min_node_size,
            max_depth: params.max_depth,
        };
        let resampling = params.resampling;
        let presort = Presort::new(data);
        let (trees, bootstrap_indices): (Vec<_>, Vec<_>) = (0..params.n_trees)
            .into_par_iter()
            .map(|k| {
                let mut rng = stream_rng(seed, k as u64);
                let rows = draw_rows(n, resampling, &mut rng);
                let tree = grow_tree(data, &presort, &rows, grow, &mut rng);
                (tree, rows)
            })
            .unzip();
        Ok(Self {
            trees,
            bootstrap_indices,
            params: params.clone(),
            seed,
            n_features: data.p(),
            n_train: n,
        })
    }

    /// Assemble a forest from explicit trees and their training multisets.
    pub fn from_parts(
        trees: Vec<RegressionTree>,
        bootstrap_indices: Vec<Vec<usize>>,
        params: ForestParams,
        seed: u64,
        n_features: usize,
        n_train: usize,
    ) -> Result<Self> {
        if trees.len() != bootstrap_indices.len() || trees.is_empty() {
            return Err(Error::param(
                "trees",
                "need one bootstrap index set per tree and at least one tree",
            ));
        }
        if bootstrap_indices.iter().flatten().any(|&i| i >= n_train) {
            return Err(Error::param("bootstrap_indices", "row index out of range"));
        }
        Ok(Self {
            trees,
            bootstrap_indices,
            params,
            seed,
            n_features,
            n_train,
        })
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn bootstrap_indices(&self) -> &[Vec<usize>] {
        &self.bootstrap_indices
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(self.predict_by(|j| x[j]))
    }

    #[inline]
    pub(crate) fn predict_by(&self, x: impl Fn(usize) -> f64 + Copy) -> f64 {
        self.trees.iter().map(|t| t.predict_by(x)).sum::<f64>() / self.trees.len() as f64
    }

    /// Predict every row of `data`.
    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<f64>> {
        self.check_dims(data)?;
        Ok((0..data.n())
            .into_par_iter()
            .map(|i| self.predict_by(|j| data.value(i, j)))
            .collect())
    }

    fn check_dims(&self, data: &Dataset) -> Result<()> {
        if data.p() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: data.p(),
            });
        }
        Ok(())
    }

    /// For each tree, a mask of the training rows it saw.
    pub fn in_bag_masks(&self) -> Vec<Vec<bool>> {
        self.bootstrap_indices
            .iter()
            .map(|rows| {
                let mut mask = vec![false; self.n_train];
                for &r in rows {
                    mask[r] = true;
                }
                mask
            })
            .collect()
    }

    /// Out-of-bag predictions on the training data.
    ///
    /// Entry `i` averages the trees whose resample excluded row `i`, and is
    /// `None` when every tree saw that row.
    pub fn predict_oob(&self, data: &Dataset) -> Result<Vec<Option<f64>>> {
        self.check_dims(data)?;
        if data.n() != self.n_train {
            return Err(Error::InvalidDataset(format!(
                "out-of-bag prediction needs the {}-row training data, got {} rows",
                self.n_train,
                data.n()
            )));
        }
        let masks = self.in_bag_masks();
        Ok(self.oob_with(&masks, |i, j| data.value(i, j)))
    }

    /// Out-of-bag predictions where cell `(i, j)` is read through `x`.
    pub(crate) fn oob_with(
        &self,
        masks: &[Vec<bool>],
        x: impl Fn(usize, usize) -> f64 + Sync,
    ) -> Vec<Option<f64>> {
        (0..self.n_train)
            .into_par_iter()
            .map(|i| {
                let mut sum = 0.0;
                let mut count = 0usize;
                for (tree, mask) in self.trees.iter().zip(masks) {
                    if !mask[i] {
                        sum += tree.predict_by(|j| x(i, j));
                        count += 1;
                    }
                }
                (count > 0).then(|| sum / count as f64)
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ForestDocument {
            format_version: FOREST_FORMAT_VERSION,
            forest: self.clone(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ForestDocument = serde_json::from_str(s)?;
        if doc.format_version != FOREST_FORMAT_VERSION {
            return Err(Error::param(
                "format_version",
                format!(
                    "unsupported forest format {} (expected {FOREST_FORMAT_VERSION})",
                    doc.format_version
                ),
            ));
        }
        Ok(doc.forest)
    }
}

fn draw_rows<R: Rng>(n: usize, resampling: Resampling, rng: &mut R) -> Vec<usize> {
    match resampling {
        Resampling::None => (0..n).collect(),
        Resampling::Bootstrap { fraction, replace } => {
            let size = ((fraction * n as f64).round() as usize).clamp(1, n);
            if replace {
                (0..size).map(|_| rng.gen_range(0..n)).collect()
            } else {
                let mut rows = rand::seq::index::sample(rng, n, size).into_vec();
                rows.sort_unstable();
                rows
            }
        }
    }
}
