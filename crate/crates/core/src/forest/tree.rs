//! Regression trees stored as a flat node arena (root at index 0).

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::split::{scan_sorted, NodeStats};
use crate::dataset::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Internal {
        split_feature: usize,
        split_value: f64,
        impurity_decrease: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        prediction: f64,
        member_count: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub(super) nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    /// Index of the leaf reached by a row whose values are read through `x`.
    #[inline]
    pub fn leaf_index_by(&self, x: impl Fn(usize) -> f64) -> usize {
        let mut idx = 0;
        loop {
            match self.nodes[idx] {
                TreeNode::Internal {
                    split_feature,
                    split_value,
                    left,
                    right,
                    ..
                } => idx = if x(split_feature) <= split_value { left } else { right },
                TreeNode::Leaf { .. } => return idx,
            }
        }
    }

    #[inline]
    pub fn predict_by(&self, x: impl Fn(usize) -> f64) -> f64 {
        match self.nodes[self.leaf_index_by(x)] {
            TreeNode::Leaf { prediction, .. } => prediction,
            TreeNode::Internal { .. } => unreachable!("leaf_index_by stops at leaves"),
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.predict_by(|j| x[j])
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Internal { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Sum of impurity decreases per feature over all internal nodes.
    pub fn impurity_decrease_by_feature(&self, p: usize) -> Vec<f64> {
        let mut out = vec![0.0; p];
        for node in &self.nodes {
            if let TreeNode::Internal {
                split_feature,
                impurity_decrease,
                ..
            } = node
            {
                out[*split_feature] += impurity_decrease;
            }
        }
        out
    }

    pub fn uses_feature(&self, feature: usize) -> bool {
        self.nodes.iter().any(|n| {
            matches!(n, TreeNode::Internal { split_feature, .. } if *split_feature == feature)
        })
    }
}

/// Settings for growing one tree.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowParams {
    pub mtry: usize,
    pub min_node_size: usize,
    pub max_depth: Option<usize>,
}

/// Row indices of every column in ascending `(value, row)` order, shared by
/// all trees of a forest.
pub(crate) struct Presort {
    columns: Vec<Vec<u32>>,
}

impl Presort {
    pub(crate) fn new(data: &Dataset) -> Self {
        let n = data.n() as u32;
        let columns = (0..data.p())
            .map(|j| {
                let col = data.column(j);
                let mut idx: Vec<u32> = (0..n).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
                idx
            })
            .collect();
        Self { columns }
    }
}

/// Grow a CART tree on `rows` (a multiset of row indices) of `data`.
///
/// Each feature keeps the node's rows in sorted order; a split stably
/// partitions every feature's segment, so no node ever re-sorts.
pub(crate) fn grow_tree<R: Rng>(
    data: &Dataset,
    presort: &Presort,
    rows: &[usize],
    params: GrowParams,
    rng: &mut R,
) -> RegressionTree {
    let n = data.n();
    let m = rows.len();
    let p = data.p();
    let mut counts = vec![0u32; n];
    for &r in rows {
        counts[r] += 1;
    }
    let mut order = Vec::with_capacity(p * m);
    for col in &presort.columns {
        for &r in col {
            for _ in 0..counts[r as usize] {
                order.push(r);
            }
        }
    }
    let mut builder = Builder {
        data,
        params,
        m,
        order,
        scratch: vec![0; m],
        go_left: vec![false; n],
        yc: vec![0.0; n],
        nodes: Vec::new(),
        rng,
    };
    builder.grow(0, m, 0);
    RegressionTree {
        nodes: builder.nodes,
    }
}

struct Builder<'a, R> {
    data: &'a Dataset,
    params: GrowParams,
    /// Resample size; feature `f` owns `order[f * m..(f + 1) * m]`.
    m: usize,
    order: Vec<u32>,
    scratch: Vec<u32>,
    go_left: Vec<bool>,
    yc: Vec<f64>,
    nodes: Vec<TreeNode>,
    rng: &'a mut R,
}

impl<R: Rng> Builder<'_, R> {
    fn segment(&self, feature: usize, start: usize, end: usize) -> &[u32] {
        let base = feature * self.m;
        &self.order[base + start..base + end]
    }

    fn leaf(&mut self, start: usize, end: usize) -> usize {
        let y = self.data.response();
        let rows = self.segment(0, start, end);
        let prediction = rows.iter().map(|&r| y[r as usize]).sum::<f64>() / rows.len() as f64;
        self.nodes.push(TreeNode::Leaf {
            prediction,
            member_count: end - start,
        });
        self.nodes.len() - 1
    }

    fn grow(&mut self, start: usize, end: usize, depth: usize) -> usize {
        let size = end - start;
        let at_depth_cap = self.params.max_depth.map_or(false, |d| depth >= d);
        if at_depth_cap || size < 2 * self.params.min_node_size.max(1) {
            return self.leaf(start, end);
        }
        let p = self.data.p();
        let mut candidates = sample(&mut *self.rng, p, self.params.mtry.min(p)).into_vec();
        candidates.sort_unstable();

        let y = self.data.response();
        let Some(stats) = NodeStats::new(self.segment(0, start, end), y) else {
            return self.leaf(start, end);
        };
        let mut yc = std::mem::take(&mut self.yc);
        stats.center(self.segment(0, start, end), y, &mut yc);
        let mut best = None;
        for &f in &candidates {
            scan_sorted(
                self.segment(f, start, end),
                self.data.column(f),
                &yc,
                f,
                self.params.min_node_size,
                stats.tie(),
                &mut best,
            );
        }
        self.yc = yc;
        let Some(split) = best else {
            return self.leaf(start, end);
        };

        let col = self.data.column(split.feature);
        let mut n_left = 0;
        let base = split.feature * self.m;
        for &r in &self.order[base + start..base + end] {
            let left = col[r as usize] <= split.value;
            self.go_left[r as usize] = left;
            n_left += left as usize;
        }
        // Children that will be leaves only need one ordering (feature 0,
        // from which leaf means are read).
        let splittable = |size: usize| {
            size >= 2 * self.params.min_node_size.max(1)
                && self.params.max_depth.map_or(true, |d| depth + 1 < d)
        };
        let features = if splittable(n_left) || splittable(size - n_left) {
            p
        } else {
            1
        };
        for f in 0..features {
            let base = f * self.m;
            let seg = &mut self.order[base + start..base + end];
            let (mut l, mut r) = (0, n_left);
            for &row in seg.iter() {
                let left = self.go_left[row as usize];
                let dest = if left { l } else { r };
                self.scratch[dest] = row;
                l += left as usize;
                r += !left as usize;
            }
            seg.copy_from_slice(&self.scratch[..size]);
        }

        let idx = self.nodes.len();
        self.nodes.push(TreeNode::Leaf {
            prediction: f64::NAN,
            member_count: 0,
        });
        let left = self.grow(start, start + n_left, depth + 1);
        let right = self.grow(start + n_left, end, depth + 1);
        self.nodes[idx] = TreeNode::Internal {
            split_feature: split.feature,
            split_value: split.value,
            impurity_decrease: split.impurity_decrease,
            left,
            right,
        };
        idx
    }
}
