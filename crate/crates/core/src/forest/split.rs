//! Exhaustive CART split search.
//!
//! Both the public [`best_split`] and the presorted tree grower feed rows in
//! `(value, row index)` order into the same scan, so they agree on every
//! split they evaluate.

use crate::dataset::Dataset;

/// A chosen split: rows with `x[feature] <= value` go left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub value: f64,
    /// Parent sum of squares minus the children's sums of squares.
    pub impurity_decrease: f64,
}

/// Relative tolerance (against the parent sum of squares) under which two
/// impurity decreases count as tied, and below which a decrease counts as
/// zero.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Best sum-of-squares split of `rows` (a multiset) over `candidate_features`.
///
/// Candidates are midpoints between consecutive distinct sorted values.
/// Splits leaving fewer than `min_node_size` rows in either child are
/// skipped. Ties are broken by smallest feature index, then smallest split
/// value. Returns `None` when no admissible split strictly decreases the
/// impurity.
pub fn best_split(
    rows: &[usize],
    data: &Dataset,
    candidate_features: &[usize],
    min_node_size: usize,
) -> Option<SplitCandidate> {
    let y = data.response();
    let mut sorted: Vec<u32> = rows.iter().map(|&r| r as u32).collect();
    sorted.sort_unstable();
    let node = NodeStats::new(&sorted, y)?;
    let mut yc = vec![0.0; data.n()];
    node.center(&sorted, y, &mut yc);

    let mut features = candidate_features.to_vec();
    features.sort_unstable();
    features.dedup();
    let mut best = None;
    for f in features {
        let col = data.column(f);
        // stable sort keeps equal values in row order, matching the presort
        sorted.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
        scan_sorted(&sorted, col, &yc, f, min_node_size, node.tie(), &mut best);
        sorted.sort_unstable();
    }
    best
}

/// Mean and sum of squares of a node's responses.
pub(crate) struct NodeStats {
    pub mean: f64,
    pub sse: f64,
}

impl NodeStats {
    /// `None` for empty nodes and nodes without variation.
    pub(crate) fn new(rows: &[u32], y: &[f64]) -> Option<Self> {
        if rows.len() < 2 {
            return None;
        }
        let mean = rows.iter().map(|&r| y[r as usize]).sum::<f64>() / rows.len() as f64;
        let sse = rows.iter().map(|&r| (y[r as usize] - mean).powi(2)).sum::<f64>();
        (sse > 0.0).then_some(Self { mean, sse })
    }

    pub(crate) fn center(&self, rows: &[u32], y: &[f64], out: &mut [f64]) {
        for &r in rows {
            out[r as usize] = y[r as usize] - self.mean;
        }
    }

    pub(crate) fn tie(&self) -> f64 {
        self.sse * TIE_TOLERANCE
    }
}

/// Scan rows sorted by `col` and update `best` with any strictly better
/// admissible split. `yc` holds node-centered responses indexed by row.
#[inline]
pub(crate) fn scan_sorted(
    sorted: &[u32],
    col: &[f64],
    yc: &[f64],
    feature: usize,
    min_node_size: usize,
    tie: f64,
    best: &mut Option<SplitCandidate>,
) {
    let n = sorted.len();
    let min_leaf = min_node_size.max(1);
    if n < 2 * min_leaf {
        return;
    }
    let nf = n as f64;
    let total: f64 = sorted.iter().map(|&r| yc[r as usize]).sum();
    let mut left_sum = 0.0;
    let mut lo = col[sorted[0] as usize];
    for i in 0..n - min_leaf {
        left_sum += yc[sorted[i] as usize];
        let hi = col[sorted[i + 1] as usize];
        let prev = std::mem::replace(&mut lo, hi);
        if i + 1 < min_leaf || !(prev < hi) {
            continue;
        }
        // nl·nr/n·(mean_l - mean_r)² with a single division.
        let nl = (i + 1) as f64;
        let num = left_sum * nf - total * nl;
        let decrease = num * num / (nf * nl * (nf - nl));
        if decrease <= tie {
            continue;
        }
        if best.map_or(true, |b| decrease > b.impurity_decrease + tie) {
            *best = Some(SplitCandidate {
                feature,
                value: midpoint(prev, hi),
                impurity_decrease: decrease,
            });
        }
    }
}

/// Midpoint of two adjacent distinct values that still separates them.
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = 0.5 * (lo + hi);
    if mid < hi {
        mid
    } else {
        lo
    }
}
