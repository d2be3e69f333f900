//! Baseline importance measures: MDI, MDA and conditional permutation
//! importance (CPI), plus a copied-feature design where they disagree with
//! conditional independence.

use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::forest::{ForestParams, RegressionForest, TreeNode};
use crate::rng::{derive_seed, rng_for, tag};
use crate::stats::pearson;

/// Default number of permutation repetitions.
pub const DEFAULT_REPS: usize = 50;
/// Minimum leaf size of the tree that defines CPI strata.
pub const STRATA_MIN_NODE_SIZE: usize = 30;
/// Largest share of rows that may lack an out-of-bag prediction.
const MAX_OOB_DROP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImportanceMethod {
    Mdi,
    Mda,
    Cpi,
}

impl ImportanceMethod {
    pub fn name(self) -> &'static str {
        match self {
            ImportanceMethod::Mdi => "MDI",
            ImportanceMethod::Mda => "MDA",
            ImportanceMethod::Cpi => "CPI",
        }
    }
}

impl FromStr for ImportanceMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mdi" => Ok(Self::Mdi),
            "mda" => Ok(Self::Mda),
            "cpi" => Ok(Self::Cpi),
            _ => Err(Error::param(
                "method",
                format!("unknown importance method `{s}` (expected mdi, mda or cpi)"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceScores {
    pub method: ImportanceMethod,
    pub scores: Vec<f64>,
    /// Permutation standard errors (MDA and CPI with at least two reps).
    pub stderr: Option<Vec<f64>>,
    pub reps: usize,
    pub seed: u64,
}

/// Mean decrease in impurity: per feature, the total sum-of-squares decrease
/// of its splits, averaged over trees.
pub fn mdi(forest: &RegressionForest, p: usize) -> ImportanceScores {
    let mut scores = vec![0.0; p];
    for tree in forest.trees() {
        for (s, d) in scores.iter_mut().zip(tree.impurity_decrease_by_feature(p)) {
            *s += d;
        }
    }
    let k = forest.trees().len().max(1) as f64;
    scores.iter_mut().for_each(|s| *s /= k);
    ImportanceScores {
        method: ImportanceMethod::Mdi,
        scores,
        stderr: None,
        reps: 0,
        seed: forest.seed(),
    }
}

/// A permutation contrast: mean over reps of permuted OOB MSE minus the
/// unpermuted OOB MSE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationEstimate {
    pub score: f64,
    /// Standard error over reps; `None` for a single rep.
    pub stderr: Option<f64>,
    pub reps: usize,
}

/// Partition of rows into cells within which `X_j` is permuted.
pub trait StrataBuilder: Sync {
    fn strata(&self, data: &Dataset, j: usize, seed: u64) -> Result<Vec<Vec<usize>>>;
}

/// All rows in one cell: plain (marginal) permutation.
#[derive(Debug, Clone, Copy, Default)]
pub struct SingleStratum;

impl StrataBuilder for SingleStratum {
    fn strata(&self, data: &Dataset, _j: usize, _seed: u64) -> Result<Vec<Vec<usize>>> {
        Ok(vec![(0..data.n()).collect()])
    }
}

/// Cells are the leaves of one CART tree regressing `X_j` on the covariates
/// that are significantly correlated with it.
///
/// Covariates enter only if a Pearson correlation test against `X_j` rejects
/// at `screen_alpha` after a Bonferroni correction; with none selected there
/// is a single cell and CPI reduces to MDA. Screening keeps the tree from
/// carving cells out of noise, which would shrink every permutation. Cells
/// with fewer than two rows are merged into the cell whose mean of `X_j` is
/// nearest.
#[derive(Debug, Clone, Copy)]
pub struct TreeStrata {
    pub min_node_size: usize,
    pub screen_alpha: f64,
}

impl Default for TreeStrata {
    fn default() -> Self {
        Self {
            min_node_size: STRATA_MIN_NODE_SIZE,
            screen_alpha: 0.05,
        }
    }
}

impl TreeStrata {
    /// Covariates associated with `X_j`.
    pub fn conditioning_set(&self, data: &Dataset, j: usize) -> Vec<usize> {
        let n = data.n();
        let others = data.p().saturating_sub(1).max(1);
        let cutoff = self.screen_alpha / others as f64;
        if n < 4 {
            return Vec::new();
        }
        let t_dist = StudentsT::new(0.0, 1.0, (n - 2) as f64).expect("positive degrees of freedom");
        let xj = data.column(j);
        (0..data.p())
            .filter(|&k| k != j)
            .filter(|&k| {
                let r = pearson(xj, data.column(k));
                if !r.is_finite() {
                    return false;
                }
                let t = r.abs() * ((n - 2) as f64 / (1.0 - r * r).max(1e-300)).sqrt();
                2.0 * t_dist.sf(t) < cutoff
            })
            .collect()
    }
}

impl StrataBuilder for TreeStrata {
    fn strata(&self, data: &Dataset, j: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
        data.check_feature(j)?;
        let z = self.conditioning_set(data, j);
        if z.is_empty() {
            return SingleStratum.strata(data, j, seed);
        }
        let x = data.select_features(&z)?;
        let target = x.with_response(data.column(j).to_vec())?;
        let params = ForestParams::default()
            .with_n_trees(1)
            .with_mtry(x.p())
            .with_min_node_size(self.min_node_size)
            .without_bootstrap();
        let forest = RegressionForest::fit(&target, &params, derive_seed(seed, &[tag::STRATA, j as u64]))?;
        let tree = &forest.trees()[0];
        let mut by_leaf: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for i in 0..x.n() {
            by_leaf.entry(tree.leaf_index_by(|f| x.value(i, f))).or_default().push(i);
        }
        let mut cells: Vec<(f64, Vec<usize>)> = by_leaf
            .into_iter()
            .map(|(leaf, rows)| match tree.nodes()[leaf] {
                TreeNode::Leaf { prediction, .. } => (prediction, rows),
                TreeNode::Internal { .. } => unreachable!("leaf_index_by returns leaves"),
            })
            .collect();
        merge_small_cells(&mut cells, data.column(j))?;
        Ok(cells.into_iter().map(|(_, rows)| rows).collect())
    }
}

fn merge_small_cells(cells: &mut Vec<(f64, Vec<usize>)>, xj: &[f64]) -> Result<()> {
    while let Some(small) = cells.iter().position(|(_, rows)| rows.len() < 2) {
        if cells.len() == 1 {
            return Err(Error::StrataTooSmall(format!(
                "only {} row(s) available",
                cells[0].1.len()
            )));
        }
        let (centre, rows) = cells.remove(small);
        let target = cells
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 .0 - centre).abs().total_cmp(&(b.1 .0 - centre).abs()))
            .map(|(i, _)| i)
            .expect("at least one other cell");
        let cell = &mut cells[target];
        cell.1.extend(rows);
        cell.1.sort_unstable();
        cell.0 = cell.1.iter().map(|&i| xj[i]).sum::<f64>() / cell.1.len() as f64;
    }
    Ok(())
}

/// Mean decrease in accuracy of feature `j` with out-of-bag predictions.
pub fn mda(
    forest: &RegressionForest,
    data: &Dataset,
    j: usize,
    reps: usize,
    seed: u64,
) -> Result<PermutationEstimate> {
    cpi(forest, data, j, &SingleStratum, reps, seed)
}

/// Conditional permutation importance: like [`mda`], but `X_j` is only
/// permuted within the cells produced by `strata`.
pub fn cpi(
    forest: &RegressionForest,
    data: &Dataset,
    j: usize,
    strata: &dyn StrataBuilder,
    reps: usize,
    seed: u64,
) -> Result<PermutationEstimate> {
    if reps == 0 {
        return Err(Error::InvalidReps);
    }
    data.check_feature(j)?;
    let base = forest.predict_oob(data)?;
    let n = data.n();
    let present: Vec<usize> = (0..n).filter(|&i| base[i].is_some()).collect();
    let dropped = n - present.len();
    if dropped as f64 > MAX_OOB_DROP * n as f64 {
        return Err(Error::EmptyOob { dropped, total: n });
    }
    let y = data.response();
    let mse = |pred: &[Option<f64>]| {
        present
            .iter()
            .map(|&i| (y[i] - pred[i].unwrap_or(f64::NAN)).powi(2))
            .sum::<f64>()
            / present.len() as f64
    };
    let base_mse = mse(&base);
    let cells = strata.strata(data, j, seed)?;
    let masks = forest.in_bag_masks();
    let col = data.column(j);
    let contrasts: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for(seed, &[tag::PERMUTATION, j as u64, r as u64]);
            let mut source: Vec<usize> = (0..n).collect();
            for cell in &cells {
                let mut shuffled = cell.clone();
                shuffled.shuffle(&mut rng);
                for (&dst, &src) in cell.iter().zip(&shuffled) {
                    source[dst] = src;
                }
            }
            let pred = forest.oob_with(&masks, |i, f| {
                if f == j {
                    col[source[i]]
                } else {
                    data.value(i, f)
                }
            });
            mse(&pred) - base_mse
        })
        .collect();
    let m = reps as f64;
    let mean = contrasts.iter().sum::<f64>() / m;
    let stderr = (reps > 1).then(|| {
        let var = contrasts.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
        (var / m).sqrt()
    });
    Ok(PermutationEstimate {
        score: mean,
        stderr,
        reps,
    })
}

/// Permutation importance for the listed features (all features when
/// `features` is empty). Scores of unlisted features are left at zero.
pub fn permutation_scores(
    forest: &RegressionForest,
    data: &Dataset,
    method: ImportanceMethod,
    features: &[usize],
    reps: usize,
    seed: u64,
) -> Result<ImportanceScores> {
    let all: Vec<usize>;
    let features = if features.is_empty() {
        all = (0..data.p()).collect();
        &all
    } else {
        features
    };
    let strata: &dyn StrataBuilder = match method {
        ImportanceMethod::Mda => &SingleStratum,
        ImportanceMethod::Cpi => &TreeStrata::default(),
        ImportanceMethod::Mdi => {
            return Err(Error::param("method", "MDI is not a permutation measure"))
        }
    };
    let mut scores = vec![0.0; data.p()];
    let mut stderr = vec![0.0; data.p()];
    let mut have_stderr = true;
    for &j in features {
        let est = cpi(forest, data, j, strata, reps, seed)?;
        scores[j] = est.score;
        match est.stderr {
            Some(s) => stderr[j] = s,
            None => have_stderr = false,
        }
    }
    Ok(ImportanceScores {
        method,
        scores,
        stderr: have_stderr.then_some(stderr),
        reps,
        seed,
    })
}

/// Long-format `feature,method,score` CSV.
pub fn write_scores_csv<W: Write>(
    out: W,
    data: &Dataset,
    scores: &[ImportanceScores],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["feature", "method", "score"])?;
    for s in scores {
        for (j, v) in s.scores.iter().enumerate() {
            w.write_record([data.feature_name(j), s.method.name().to_string(), v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Copied-feature design: `X_1 ~ U[0, 1]`; when `X_1 <= 0.7` the other features are iid
/// `U[0, 0.7]`, otherwise every feature equals `X_1`. The response is
/// `1{0.3 <= X_1 <= 0.7} + sigma * N(0, 1)`.
pub fn copy_design_generate(n: usize, p: usize, sigma: f64, seed: u64) -> Result<Dataset> {
    if p < 2 {
        return Err(Error::param("p", "the copied-feature design needs at least 2 features"));
    }
    if !(sigma >= 0.0) {
        return Err(Error::param("sigma", "must be non-negative"));
    }
    let mut feat = rng_for(seed, &[tag::FEATURES]);
    let mut noise = rng_for(seed, &[tag::NOISE]);
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let x1: f64 = feat.gen();
        let mut row = vec![x1; p];
        if x1 <= 0.7 {
            for v in row.iter_mut().skip(1) {
                *v = 0.7 * feat.gen::<f64>();
            }
        }
        let e: f64 = noise.sample(StandardNormal);
        y.push(f64::from(u8::from((0.3..=0.7).contains(&x1))) + sigma * e);
        rows.push(row);
    }
    Dataset::from_rows(&rows, y)
}
