//! Nuisance estimation: residuals `Y - Ŷ(X_{-j})`, transformed features and,
//! when conditioning, forest estimates `ĝ(X_{-j})`.

use rand::seq::SliceRandom;

use super::Transform;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::forest::{ForestParams, RegressionForest, Resampling};
use crate::rng::{derive_seed, rng_for, tag};

/// Largest share of rows that may lack an out-of-bag estimate.
const MAX_OOB_DROP: f64 = 0.1;

/// Per-inference-row ingredients of the statistic.
pub(crate) struct Nuisance {
    pub residuals: Vec<f64>,
    /// `g^{(l)}(X_ij)` per transform, centered-square transforms using the
    /// inference-sample mean.
    pub transformed: Vec<Vec<f64>>,
    /// `ĝ^{(l)}(X_{-ij})` per transform when conditioning.
    pub fitted: Vec<Option<Vec<f64>>>,
}

fn response_seed(seed: u64, j: usize) -> u64 {
    derive_seed(seed, &[tag::RESPONSE_FOREST, j as u64])
}

/// Keyed by the transform kind, so a transform's forest does not depend on
/// its position in the list.
fn transform_seed(seed: u64, j: usize, g: Transform) -> u64 {
    derive_seed(seed, &[tag::TRANSFORM_FOREST, j as u64, g as u64])
}

/// Randomly split `full` into `n_train` training rows and the rest for
/// inference. Row order within each part follows the original order.
pub fn split_sample(full: &Dataset, n_train: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    let n = full.n();
    if n_train < 2 || n_train + 2 > n {
        return Err(Error::param(
            "train_fraction",
            format!("a split of {n} rows into {n_train} training rows leaves a side under 2 rows"),
        ));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_for(seed, &[tag::SPLIT]));
    let (a, b) = idx.split_at_mut(n_train);
    a.sort_unstable();
    b.sort_unstable();
    Ok((full.select_rows(a)?, full.select_rows(b)?))
}

impl Nuisance {
    pub(crate) fn from_split(
        j: usize,
        train: &Dataset,
        infer: &Dataset,
        transforms: &[Transform],
        conditioning: bool,
        fp: &ForestParams,
        seed: u64,
    ) -> Result<Self> {
        if train.p() != infer.p() {
            return Err(Error::DimensionMismatch {
                expected: train.p(),
                got: infer.p(),
            });
        }
        train.check_feature(j)?;
        let train_x = train.without_feature(j)?;
        let infer_x = infer.without_feature(j)?;
        let y_forest = RegressionForest::fit(&train_x, fp, response_seed(seed, j))?;
        let residuals = infer
            .response()
            .iter()
            .zip(y_forest.predict_dataset(&infer_x)?)
            .map(|(y, yhat)| y - yhat)
            .collect();
        let mut transformed = Vec::with_capacity(transforms.len());
        let mut fitted = Vec::with_capacity(transforms.len());
        for &g in transforms {
            transformed.push(g.apply(infer.column(j)));
            fitted.push(if conditioning {
                let target = train_x.with_response(g.apply(train.column(j)))?;
                let forest = RegressionForest::fit(&target, fp, transform_seed(seed, j, g))?;
                Some(forest.predict_dataset(&infer_x)?)
            } else {
                None
            });
        }
        Ok(Self {
            residuals,
            transformed,
            fitted,
        })
    }

    pub(crate) fn from_oob(
        j: usize,
        full: &Dataset,
        transforms: &[Transform],
        conditioning: bool,
        fp: &ForestParams,
        seed: u64,
    ) -> Result<Self> {
        if fp.resampling == Resampling::None {
            return Err(Error::param(
                "resampling",
                "out-of-bag estimation needs bootstrap resampling",
            ));
        }
        full.check_feature(j)?;
        let n = full.n();
        let x = full.without_feature(j)?;
        let y_oob = RegressionForest::fit(&x, fp, response_seed(seed, j))?.predict_oob(&x)?;
        let mut g_oob = Vec::with_capacity(transforms.len());
        for &g in transforms {
            g_oob.push(if conditioning {
                let target = x.with_response(g.apply(full.column(j)))?;
                let forest = RegressionForest::fit(&target, fp, transform_seed(seed, j, g))?;
                Some(forest.predict_oob(&target)?)
            } else {
                None
            });
        }

        let keep: Vec<usize> = (0..n)
            .filter(|&i| {
                y_oob[i].is_some() && g_oob.iter().flatten().all(|v| v[i].is_some())
            })
            .collect();
        let dropped = n - keep.len();
        if dropped as f64 > MAX_OOB_DROP * n as f64 {
            return Err(Error::EmptyOob { dropped, total: n });
        }
        if dropped > 0 {
            log::warn!(
                "feature {}: {dropped} of {n} rows have no out-of-bag estimate and are dropped",
                full.feature_name(j)
            );
        }

        let y = full.response();
        let col = full.column(j);
        let residuals = keep.iter().map(|&i| y[i] - y_oob[i].unwrap_or(f64::NAN)).collect();
        let kept_x: Vec<f64> = keep.iter().map(|&i| col[i]).collect();
        let transformed = transforms.iter().map(|g| g.apply(&kept_x)).collect();
        let fitted = g_oob
            .into_iter()
            .map(|v| v.map(|v| keep.iter().map(|&i| v[i].unwrap_or(f64::NAN)).collect()))
            .collect();
        Ok(Self {
            residuals,
            transformed,
            fitted,
        })
    }

    /// Restrict to `wanted` transforms (a subset of `have`), dropping the
    /// conditional fits when `conditioning` is false.
    pub(crate) fn project(&self, have: &[Transform], wanted: &[Transform], conditioning: bool) -> Self {
        let pick = |g: &Transform| have.iter().position(|h| h == g).expect("transform fitted");
        Self {
            residuals: self.residuals.clone(),
            transformed: wanted.iter().map(|g| self.transformed[pick(g)].clone()).collect(),
            fitted: wanted
                .iter()
                .map(|g| if conditioning { self.fitted[pick(g)].clone() } else { None })
                .collect(),
        }
    }
}
