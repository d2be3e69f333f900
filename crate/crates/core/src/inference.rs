//! Multiple testing, group residualization and rolling-window testing.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{min_max_scale, Dataset};
use crate::error::{Error, Result};
use crate::fact::{fact_general, FactConfig};
use crate::forest::{ForestParams, RegressionForest};
use crate::rng::{derive_seed, tag};

/// Benjamini-Hochberg step-up procedure at FDR level `q`.
///
/// Returns the rejected indices in ascending order: with `p_(1) <= ... <=
/// p_(m)`, find the largest `k` with `p_(k) <= k q / m` and reject every
/// hypothesis whose p-value is at most `p_(k)`.
pub fn bh_fdr(p_values: &[f64], q: f64) -> Result<Vec<usize>> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::param("q", format!("FDR level {q} is outside (0, 1)")));
    }
    if let Some(bad) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::param("p_values", format!("{bad} is not a probability")));
    }
    let m = p_values.len();
    let mut sorted = p_values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let cutoff = (1..=m)
        .rev()
        .find(|&k| sorted[k - 1] <= k as f64 * q / m as f64)
        .map(|k| sorted[k - 1]);
    Ok(match cutoff {
        Some(c) => (0..m).filter(|&i| p_values[i] <= c).collect(),
        None => Vec::new(),
    })
}

/// One group: the representative feature and all members (including it).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub selected: usize,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub groups: Vec<Group>,
}

impl GroupSpec {
    pub fn validate(&self, p: usize) -> Result<()> {
        let mut seen = vec![false; p];
        for g in &self.groups {
            if !g.members.contains(&g.selected) {
                return Err(Error::param(
                    "groups",
                    format!("selected feature {} is not a member of its group", g.selected),
                ));
            }
            for &m in &g.members {
                if m >= p {
                    return Err(Error::FeatureOutOfRange { index: m, p });
                }
                if std::mem::replace(&mut seen[m], true) {
                    return Err(Error::param("groups", format!("feature {m} appears in two groups")));
                }
            }
        }
        Ok(())
    }
}

/// Raw residual `x_member - f(x_selected)` with `f` an out-of-bag forest fit.
/// Rows without an out-of-bag estimate fall back to the full-forest
/// prediction.
pub fn residualize_column(
    data: &Dataset,
    selected: usize,
    member: usize,
    fp: &ForestParams,
    seed: u64,
) -> Result<Vec<f64>> {
    data.check_feature(member)?;
    let x = data
        .select_features(&[selected])?
        .with_response(data.column(member).to_vec())?;
    let forest = RegressionForest::fit(&x, fp, seed)?;
    let oob = forest.predict_oob(&x)?;
    let col = data.column(member);
    Ok(oob
        .iter()
        .enumerate()
        .map(|(i, o)| col[i] - o.unwrap_or_else(|| forest.predict_by(|_| x.value(i, 0))))
        .collect())
}

/// Replace every non-selected group member by its residual on the group's
/// selected feature, min-max rescaled to `[0, 1]`.
pub fn group_residualize(
    data: &Dataset,
    spec: &GroupSpec,
    fp: &ForestParams,
    seed: u64,
) -> Result<Dataset> {
    spec.validate(data.p())?;
    let jobs: Vec<(usize, usize)> = spec
        .groups
        .iter()
        .flat_map(|g| {
            g.members
                .iter()
                .filter(move |&&m| m != g.selected)
                .map(move |&m| (g.selected, m))
        })
        .collect();
    let columns = jobs
        .par_iter()
        .map(|&(s, m)| {
            let r = residualize_column(data, s, m, fp, derive_seed(seed, &[tag::GROUP, m as u64]))?;
            Ok((m, min_max_scale(&r)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = data.clone();
    for (m, col) in columns {
        out = out.with_feature_column(m, &col)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RollingSpec {
    pub window_length: usize,
    pub step: usize,
    /// Response lead in rows: features at time t pair with the response at
    /// t + horizon, inside each window.
    #[serde(default = "default_horizon")]
    pub horizon: usize,
}

fn default_horizon() -> usize {
    1
}

impl RollingSpec {
    pub fn new(window_length: usize, step: usize) -> Self {
        Self {
            window_length,
            step,
            horizon: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_length < 20 {
            return Err(Error::param("window_length", "must be at least 20 rows"));
        }
        if self.step == 0 {
            return Err(Error::param("step", "must be at least 1"));
        }
        if self.horizon >= self.window_length {
            return Err(Error::param("horizon", "must be shorter than the window"));
        }
        Ok(())
    }

    /// `floor((T - W) / step) + 1`, or an error if the window exceeds `T`.
    pub fn window_count(&self, total: usize) -> Result<usize> {
        self.validate()?;
        if self.window_length > total {
            return Err(Error::param(
                "window_length",
                format!("window of {} rows exceeds the {total}-row series", self.window_length),
            ));
        }
        Ok((total - self.window_length) / self.step + 1)
    }

    /// First row of window `w`.
    pub fn window_start(&self, w: usize) -> usize {
        w * self.step
    }
}

/// One `(window, feature)` cell of a rolling analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingRow {
    pub window: usize,
    /// Label of the window's last row (its last response).
    pub window_end: String,
    pub feature: usize,
    pub feature_name: String,
    /// `None` when the statistic was numerically undefined in this window.
    pub stat: Option<f64>,
    pub p_value: Option<f64>,
}

/// General FACT p-values for `features` in every rolling window.
///
/// `labels` name the rows (e.g. dates); row indices are used when absent.
/// A `cfg.k_n` of `None` means one block, the small-sample choice.
pub fn rolling_pvalues(
    data: &Dataset,
    spec: &RollingSpec,
    cfg: &FactConfig,
    features: &[usize],
    labels: Option<&[String]>,
) -> Result<Vec<RollingRow>> {
    let windows = spec.window_count(data.n())?;
    for &j in features {
        data.check_feature(j)?;
    }
    if let Some(l) = labels {
        if l.len() != data.n() {
            return Err(Error::param("labels", "one label per row is required"));
        }
    }
    let mut cfg = cfg.clone();
    cfg.k_n.get_or_insert(1);
    let per_window = (0..windows)
        .into_par_iter()
        .map(|w| {
            let start = spec.window_start(w);
            let end = start + spec.window_length;
            let x_rows: Vec<usize> = (start..end - spec.horizon).collect();
            let y = data.response()[start + spec.horizon..end].to_vec();
            let window = data.select_rows(&x_rows)?.with_response(y)?;
            let window_end = labels.map_or_else(|| (end - 1).to_string(), |l| l[end - 1].clone());
            let wcfg = FactConfig {
                seed: derive_seed(cfg.seed, &[tag::WINDOW, w as u64]),
                ..cfg.clone()
            };
            features
                .iter()
                .map(|&j| {
                    let (stat, p_value) = match fact_general(j, &window, &wcfg) {
                        Ok(r) => (Some(r.stat), Some(r.p_value)),
                        Err(e) if e.is_numerical() => {
                            log::warn!("window {w}, feature {}: {e}", data.feature_name(j));
                            (None, None)
                        }
                        Err(e) => return Err(e),
                    };
                    Ok(RollingRow {
                        window: w,
                        window_end: window_end.clone(),
                        feature: j,
                        feature_name: data.feature_name(j),
                        stat,
                        p_value,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_window.into_iter().flatten().collect())
}

/// BH flags computed separately within each window. Cells without a
/// p-value are never flagged.
pub fn bh_per_window(rows: &[RollingRow], q: f64) -> Result<Vec<bool>> {
    let mut flags = vec![false; rows.len()];
    let mut start = 0;
    while start < rows.len() {
        let w = rows[start].window;
        let end = start + rows[start..].iter().take_while(|r| r.window == w).count();
        let idx: Vec<usize> = (start..end).filter(|&i| rows[i].p_value.is_some()).collect();
        let ps: Vec<f64> = idx.iter().map(|&i| rows[i].p_value.unwrap_or(1.0)).collect();
        for k in bh_fdr(&ps, q)? {
            flags[idx[k]] = true;
        }
        start = end;
    }
    Ok(flags)
}
