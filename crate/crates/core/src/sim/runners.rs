//! Experiment runners: size/power tables, spurious-effect fractions, Q-Q data
//! and the out-of-sample RMSE diagnostic.
//!
//! Repetitions run in parallel. Each draws its data and seeds from its own
//! index, so every table is the same for any thread count.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{friedman_mean, gen_features, SimulationSpec};
use crate::error::{Error, Result};
use crate::fact::{run_fact, run_fact_variants, FactConfig, Variant};
use crate::forest::{ForestParams, RegressionForest};
use crate::importance::{cpi, mda, mdi, TreeStrata};
use crate::rng::{derive_seed, tag};
use crate::stats::{ks_test_normal, mean, norm_quantile, std_dev, KsResult};

/// Features reported in the size/power table (1-based labels).
pub const SIZE_POWER_FEATURES: [usize; 8] = [1, 11, 21, 31, 2, 12, 22, 32];

/// The null feature X12 against the relevant X1 and X21.
pub const SPURIOUS_COMPARISONS: [Comparison; 2] = [
    Comparison { null: 12, relevant: 1 },
    Comparison { null: 12, relevant: 21 },
];

pub const DEFAULT_TEST_POINTS: usize = 10_000;

fn column(spec: &SimulationSpec, label: usize) -> Result<usize> {
    spec.column_of(label).ok_or_else(|| {
        Error::param(
            "features",
            format!("X{label} is not part of the simulated design"),
        )
    })
}

/// FACT configuration for one repetition: the seed mixes the repetition seed
/// with the configured one.
fn rep_config(spec: &SimulationSpec, cfg: &FactConfig, rep: usize) -> FactConfig {
    FactConfig {
        seed: derive_seed(spec.rep_seed(rep), &[cfg.seed]),
        ..cfg.clone()
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}

/// Rejection rates per significance level and feature.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizePowerTable {
    pub case_label: String,
    pub reps: usize,
    pub alphas: Vec<f64>,
    /// 1-based feature labels, in column order.
    pub features: Vec<usize>,
    /// `rates[a][f]`: share of repetitions rejecting feature `f` at `alphas[a]`.
    pub rates: Vec<Vec<f64>>,
}

impl SizePowerTable {
    pub fn rate(&self, alpha: f64, label: usize) -> Option<f64> {
        let a = self.alphas.iter().position(|&x| x == alpha)?;
        let f = self.features.iter().position(|&x| x == label)?;
        Some(self.rates[a][f])
    }

    /// `case,alpha,X1,X11,...` with one row per significance level.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "case,alpha")?;
        for f in &self.features {
            write!(out, ",X{f}")?;
        }
        writeln!(out)?;
        for (alpha, row) in self.alphas.iter().zip(&self.rates) {
            write!(out, "{},{alpha}", self.case_label)?;
            for r in row {
                write!(out, ",{r}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Share of repetitions in which `cfg` rejects each feature at each level.
pub fn run_size_power(
    spec: &SimulationSpec,
    cfg: &FactConfig,
    alphas: &[f64],
    features: &[usize],
) -> Result<SizePowerTable> {
    spec.validate()?;
    cfg.validate()?;
    if alphas.is_empty() || features.is_empty() {
        return Err(Error::param("alphas", "need at least one level and one feature"));
    }
    for &a in alphas {
        check_alpha(a)?;
    }
    let cols = features
        .iter()
        .map(|&l| column(spec, l))
        .collect::<Result<Vec<_>>>()?;

    let rejections: Vec<Vec<Vec<bool>>> = (0..spec.reps)
        .into_par_iter()
        .map(|rep| {
            let data = spec.generate(rep)?.data;
            let cfg = rep_config(spec, cfg, rep);
            cols.iter()
                .map(|&j| {
                    let report = run_fact(j, &data, &cfg)?;
                    alphas.iter().map(|&a| report.rejects(a)).collect()
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let reps = spec.reps as f64;
    let rates = (0..alphas.len())
        .map(|a| {
            (0..cols.len())
                .map(|f| rejections.iter().filter(|r| r[f][a]).count() as f64 / reps)
                .collect()
        })
        .collect();
    Ok(SizePowerTable {
        case_label: spec.case_label.clone(),
        reps: spec.reps,
        alphas: alphas.to_vec(),
        features: features.to_vec(),
        rates,
    })
}

/// Importance or significance score compared in the spurious-effect table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ScoreMethod {
    Mdi,
    Mda,
    Cpi,
    /// Absolute FACT statistic.
    Fact,
}

impl ScoreMethod {
    pub const ALL: [ScoreMethod; 4] = [Self::Mdi, Self::Mda, Self::Cpi, Self::Fact];

    pub fn name(self) -> &'static str {
        match self {
            Self::Mdi => "MDI",
            Self::Mda => "MDA",
            Self::Cpi => "CPI",
            Self::Fact => "FACT",
        }
    }
}

impl fmt::Display for ScoreMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScoreMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::param("method", format!("unknown method `{s}`")))
    }
}

/// Does the null feature outscore the relevant one?
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Comparison {
    pub null: usize,
    pub relevant: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpuriousRow {
    pub method: ScoreMethod,
    pub comparison: Comparison,
    /// Share of repetitions with `score(null) > score(relevant)`.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpuriousTable {
    pub case_label: String,
    pub reps: usize,
    pub rows: Vec<SpuriousRow>,
}

impl SpuriousTable {
    pub fn fraction(&self, method: ScoreMethod, null: usize, relevant: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.comparison == Comparison { null, relevant })
            .map(|r| r.fraction)
    }

    /// Long format: `case,method,null,relevant,fraction`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "case,method,null,relevant,fraction")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},X{},X{},{}",
                self.case_label, r.method, r.comparison.null, r.comparison.relevant, r.fraction
            )?;
        }
        Ok(())
    }
}

/// Per repetition, score every feature named in `comparisons` with each
/// method and count how often the null feature outscores the relevant one.
///
/// MDI, MDA and CPI share one forest fit on all features with `cfg.forest`;
/// MDA and CPI average `permutation_reps` permutations. FACT refits its
/// nuisance forests per feature and scores by `|stat|`.
pub fn run_spurious(
    spec: &SimulationSpec,
    cfg: &FactConfig,
    methods: &[ScoreMethod],
    comparisons: &[Comparison],
    permutation_reps: usize,
) -> Result<SpuriousTable> {
    spec.validate()?;
    cfg.validate()?;
    if methods.is_empty() || comparisons.is_empty() {
        return Err(Error::param(
            "methods",
            "need at least one method and one comparison",
        ));
    }
    let mut labels: Vec<usize> = comparisons.iter().flat_map(|c| [c.null, c.relevant]).collect();
    labels.sort_unstable();
    labels.dedup();
    let cols = labels
        .iter()
        .map(|&l| column(spec, l))
        .collect::<Result<Vec<_>>>()?;
    let needs_forest = methods.iter().any(|m| *m != ScoreMethod::Fact);
    if needs_forest && permutation_reps == 0 && methods.iter().any(|m| matches!(m, ScoreMethod::Mda | ScoreMethod::Cpi)) {
        return Err(Error::InvalidReps);
    }

    // scores[rep][method][label]
    let scores: Vec<Vec<Vec<f64>>> = (0..spec.reps)
        .into_par_iter()
        .map(|rep| {
            let data = spec.generate(rep)?.data;
            let rep_seed = spec.rep_seed(rep);
            let forest = if needs_forest {
                let seed = derive_seed(rep_seed, &[tag::FULL_FOREST]);
                Some(RegressionForest::fit(&data, &cfg.forest, seed)?)
            } else {
                None
            };
            let perm_seed = derive_seed(rep_seed, &[tag::PERMUTATION]);
            let fact_cfg = rep_config(spec, cfg, rep);
            let strata = TreeStrata::default();
            methods
                .iter()
                .map(|m| {
                    let forest = forest.as_ref();
                    match m {
                        ScoreMethod::Mdi => {
                            let s = mdi(forest.expect("fit above"), data.p());
                            Ok(cols.iter().map(|&j| s.scores[j]).collect())
                        }
                        ScoreMethod::Mda => cols
                            .iter()
                            .map(|&j| {
                                Ok(mda(forest.expect("fit above"), &data, j, permutation_reps, perm_seed)?.score)
                            })
                            .collect(),
                        ScoreMethod::Cpi => cols
                            .iter()
                            .map(|&j| {
                                Ok(cpi(forest.expect("fit above"), &data, j, &strata, permutation_reps, perm_seed)?
                                    .score)
                            })
                            .collect(),
                        ScoreMethod::Fact => cols
                            .iter()
                            .map(|&j| Ok(run_fact(j, &data, &fact_cfg)?.stat.abs()))
                            .collect(),
                    }
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let at = |label: usize| labels.iter().position(|&l| l == label).expect("collected above");
    let mut rows = Vec::with_capacity(methods.len() * comparisons.len());
    for (mi, &method) in methods.iter().enumerate() {
        for &comparison in comparisons {
            let (a, b) = (at(comparison.null), at(comparison.relevant));
            let wins = scores.iter().filter(|s| s[mi][a] > s[mi][b]).count();
            rows.push(SpuriousRow {
                method,
                comparison,
                fraction: wins as f64 / spec.reps as f64,
            });
        }
    }
    Ok(SpuriousTable {
        case_label: spec.case_label.clone(),
        reps: spec.reps,
        rows,
    })
}

/// Null distribution of one statistic across repetitions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QqResult {
    /// 1-based feature label.
    pub feature: usize,
    pub variant: Variant,
    /// The signed `(transform 0, block 0)` component per repetition, which is
    /// the statistic itself for basic, imbalanced and conditioning.
    pub statistics: Vec<f64>,
    pub ks: KsResult,
    pub mean: f64,
    pub sd: f64,
}

impl QqResult {
    /// `(theoretical, empirical)` pairs at the normal quantiles
    /// `Φ⁻¹((i + 0.5) / n)`.
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        let mut sorted = self.statistics.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        sorted
            .into_iter()
            .enumerate()
            .map(|(i, e)| (norm_quantile((i as f64 + 0.5) / n), e))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "theoretical,empirical")?;
        for (t, e) in self.pairs() {
            writeln!(out, "{t},{e}")?;
        }
        Ok(())
    }
}

pub fn run_qq(spec: &SimulationSpec, cfg: &FactConfig, feature: usize) -> Result<QqResult> {
    Ok(run_qq_variants(spec, std::slice::from_ref(cfg), feature)?.remove(0))
}

/// [`run_qq`] for several configurations on the same data, sharing nuisance
/// forests where the configurations allow it.
pub fn run_qq_variants(spec: &SimulationSpec, cfgs: &[FactConfig], feature: usize) -> Result<Vec<QqResult>> {
    spec.validate()?;
    let j = column(spec, feature)?;
    let per_rep: Vec<Vec<f64>> = (0..spec.reps)
        .into_par_iter()
        .map(|rep| {
            let data = spec.generate(rep)?.data;
            let cfgs: Vec<FactConfig> = cfgs.iter().map(|c| rep_config(spec, c, rep)).collect();
            Ok(run_fact_variants(j, &data, &cfgs)?
                .iter()
                .map(|r| r.components[0].value)
                .collect())
        })
        .collect::<Result<_>>()?;
    cfgs.iter()
        .enumerate()
        .map(|(k, cfg)| {
            let statistics: Vec<f64> = per_rep.iter().map(|s| s[k]).collect();
            let ks = ks_test_normal(&statistics).ok_or(Error::InvalidReps)?;
            Ok(QqResult {
                feature,
                variant: cfg.variant,
                mean: mean(&statistics),
                sd: std_dev(&statistics),
                statistics,
                ks,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RmseReport {
    pub per_rep: Vec<f64>,
    pub mean: f64,
    pub test_points: usize,
}

impl RmseReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "rep,rmse")?;
        for (r, v) in self.per_rep.iter().enumerate() {
            writeln!(out, "{r},{v}")?;
        }
        writeln!(out, "mean,{}", self.mean)?;
        Ok(())
    }
}

/// Out-of-sample RMSE of a forest on all features against the noiseless
/// Friedman mean, on fresh test points from the same feature law.
pub fn rmse_diagnostic(spec: &SimulationSpec, fp: &ForestParams, test_points: usize) -> Result<RmseReport> {
    rmse_with(spec, fp, test_points, friedman_mean)
}

/// [`rmse_diagnostic`] for another regression function of the raw row.
/// Noise-free designs (`sigma = 0`) are accepted.
pub fn rmse_with(
    spec: &SimulationSpec,
    fp: &ForestParams,
    test_points: usize,
    m: impl Fn(&[f64]) -> f64 + Sync,
) -> Result<RmseReport> {
    if spec.sigma == 0.0 {
        SimulationSpec { sigma: 1.0, ..spec.clone() }.validate()?;
    } else {
        spec.validate()?;
    }
    if test_points == 0 {
        return Err(Error::param("test_points", "must be positive"));
    }
    let per_rep = (0..spec.reps)
        .into_par_iter()
        .map(|rep| {
            let sample = spec.generate_with(rep, &m)?;
            let rep_seed = spec.rep_seed(rep);
            let forest = RegressionForest::fit(&sample.data, fp, derive_seed(rep_seed, &[tag::FULL_FOREST]))?;
            let raw = gen_features(test_points, spec.p, spec.lambda, derive_seed(rep_seed, &[tag::TEST_POINTS]))?;
            let (kept, p_kept) = spec.keep_columns(&raw);
            let mut sse = 0.0;
            for (full, row) in raw.chunks_exact(spec.p).zip(kept.chunks_exact(p_kept)) {
                let pred = forest.predict(&sample.scaler.scale_row(row))?;
                sse += (m(full) - pred).powi(2);
            }
            Ok((sse / test_points as f64).sqrt())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(RmseReport {
        mean: mean(&per_rep),
        per_rep,
        test_points,
    })
}
