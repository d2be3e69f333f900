//! The FACT test family.
//!
//! Every variant is built from the same ingredients: residuals
//! `Y_i - Ŷ(X_{-ij})` from a forest that never sees feature `j`, a transformed
//! feature `g(X_ij)`, and a centering term (the inference-sample mean, or a
//! forest estimate `ĝ(X_{-ij})` when conditioning). The products are summed and
//! self-normalized by their own standard deviation.
//!
//! Nuisance forests are estimated either on a separate training sample or
//! from out-of-bag predictions on the full sample.

mod config;
mod kappa;
mod nuisance;
mod statistic;

pub use config::{FactConfig, SplitMode, Transform, Variant, DEFAULT_ALPHAS};
pub use kappa::{kappa_oracle, FeatureLaw, PopulationKappa};
pub use nuisance::split_sample;
pub use statistic::{
    default_k_n, imbalanced_inference_size, normalized_sum, p_value, partition, threshold,
    NormalizedSum, Sizes,
};

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::forest::ForestParams;
use nuisance::Nuisance;

/// Smallest inference sample any variant accepts.
pub const MIN_INFERENCE_ROWS: usize = 5;
/// Smallest inference sample after an imbalanced split.
pub const MIN_IMBALANCED_ROWS: usize = 10;

/// One `(transform, block)` statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    /// Index into the transform list.
    pub l: usize,
    /// Partition block (0 for unpartitioned variants).
    pub q: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaThreshold {
    pub alpha: f64,
    pub threshold: f64,
}

/// Outcome of one test of one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactReport {
    /// Zero-based column index.
    pub feature: usize,
    pub feature_name: String,
    pub variant: Variant,
    /// Signed statistic for basic, imbalanced and conditioning; the maximum
    /// absolute component for ensemble and general.
    pub stat: f64,
    pub p_value: f64,
    pub components: Vec<Component>,
    /// Self-normalizing scale per transform.
    pub sigma_hats: Vec<f64>,
    /// Inference rows that entered the sums.
    pub n_effective: usize,
    pub thresholds: Vec<AlphaThreshold>,
    pub config_echo: FactConfig,
}

impl FactReport {
    pub fn rejects(&self, alpha: f64) -> Result<bool> {
        let sizes = self.sizes();
        Ok(self.stat.abs() > threshold(alpha, self.variant, sizes)?)
    }

    pub fn sizes(&self) -> Sizes {
        Sizes {
            transforms: self.sigma_hats.len(),
            blocks: self.components.iter().map(|c| c.q + 1).max().unwrap_or(1),
        }
    }
}

/// Basic test on caller-supplied training and inference samples.
pub fn fact_basic(
    j: usize,
    train: &Dataset,
    infer: &Dataset,
    g: Transform,
    fp: &ForestParams,
    seed: u64,
) -> Result<FactReport> {
    let cfg = FactConfig::provided(Variant::Basic, vec![g], fp, seed);
    let nuisance = Nuisance::from_split(j, train, infer, &cfg.transforms, false, fp, seed)?;
    assemble(j, infer, &cfg, &nuisance)
}

/// Conditioning test on caller-supplied samples: the transform is centered by
/// a forest estimate of `E[g(X_j) | X_{-j}]` fit on the training sample.
pub fn fact_conditioning(
    j: usize,
    train: &Dataset,
    infer: &Dataset,
    g: Transform,
    fp: &ForestParams,
    seed: u64,
) -> Result<FactReport> {
    let cfg = FactConfig::provided(Variant::Conditioning, vec![g], fp, seed);
    let nuisance = Nuisance::from_split(j, train, infer, &cfg.transforms, true, fp, seed)?;
    assemble(j, infer, &cfg, &nuisance)
}

/// Ensemble of basic statistics over several transforms.
pub fn fact_ensemble(
    j: usize,
    train: &Dataset,
    infer: &Dataset,
    transforms: &[Transform],
    fp: &ForestParams,
    seed: u64,
) -> Result<FactReport> {
    let cfg = FactConfig::provided(Variant::Ensemble, transforms.to_vec(), fp, seed);
    cfg.validate()?;
    let nuisance = Nuisance::from_split(j, train, infer, &cfg.transforms, false, fp, seed)?;
    assemble(j, infer, &cfg, &nuisance)
}

/// Basic statistic on an imbalanced split of `full`: the inference sample
/// has `round(T / ln T)` rows unless `cfg.inference_size` overrides it.
pub fn fact_imbalanced(j: usize, full: &Dataset, cfg: &FactConfig) -> Result<FactReport> {
    let cfg = FactConfig {
        variant: Variant::Imbalanced,
        ..cfg.clone()
    };
    run_fact(j, full, &cfg)
}

/// General test: max over transforms and inference blocks.
pub fn fact_general(j: usize, full: &Dataset, cfg: &FactConfig) -> Result<FactReport> {
    let cfg = FactConfig {
        variant: Variant::General,
        ..cfg.clone()
    };
    run_fact(j, full, &cfg)
}

/// Run `cfg.variant` for feature `j` on a single sample, splitting it or
/// using out-of-bag estimates according to `cfg.split_mode`.
pub fn run_fact(j: usize, full: &Dataset, cfg: &FactConfig) -> Result<FactReport> {
    let mut reports = run_fact_variants(j, full, std::slice::from_ref(cfg))?;
    Ok(reports.remove(0))
}

/// Run several configurations for feature `j`, fitting each nuisance forest
/// once per group of configurations that agree on split mode, inference
/// size, forest settings and seed.
///
/// Forests are seeded by feature and transform kind, so every report equals
/// the one `run_fact` gives for the same configuration. In OOB mode the one
/// exception is a row that lacks an OOB estimate in a forest only some
/// configurations need: it is dropped for the whole group.
pub fn run_fact_variants(j: usize, full: &Dataset, cfgs: &[FactConfig]) -> Result<Vec<FactReport>> {
    struct Group<'a> {
        lead: &'a FactConfig,
        n_infer: Option<usize>,
        transforms: Vec<Transform>,
        conditioning: bool,
        members: Vec<usize>,
    }

    full.check_feature(j)?;
    let mut groups: Vec<Group> = Vec::new();
    for (i, cfg) in cfgs.iter().enumerate() {
        cfg.validate()?;
        let n_infer = inference_rows(cfg, full.n())?;
        let pos = groups.iter().position(|g| {
            g.n_infer == n_infer
                && g.lead.split_mode == cfg.split_mode
                && g.lead.forest == cfg.forest
                && g.lead.seed == cfg.seed
        });
        let group = match pos {
            Some(k) => &mut groups[k],
            None => {
                groups.push(Group {
                    lead: cfg,
                    n_infer,
                    transforms: Vec::new(),
                    conditioning: false,
                    members: Vec::new(),
                });
                groups.last_mut().expect("just pushed")
            }
        };
        for g in cfg.active_transforms() {
            if !group.transforms.contains(g) {
                group.transforms.push(*g);
            }
        }
        group.conditioning |= cfg.variant.conditions();
        group.members.push(i);
    }

    let mut reports: Vec<Option<FactReport>> = vec![None; cfgs.len()];
    for group in &groups {
        let (fp, seed) = (&group.lead.forest, group.lead.seed);
        let nuisance = match group.n_infer {
            None => Nuisance::from_oob(j, full, &group.transforms, group.conditioning, fp, seed)?,
            Some(n_infer) => {
                let (train, infer) = split_sample(full, full.n() - n_infer, seed)?;
                Nuisance::from_split(j, &train, &infer, &group.transforms, group.conditioning, fp, seed)?
            }
        };
        for &i in &group.members {
            let cfg = &cfgs[i];
            let own = nuisance.project(&group.transforms, cfg.active_transforms(), cfg.variant.conditions());
            reports[i] = Some(assemble(j, full, cfg, &own)?);
        }
    }
    Ok(reports.into_iter().flatten().collect())
}

/// Inference sample size under a sample split, `None` in OOB mode.
fn inference_rows(cfg: &FactConfig, n: usize) -> Result<Option<usize>> {
    match cfg.split_mode {
        SplitMode::Oob => {
            check_inference_size(cfg, n)?;
            Ok(None)
        }
        SplitMode::SampleSplit { train_fraction } => {
            let n_infer = match cfg.variant {
                Variant::Imbalanced => cfg
                    .inference_size
                    .unwrap_or_else(|| imbalanced_inference_size(n)),
                _ => n - (train_fraction * n as f64).round() as usize,
            };
            check_inference_size(cfg, n_infer)?;
            if n_infer >= n {
                return Err(Error::param("train_fraction", "leaves no training rows"));
            }
            Ok(Some(n_infer))
        }
        SplitMode::Provided => Err(Error::param(
            "split_mode",
            "`provided` is only valid when train and inference samples are passed directly",
        )),
    }
}

fn check_inference_size(cfg: &FactConfig, n_infer: usize) -> Result<()> {
    let floor = if cfg.variant == Variant::Imbalanced {
        MIN_IMBALANCED_ROWS
    } else {
        MIN_INFERENCE_ROWS
    };
    if n_infer < floor {
        return Err(Error::InferenceTooSmall {
            needed: floor,
            got: n_infer,
        });
    }
    if cfg.variant == Variant::General {
        let k = cfg.k_n.unwrap_or_else(|| default_k_n(n_infer));
        if k >= n_infer {
            return Err(Error::param(
                "k_n",
                format!("{k} blocks need more than {n_infer} inference rows"),
            ));
        }
    }
    Ok(())
}

fn assemble(j: usize, data: &Dataset, cfg: &FactConfig, nu: &Nuisance) -> Result<FactReport> {
    let n = nu.residuals.len();
    let transforms = cfg.active_transforms();
    let mut components = Vec::new();
    let mut sigma_hats = Vec::with_capacity(transforms.len());
    let blocks = match cfg.variant {
        Variant::General => {
            let k = cfg.k_n.unwrap_or_else(|| default_k_n(n));
            partition(n, k, cfg.seed)?
        }
        _ => vec![(0..n).collect()],
    };
    for (l, g) in transforms.iter().enumerate() {
        let centered: Vec<f64> = match &nu.fitted[l] {
            Some(fit) => nu.transformed[l].iter().zip(fit).map(|(a, b)| a - b).collect(),
            None => {
                let m = crate::stats::mean(&nu.transformed[l]);
                nu.transformed[l].iter().map(|v| v - m).collect()
            }
        };
        let d: Vec<f64> = nu.residuals.iter().zip(&centered).map(|(r, c)| r * c).collect();
        let sum = normalized_sum(&d, &blocks).map_err(|e| match e {
            Error::DegenerateVariance { .. } => Error::DegenerateVariance {
                transform: g.name().to_string(),
            },
            other => other,
        })?;
        sigma_hats.push(sum.sigma);
        components.extend(sum.block_stats.iter().enumerate().map(|(q, &value)| Component {
            l,
            q,
            value,
        }));
    }
    let sizes = Sizes {
        transforms: transforms.len(),
        blocks: blocks.len(),
    };
    let stat = match cfg.variant {
        Variant::Ensemble | Variant::General => {
            components.iter().map(|c| c.value.abs()).fold(0.0, f64::max)
        }
        _ => components[0].value,
    };
    let thresholds = DEFAULT_ALPHAS
        .iter()
        .map(|&alpha| {
            Ok(AlphaThreshold {
                alpha,
                threshold: threshold(alpha, cfg.variant, sizes)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(FactReport {
        feature: j,
        feature_name: data.feature_name(j),
        variant: cfg.variant,
        stat,
        p_value: p_value(stat, cfg.variant, sizes),
        components,
        sigma_hats,
        n_effective: n,
        thresholds,
        config_echo: cfg.clone(),
    })
}
