use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::ForestParams;

/// Significance levels reported with every test.
pub const DEFAULT_ALPHAS: [f64; 3] = [0.1, 0.05, 0.025];

/// Feature transformation `g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Identity,
    /// `(x - x̄)²`, where `x̄` is the mean of the sample being transformed.
    CenteredSquare,
}

impl Transform {
    pub fn name(self) -> &'static str {
        match self {
            Transform::Identity => "identity",
            Transform::CenteredSquare => "centered_square",
        }
    }

    /// Transform a sample, centering with that sample's own mean.
    pub fn apply(self, x: &[f64]) -> Vec<f64> {
        match self {
            Transform::Identity => x.to_vec(),
            Transform::CenteredSquare => {
                let m = crate::stats::mean(x);
                x.iter().map(|v| (v - m) * (v - m)).collect()
            }
        }
    }

    /// Transform a single value given the centering mean.
    pub fn eval(self, x: f64, center: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::CenteredSquare => (x - center) * (x - center),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Basic,
    Imbalanced,
    Conditioning,
    Ensemble,
    General,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Basic => "basic",
            Variant::Imbalanced => "imbalanced",
            Variant::Conditioning => "conditioning",
            Variant::Ensemble => "ensemble",
            Variant::General => "general",
        }
    }

    /// Variants that combine several transforms.
    pub fn uses_all_transforms(self) -> bool {
        matches!(self, Variant::Ensemble | Variant::General)
    }

    /// Variants that center the transform by a forest estimate of
    /// `E[g(X_j) | X_{-j}]`.
    pub fn conditions(self) -> bool {
        matches!(self, Variant::Conditioning | Variant::General)
    }
}

/// Where the nuisance forests are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitMode {
    /// Random split; the forests see `train_fraction` of the rows.
    SampleSplit { train_fraction: f64 },
    /// Out-of-bag predictions on the full sample.
    Oob,
    /// Training and inference samples were passed in directly.
    Provided,
}

impl Default for SplitMode {
    fn default() -> Self {
        SplitMode::Oob
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FactConfig {
    pub variant: Variant,
    /// Ordered transform list. Single-transform variants use the first entry.
    pub transforms: Vec<Transform>,
    /// Number of inference blocks for the general variant; `None` picks
    /// `max(1, round(ln(n) / 2))` from the inference size.
    pub k_n: Option<usize>,
    pub split_mode: SplitMode,
    /// Inference size override for the imbalanced variant.
    pub inference_size: Option<usize>,
    pub forest: ForestParams,
    pub seed: u64,
}

impl Default for FactConfig {
    fn default() -> Self {
        Self {
            variant: Variant::General,
            transforms: vec![Transform::Identity, Transform::CenteredSquare],
            k_n: None,
            split_mode: SplitMode::Oob,
            inference_size: None,
            forest: ForestParams::default(),
            seed: 0,
        }
    }
}

impl FactConfig {
    pub(crate) fn provided(
        variant: Variant,
        transforms: Vec<Transform>,
        fp: &ForestParams,
        seed: u64,
    ) -> Self {
        Self {
            variant,
            transforms,
            split_mode: SplitMode::Provided,
            forest: fp.clone(),
            seed,
            ..Self::default()
        }
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_transforms(mut self, transforms: Vec<Transform>) -> Self {
        self.transforms = transforms;
        self
    }

    pub fn with_k_n(mut self, k_n: usize) -> Self {
        self.k_n = Some(k_n);
        self
    }

    pub fn with_split_mode(mut self, mode: SplitMode) -> Self {
        self.split_mode = mode;
        self
    }

    pub fn with_forest(mut self, forest: ForestParams) -> Self {
        self.forest = forest;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// The transforms this variant actually evaluates.
    pub fn active_transforms(&self) -> &[Transform] {
        if self.variant.uses_all_transforms() {
            &self.transforms
        } else {
            &self.transforms[..self.transforms.len().min(1)]
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.transforms.is_empty() {
            return Err(Error::param("transforms", "at least one transform is required"));
        }
        if self.k_n == Some(0) {
            return Err(Error::param("k_n", "must be at least 1"));
        }
        if let SplitMode::SampleSplit { train_fraction } = self.split_mode {
            if !(train_fraction > 0.0 && train_fraction < 1.0) {
                return Err(Error::param(
                    "train_fraction",
                    format!("{train_fraction} is outside (0, 1)"),
                ));
            }
        }
        if self.inference_size.is_some() && self.variant != Variant::Imbalanced {
            return Err(Error::param(
                "inference_size",
                "only the imbalanced variant takes an inference size",
            ));
        }
        self.forest.validate()
    }
}
