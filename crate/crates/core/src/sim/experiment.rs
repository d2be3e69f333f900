//! JSON experiment configuration shared with the command-line tool.
//!
//! ```json
//! {
//!   "seed": 0,
//!   "fact": { "variant": "general" },
//!   "experiments": [
//!     { "kind": "size_power", "design": { "case": "I", "reps": 20 } },
//!     { "kind": "qq", "design": { "n": 200, "p": 200, "lambda": 0.0, "sigma": 5.0 }, "feature": 12 }
//!   ]
//! }
//! ```

use serde::{Deserialize, Serialize};

use super::runners::{
    rmse_diagnostic, run_qq, run_size_power, run_spurious, Comparison, ScoreMethod,
    DEFAULT_TEST_POINTS, SPURIOUS_COMPARISONS, SIZE_POWER_FEATURES,
};
use super::SimulationSpec;
use crate::error::{Error, Result};
use crate::fact::{FactConfig, DEFAULT_ALPHAS};
use crate::importance::DEFAULT_REPS;

/// A simulation design: a named size/power case, explicit settings, or a
/// named case with some settings overridden.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignSpec {
    /// One of the cases "I" to "VI".
    pub case: Option<String>,
    pub n: Option<usize>,
    pub p: Option<usize>,
    pub lambda: Option<f64>,
    pub sigma: Option<f64>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub reduced: Option<bool>,
    pub label: Option<String>,
}

impl DesignSpec {
    /// Resolve against the named case; `root_seed` is used unless the design
    /// sets its own.
    pub fn resolve(&self, root_seed: u64) -> Result<SimulationSpec> {
        let mut spec = match &self.case {
            Some(case) => SimulationSpec::size_power_case(case)
                .ok_or_else(|| Error::param("case", format!("unknown case `{case}`; use I to VI")))?,
            None => {
                let missing = |name: &'static str| Error::param(name, "required when no case is named");
                let mut spec = SimulationSpec::new(
                    self.n.ok_or_else(|| missing("n"))?,
                    self.p.ok_or_else(|| missing("p"))?,
                    self.lambda.ok_or_else(|| missing("lambda"))?,
                    self.sigma.ok_or_else(|| missing("sigma"))?,
                    100,
                    root_seed,
                );
                spec.case_label = format!("n{}_p{}_l{}", spec.n, spec.p, spec.lambda);
                spec
            }
        };
        spec.n = self.n.unwrap_or(spec.n);
        spec.p = self.p.unwrap_or(spec.p);
        spec.lambda = self.lambda.unwrap_or(spec.lambda);
        spec.sigma = self.sigma.unwrap_or(spec.sigma);
        spec.reps = self.reps.unwrap_or(spec.reps);
        spec.seed = self.seed.unwrap_or(root_seed);
        spec.reduced = self.reduced.unwrap_or(spec.reduced);
        if let Some(label) = &self.label {
            spec.case_label = label.clone();
        }
        Ok(spec)
    }
}

fn default_alphas() -> Vec<f64> {
    DEFAULT_ALPHAS.to_vec()
}

fn default_features() -> Vec<usize> {
    SIZE_POWER_FEATURES.to_vec()
}

fn default_methods() -> Vec<ScoreMethod> {
    ScoreMethod::ALL.to_vec()
}

fn default_comparisons() -> Vec<Comparison> {
    SPURIOUS_COMPARISONS.to_vec()
}

fn default_permutation_reps() -> usize {
    DEFAULT_REPS
}

fn default_qq_feature() -> usize {
    12
}

fn default_test_points() -> usize {
    DEFAULT_TEST_POINTS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    SizePower {
        design: DesignSpec,
        #[serde(default = "default_alphas")]
        alphas: Vec<f64>,
        #[serde(default = "default_features")]
        features: Vec<usize>,
        #[serde(default)]
        name: Option<String>,
    },
    Spurious {
        design: DesignSpec,
        #[serde(default = "default_methods")]
        methods: Vec<ScoreMethod>,
        #[serde(default = "default_comparisons")]
        comparisons: Vec<Comparison>,
        #[serde(default = "default_permutation_reps")]
        permutation_reps: usize,
        #[serde(default)]
        name: Option<String>,
    },
    Qq {
        design: DesignSpec,
        #[serde(default = "default_qq_feature")]
        feature: usize,
        #[serde(default)]
        name: Option<String>,
    },
    Rmse {
        design: DesignSpec,
        #[serde(default = "default_test_points")]
        test_points: usize,
        #[serde(default)]
        name: Option<String>,
    },
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::SizePower { .. } => "size_power",
            Self::Spurious { .. } => "spurious",
            Self::Qq { .. } => "qq",
            Self::Rmse { .. } => "rmse",
        }
    }

    fn design(&self) -> &DesignSpec {
        match self {
            Self::SizePower { design, .. }
            | Self::Spurious { design, .. }
            | Self::Qq { design, .. }
            | Self::Rmse { design, .. } => design,
        }
    }

    fn explicit_name(&self) -> Option<&str> {
        match self {
            Self::SizePower { name, .. }
            | Self::Spurious { name, .. }
            | Self::Qq { name, .. }
            | Self::Rmse { name, .. } => name.as_deref(),
        }
    }
}

/// One finished experiment: a CSV body and a one-line summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    /// File stem for the table.
    pub name: String,
    pub csv: Vec<u8>,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root seed of every design that does not set its own.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub fact: FactConfig,
    pub experiments: Vec<Experiment>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Resolved designs and unique output names, checked before any work.
    pub fn plan(&self) -> Result<Vec<(String, SimulationSpec)>> {
        if self.experiments.is_empty() {
            return Err(Error::param("experiments", "no experiments listed"));
        }
        self.fact.validate()?;
        let mut plan: Vec<(String, SimulationSpec)> = Vec::with_capacity(self.experiments.len());
        for exp in &self.experiments {
            let spec = exp.design().resolve(self.seed)?;
            if matches!(exp, Experiment::Rmse { .. }) && spec.sigma == 0.0 {
                SimulationSpec { sigma: 1.0, ..spec.clone() }.validate()?;
            } else {
                spec.validate()?;
            }
            let name = match exp.explicit_name() {
                Some(n) => n.to_string(),
                None => format!("{}_{}", exp.kind(), spec.case_label),
            };
            if plan.iter().any(|(n, _)| *n == name) {
                return Err(Error::param(
                    "name",
                    format!("two experiments write `{name}`; give one an explicit name"),
                ));
            }
            plan.push((name, spec));
        }
        Ok(plan)
    }

    /// Run every experiment in order.
    pub fn run(&self) -> Result<Vec<ExperimentOutput>> {
        let plan = self.plan()?;
        self.experiments
            .iter()
            .zip(plan)
            .map(|(exp, (name, spec))| run_experiment(exp, &spec, &self.fact, name))
            .collect()
    }
}

fn run_experiment(
    exp: &Experiment,
    spec: &SimulationSpec,
    cfg: &FactConfig,
    name: String,
) -> Result<ExperimentOutput> {
    let mut csv = Vec::new();
    let summary = match exp {
        Experiment::SizePower { alphas, features, .. } => {
            let table = run_size_power(spec, cfg, alphas, features)?;
            table.write_csv(&mut csv)?;
            let first: Vec<String> = table
                .features
                .iter()
                .zip(&table.rates[0])
                .map(|(f, r)| format!("X{f}={r:.2}"))
                .collect();
            format!("alpha={}: {}", table.alphas[0], first.join(" "))
        }
        Experiment::Spurious {
            methods,
            comparisons,
            permutation_reps,
            ..
        } => {
            let table = run_spurious(spec, cfg, methods, comparisons, *permutation_reps)?;
            table.write_csv(&mut csv)?;
            let parts: Vec<String> = table
                .rows
                .iter()
                .map(|r| {
                    format!(
                        "{}[X{}>X{}]={:.2}",
                        r.method, r.comparison.null, r.comparison.relevant, r.fraction
                    )
                })
                .collect();
            parts.join(" ")
        }
        Experiment::Qq { feature, .. } => {
            let qq = run_qq(spec, cfg, *feature)?;
            qq.write_csv(&mut csv)?;
            format!(
                "X{feature}: mean={:.3} sd={:.3} ks={:.3} (p={:.3})",
                qq.mean, qq.sd, qq.ks.statistic, qq.ks.p_value
            )
        }
        Experiment::Rmse { test_points, .. } => {
            let report = rmse_diagnostic(spec, &cfg.forest, *test_points)?;
            report.write_csv(&mut csv)?;
            format!("rmse={:.3}", report.mean)
        }
    };
    Ok(ExperimentOutput {
        summary: format!("{name} ({} reps): {summary}", spec.reps),
        name,
        csv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_case_with_overrides() {
        let design = DesignSpec {
            case: Some("II".into()),
            reps: Some(5),
            ..Default::default()
        };
        let spec = design.resolve(9).unwrap();
        assert_eq!((spec.n, spec.p, spec.lambda, spec.sigma), (300, 200, 0.6, 5.0));
        assert_eq!((spec.reps, spec.seed, spec.case_label.as_str()), (5, 9, "II"));
        assert!(DesignSpec { case: Some("VII".into()), ..Default::default() }.resolve(0).is_err());
        assert!(DesignSpec { n: Some(10), ..Default::default() }.resolve(0).is_err());
    }

    #[test]
    fn config_defaults_and_unknown_fields() {
        let cfg = ExperimentConfig::from_json(
            r#"{"experiments":[{"kind":"size_power","design":{"case":"I"}}]}"#,
        )
        .unwrap();
        match &cfg.experiments[0] {
            Experiment::SizePower { alphas, features, .. } => {
                assert_eq!(alphas.len(), 3);
                assert_eq!(features.len(), 8);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(cfg.plan().unwrap()[0].0, "size_power_I");
        assert!(ExperimentConfig::from_json(
            r#"{"experiments":[{"kind":"size_power","design":{"case":"I"},"alpha":0.1}]}"#
        )
        .is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiments":[],"extra":1}"#).is_err());
    }

    #[test]
    fn plan_rejects_zero_reps_and_duplicate_names() {
        let zero = ExperimentConfig::from_json(
            r#"{"experiments":[{"kind":"qq","design":{"case":"I","reps":0}}]}"#,
        )
        .unwrap();
        assert!(matches!(zero.plan(), Err(Error::InvalidReps)));
        let dup = ExperimentConfig::from_json(
            r#"{"experiments":[{"kind":"qq","design":{"case":"I"}},{"kind":"qq","design":{"case":"I"}}]}"#,
        )
        .unwrap();
        assert!(dup.plan().is_err());
        let empty = ExperimentConfig::from_json(r#"{"experiments":[]}"#).unwrap();
        assert!(empty.plan().is_err());
    }
}
