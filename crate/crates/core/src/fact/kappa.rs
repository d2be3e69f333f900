//! Monte Carlo values of the population signal `κ` for additive models.
//!
//! For `Y = h(X_j) + H(X_{-j}) + ε` with independent features,
//! `Y - E(Y | X_{-j}) = h(X_j) - E h(X_j) + ε`, so
//! `κ = E[(h(X_j) - E h)(g(X_j) - E g)]`. Independence also makes
//! `E[g(X_j) | X_{-j}] = E g(X_j)`, so the conditional and marginal versions
//! coincide for this family.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Transform;
use crate::error::{Error, Result};
use crate::rng::rng_for;

pub const MIN_MC_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureLaw {
    /// Independent `U[0, 1]` features.
    UniformIid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationKappa {
    pub kappa_marginal: f64,
    pub kappa_conditional: f64,
    pub mc_samples: usize,
    pub mc_stderr: f64,
}

pub fn kappa_oracle(
    h: impl Fn(f64) -> f64,
    g: Transform,
    law: FeatureLaw,
    mc_samples: usize,
    seed: u64,
) -> Result<PopulationKappa> {
    if mc_samples < MIN_MC_SAMPLES {
        return Err(Error::param(
            "mc_samples",
            format!("need at least {MIN_MC_SAMPLES}, got {mc_samples}"),
        ));
    }
    let FeatureLaw::UniformIid = law;
    let eh = simpson(&h);
    // Population mean of U[0, 1] is 1/2; Var = 1/12.
    let (center, eg) = match g {
        Transform::Identity => (0.5, 0.5),
        Transform::CenteredSquare => (0.5, 1.0 / 12.0),
    };
    let mut rng = rng_for(seed, &[]);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..mc_samples {
        let u: f64 = rng.gen();
        let v = (h(u) - eh) * (g.eval(u, center) - eg);
        sum += v;
        sum_sq += v * v;
    }
    let m = mc_samples as f64;
    let kappa = sum / m;
    let var = (sum_sq - m * kappa * kappa) / (m - 1.0);
    Ok(PopulationKappa {
        kappa_marginal: kappa,
        kappa_conditional: kappa,
        mc_samples,
        mc_stderr: (var.max(0.0) / m).sqrt(),
    })
}

/// `∫₀¹ f` by composite Simpson.
fn simpson(f: impl Fn(f64) -> f64) -> f64 {
    const N: usize = 1 << 14;
    let h = 1.0 / N as f64;
    let mut acc = f(0.0) + f(1.0);
    for i in 1..N {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(i as f64 * h);
    }
    acc * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kappa(h: impl Fn(f64) -> f64, g: Transform) -> PopulationKappa {
        kappa_oracle(h, g, FeatureLaw::UniformIid, 200_000, 3).unwrap()
    }

    #[test]
    fn quadratic_closed_form() {
        for a in [0.0, 0.25, 0.5, 1.0] {
            let k = kappa(|x| (x - a) * (x - a), Transform::Identity);
            let exact = 1.0 / 12.0 - a / 6.0;
            assert!((k.kappa_marginal - exact).abs() < 3.0 * k.mc_stderr, "a={a}: {k:?}");
            assert_eq!(k.kappa_marginal, k.kappa_conditional);
        }
    }

    #[test]
    fn square_transform_sees_symmetric_bowl() {
        // h = (x - 1/2)² is invisible to the identity transform but has
        // κ = Var((U - 1/2)²) = 1/80 - 1/144 = 1/180 for the square.
        let k = kappa(|x| (x - 0.5) * (x - 0.5), Transform::CenteredSquare);
        assert!((k.kappa_marginal - 1.0 / 180.0).abs() < 3.0 * k.mc_stderr);
    }

    #[test]
    fn polynomial_signal_lower_bound() {
        let h = |x: f64| x + x * x;
        let total = kappa(h, Transform::Identity).kappa_marginal.abs()
            + kappa(h, Transform::CenteredSquare).kappa_marginal.abs();
        assert!((total - (1.0 / 6.0 + 1.0 / 180.0)).abs() < 2e-3);
        assert!(total >= 0.001 * 2.0);
    }

    #[test]
    fn monotone_signal_is_positive() {
        for h in [f64::exp, |x: f64| x.powi(3), |x: f64| (5.0 * x).tanh()] {
            let k = kappa(h, Transform::Identity);
            assert!(k.kappa_marginal > 3.0 * k.mc_stderr);
        }
    }

    #[test]
    fn too_few_samples() {
        assert!(kappa_oracle(|x| x, Transform::Identity, FeatureLaw::UniformIid, 100, 0).is_err());
    }

    #[test]
    fn simpson_is_exact_for_cubics() {
        assert!((simpson(|x| x * x * x) - 0.25).abs() < 1e-15);
    }
}
