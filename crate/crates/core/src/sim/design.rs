//! Correlated-feature design and the Friedman-type response.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{ColumnScaler, Dataset};
use crate::error::{Error, Result};
use crate::rng::{rng_for, tag};

/// 1-based indices of the relevant features; each anchors a correlated
/// group `{j, j+1, j+2}`.
pub const RELEVANT: [usize; 5] = [1, 11, 21, 31, 41];

/// Smallest dimension that holds every correlated group.
pub const MIN_FULL_P: usize = 43;

/// Columns kept by the reduced ten-feature design (1-based labels).
pub const REDUCED_LABELS: [usize; 10] = [1, 2, 11, 12, 21, 22, 31, 32, 41, 42];

/// Population correlation between two features of one group.
pub fn group_correlation(lambda: f64) -> f64 {
    lambda * lambda / (1.0 - 2.0 * lambda + 2.0 * lambda * lambda)
}

/// Group anchor (1-based) of a 1-based feature label, if it is grouped.
fn group_anchor(label: usize) -> Option<usize> {
    RELEVANT
        .iter()
        .copied()
        .find(|&a| (a..a + 3).contains(&label))
}

/// Draw an `n × p` row-major matrix from the grouped design.
///
/// Grouped features are `(Z - 0.5)/sqrt(1 - 2λ + 2λ²) + 0.5` with
/// `Z = (1-λ)U_l + λU_shared`, so each has variance 1/12; the rest are iid
/// uniform. For λ > 0 grouped values can leave `[0, 1]`.
pub fn gen_features(n: usize, p: usize, lambda: f64, seed: u64) -> Result<Vec<f64>> {
    if p < MIN_FULL_P {
        return Err(Error::param(
            "p",
            format!("the grouped design needs p >= {MIN_FULL_P}, got {p}"),
        ));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::param("lambda", "must lie in [0, 1]"));
    }
    let scale = (1.0 - 2.0 * lambda + 2.0 * lambda * lambda).sqrt().recip();
    let mut rng = rng_for(seed, &[tag::FEATURES]);
    let mut out = vec![0.0; n * p];
    let mut own = vec![0.0; p];
    let mut shared = [0.0; RELEVANT.len()];
    for row in out.chunks_exact_mut(p) {
        for u in own.iter_mut() {
            *u = rng.gen::<f64>();
        }
        for s in shared.iter_mut() {
            *s = rng.gen::<f64>();
        }
        for (l, x) in row.iter_mut().enumerate() {
            let label = l + 1;
            *x = match group_anchor(label) {
                Some(anchor) => {
                    let g = RELEVANT.iter().position(|&a| a == anchor).unwrap();
                    let z = (1.0 - lambda) * own[l] + lambda * shared[g];
                    (z - 0.5) * scale + 0.5
                }
                None => own[l],
            };
        }
    }
    Ok(out)
}

/// Noiseless regression function `5x₁ + 10x₁₁ + 20(x₂₁-½)² + 10 sin(π x₃₁ x₄₁)`
/// on a raw (1-based-labelled) feature row.
pub fn friedman_mean(row: &[f64]) -> f64 {
    5.0 * row[0]
        + 10.0 * row[10]
        + 20.0 * (row[20] - 0.5).powi(2)
        + 10.0 * (std::f64::consts::PI * row[30] * row[40]).sin()
}

/// Response vector for a row-major raw matrix with Gaussian noise of sd `sigma`.
pub fn friedman_response(x: &[f64], p: usize, sigma: f64, seed: u64) -> Result<Vec<f64>> {
    if p < 41 {
        return Err(Error::param("p", format!("the response reads feature 41, got p = {p}")));
    }
    response_with(x, p, sigma, seed, friedman_mean)
}

/// `m(row) + sigma * eps` for every row of a row-major matrix.
pub fn response_with(
    x: &[f64],
    p: usize,
    sigma: f64,
    seed: u64,
    m: impl Fn(&[f64]) -> f64,
) -> Result<Vec<f64>> {
    if !(sigma >= 0.0) {
        return Err(Error::param("sigma", "must be non-negative"));
    }
    let mut rng = rng_for(seed, &[tag::NOISE]);
    Ok(x.chunks_exact(p)
        .map(|row| {
            let eps: f64 = StandardNormal.sample(&mut rng);
            m(row) + sigma * eps
        })
        .collect())
}

/// One experiment cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub n: usize,
    pub p: usize,
    pub lambda: f64,
    pub sigma: f64,
    pub reps: usize,
    pub seed: u64,
    #[serde(default)]
    pub case_label: String,
    /// Keep only the ten-column design (features 1, 2, 11, 12, ..., 41, 42).
    #[serde(default)]
    pub reduced: bool,
}

impl SimulationSpec {
    pub fn new(n: usize, p: usize, lambda: f64, sigma: f64, reps: usize, seed: u64) -> Self {
        Self {
            n,
            p,
            lambda,
            sigma,
            reps,
            seed,
            case_label: String::new(),
            reduced: false,
        }
    }

    pub fn labelled(mut self, label: impl Into<String>) -> Self {
        self.case_label = label.into();
        self
    }

    /// Settings of the size/power table cases I–VI (σ = 5, 100 repetitions).
    pub fn size_power_case(label: &str) -> Option<Self> {
        let (n, p, lambda, reduced) = match label {
            "I" => (300, 200, 0.3, false),
            "II" => (300, 200, 0.6, false),
            "III" => (500, 200, 0.6, false),
            "IV" => (500, 1000, 0.6, false),
            "V" => (500, 1000, 0.3, false),
            "VI" => (500, MIN_FULL_P, 0.6, true),
            _ => return None,
        };
        let mut spec = Self::new(n, p, lambda, 5.0, 100, 0).labelled(label);
        spec.reduced = reduced;
        Some(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidReps);
        }
        if self.n < 2 {
            return Err(Error::param("n", "need at least 2 rows"));
        }
        if self.p < MIN_FULL_P {
            return Err(Error::param(
                "p",
                format!("the grouped design needs p >= {MIN_FULL_P}; use `reduced` for ten columns"),
            ));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::param("sigma", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::param("lambda", "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Column index in the generated dataset of a 1-based feature label.
    pub fn column_of(&self, label: usize) -> Option<usize> {
        if self.reduced {
            REDUCED_LABELS.iter().position(|&l| l == label)
        } else {
            (1..=self.p).contains(&label).then(|| label - 1)
        }
    }

    pub fn rep_seed(&self, rep: usize) -> u64 {
        crate::rng::derive_seed(self.seed, &[tag::REPETITION, rep as u64])
    }

    /// Raw features, noiseless mean and scaled dataset for one repetition.
    pub fn generate(&self, rep: usize) -> Result<GeneratedSample> {
        self.generate_with(rep, friedman_mean)
    }

    /// Like [`generate`](Self::generate) with another regression function of
    /// the raw row. `sigma = 0` is allowed here.
    pub fn generate_with(&self, rep: usize, m: impl Fn(&[f64]) -> f64) -> Result<GeneratedSample> {
        let seed = self.rep_seed(rep);
        let raw = gen_features(self.n, self.p, self.lambda, seed)?;
        let y = response_with(&raw, self.p, self.sigma, seed, m)?;
        let (kept, p_out) = self.keep_columns(&raw);
        let (data, scaler) = Dataset::scaled_from_row_major(&kept, p_out, y)?;
        Ok(GeneratedSample { raw, data, scaler })
    }

    /// Project raw full-design rows onto the modelled columns.
    pub fn keep_columns(&self, raw: &[f64]) -> (Vec<f64>, usize) {
        if !self.reduced {
            return (raw.to_vec(), self.p);
        }
        let cols: Vec<usize> = REDUCED_LABELS.iter().map(|l| l - 1).collect();
        let kept = raw
            .chunks_exact(self.p)
            .flat_map(|row| cols.iter().map(move |&c| row[c]))
            .collect();
        (kept, cols.len())
    }
}

pub struct GeneratedSample {
    /// Unscaled full-design rows (row-major, `spec.p` columns).
    pub raw: Vec<f64>,
    pub data: Dataset,
    pub scaler: ColumnScaler,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn friedman_center_point() {
        let row = vec![0.5; 43];
        let expected = 2.5 + 5.0 + 0.0 + 10.0 * (std::f64::consts::PI / 4.0).sin();
        assert!((friedman_mean(&row) - expected).abs() < 1e-12);
        assert!((expected - 14.5711).abs() < 1e-4);
        let y = friedman_response(&[row.clone(), row].concat(), 43, 0.0, 3).unwrap();
        assert_eq!(y[0], y[1]);
    }

    #[test]
    fn layout_errors() {
        assert!(gen_features(10, 42, 0.3, 0).is_err());
        assert!(friedman_response(&[0.0; 40], 40, 1.0, 0).is_err());
        assert!(SimulationSpec::new(10, 200, 0.3, 5.0, 0, 0).validate().is_err());
    }

    #[test]
    fn correlation_formula() {
        assert!((group_correlation(0.6) - 0.36 / 0.52).abs() < 1e-15);
        assert_eq!(group_correlation(0.0), 0.0);
    }

    #[test]
    fn reduced_design_maps_labels() {
        let spec = SimulationSpec::size_power_case("VI").unwrap();
        assert_eq!(spec.column_of(12), Some(3));
        assert_eq!(spec.column_of(3), None);
        let s = SimulationSpec { n: 20, ..spec }.generate(0).unwrap();
        assert_eq!(s.data.p(), 10);
    }
}
