//! Pure statistic arithmetic: self-normalized sums, p-values, thresholds and
//! the random inference partition.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Variant;
use crate::error::{Error, Result};
use crate::rng::{rng_for, tag};
use crate::stats::{norm_quantile, norm_sf};

/// Number of transforms `|L|` and inference blocks `|Q|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sizes {
    pub transforms: usize,
    pub blocks: usize,
}

impl Sizes {
    pub fn single() -> Self {
        Self {
            transforms: 1,
            blocks: 1,
        }
    }
}

/// `max(1, round(ln(n) / 2))`.
pub fn default_k_n(n: usize) -> usize {
    ((n.max(1) as f64).ln() / 2.0).round().max(1.0) as usize
}

/// Inference size of the imbalanced split for a sample of `total` rows:
/// `round(total / ln total)`.
pub fn imbalanced_inference_size(total: usize) -> usize {
    if total < 3 {
        return 0;
    }
    (total as f64 / (total as f64).ln()).round() as usize
}

/// Rejection threshold on the statistic's absolute value at level `alpha`.
pub fn threshold(alpha: f64, variant: Variant, sizes: Sizes) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    let tail = alpha / multiplier(variant, sizes);
    Ok(-norm_quantile(tail))
}

/// Conservative p-value for an observed statistic.
pub fn p_value(stat: f64, variant: Variant, sizes: Sizes) -> f64 {
    (multiplier(variant, sizes) * norm_sf(stat.abs())).min(1.0)
}

fn multiplier(variant: Variant, sizes: Sizes) -> f64 {
    match variant {
        Variant::Basic | Variant::Imbalanced | Variant::Conditioning => 2.0,
        Variant::Ensemble => 2.0 * sizes.transforms as f64,
        Variant::General => 4.0 * sizes.blocks as f64,
    }
}

/// Split `0..n` into `k` blocks: Fisher-Yates shuffle from `seed`, then
/// contiguous chunks whose sizes differ by at most one. Indices within a
/// block are sorted.
pub fn partition(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k == 0 {
        return Err(Error::param("k_n", "must be at least 1"));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    if k > 1 {
        idx.shuffle(&mut rng_for(seed, &[tag::PARTITION]));
    }
    let base = n / k;
    let extra = n % k;
    let mut blocks = Vec::with_capacity(k);
    let mut start = 0;
    for q in 0..k {
        let len = base + usize::from(q < extra);
        if len < 2 {
            return Err(Error::PartitionTooSmall { block: q, size: len });
        }
        let mut block = idx[start..start + len].to_vec();
        block.sort_unstable();
        blocks.push(block);
        start += len;
    }
    Ok(blocks)
}

/// Block statistics `Σ_{i∈N_q} d_i / (|N_q|^{1/2} σ̂)` sharing one scale.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSum {
    pub block_stats: Vec<f64>,
    /// `σ̂² = n⁻¹ Σ (d_i - d̄)²` over all rows.
    pub sigma: f64,
}

/// Self-normalize the products `d` over the given blocks.
///
/// Fails with `DegenerateVariance` when `σ̂` is zero or negligible relative
/// to the size of `d` (all products equal up to rounding).
pub fn normalized_sum(d: &[f64], blocks: &[Vec<usize>]) -> Result<NormalizedSum> {
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sigma = var.sqrt();
    let rms = (d.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    if !(sigma > 1e-12 * rms) {
        return Err(Error::DegenerateVariance {
            transform: String::new(),
        });
    }
    let block_stats = blocks
        .iter()
        .map(|b| b.iter().map(|&i| d[i]).sum::<f64>() / ((b.len() as f64).sqrt() * sigma))
        .collect();
    Ok(NormalizedSum { block_stats, sigma })
}
