//! Deterministic 32-dimensional shape featurizer for raw series.
//!
//! Feature blocks (see [`FeatureLayout`]):
//!
//! | coords  | block                                                         |
//! |---------|---------------------------------------------------------------|
//! | 0..4    | level: (mean-min)/range, std/range, min/scale, max/scale      |
//! | 4       | least-squares slope of the min-max normalized series          |
//! | 5..13   | the same slope on 8 equal segments                            |
//! | 13..21  | autocorrelation at lags 1..=8                                 |
//! | 21..29  | log spectral energy share in 8 equal frequency bins           |
//! | 29      | large-jump count / (n - 1)                                    |
//! | 30      | fraction of strictly positive increments                      |
//! | 31      | (last - first) / range                                        |
//!
//! `range = max - min`, `scale = max(|min|, |max|)`. Every ratio with a zero
//! denominator is defined as 0. Coordinates 0, 1 and 4..32 are invariant under
//! `a·s + b` with `a > 0`.

use std::ops::Range;

use rustfft::{num_complex::Complex, FftPlanner};

use super::{l2_normalize, EmbeddingVector, BUILTIN_PROVIDER_TAG};
use crate::error::{Error, Result};
use crate::util::{jump_count, ls_slope, mean, std_dev};

pub const FEATURE_DIM: usize = 32;
const SEGMENTS: usize = 8;
const LAGS: usize = 8;
const SPECTRAL_BINS: usize = 8;
const MIN_LENGTH: usize = 8;

/// Coordinate ranges of each feature block.
pub struct FeatureLayout;

impl FeatureLayout {
    pub const LEVEL: Range<usize> = 0..4;
    pub const SLOPE: usize = 4;
    pub const SEGMENT_SLOPES: Range<usize> = 5..13;
    pub const AUTOCORR: Range<usize> = 13..21;
    pub const SPECTRAL: Range<usize> = 21..29;
    pub const JUMPS: usize = 29;
    pub const UP_FRACTION: usize = 30;
    pub const NET_CHANGE: usize = 31;

    /// Coordinates unchanged by positive affine maps of the input series.
    pub fn affine_invariant() -> Vec<usize> {
        let mut idx = vec![0, 1];
        idx.extend(Self::SLOPE..FEATURE_DIM);
        idx
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureConfig {
    /// A step is a jump when |Δ| exceeds this multiple of median |Δ|.
    pub jump_factor: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { jump_factor: 4.0 }
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Un-normalized feature vector; exposed so tests can inspect blocks.
pub fn raw_features(series: &[f64], config: &FeatureConfig) -> Result<[f64; FEATURE_DIM]> {
    if series.len() < MIN_LENGTH {
        return Err(Error::invalid(format!(
            "series too short for featurization: {} < {MIN_LENGTH}",
            series.len()
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("series contains non-finite values"));
    }
    let n = series.len();
    let mut f = [0.0; FEATURE_DIM];

    let min = series.iter().copied().fold(f64::INFINITY, f64::min);
    let max = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    let scale = min.abs().max(max.abs());
    let m = mean(series);
    let sd = std_dev(series);

    f[0] = ratio(m - min, range);
    f[1] = ratio(sd, range);
    f[2] = ratio(min, scale);
    f[3] = ratio(max, scale);

    // min-max normalized series against time in [0, 1]
    let unit: Vec<f64> = series.iter().map(|v| ratio(v - min, range)).collect();
    let tau: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    f[FeatureLayout::SLOPE] = ls_slope(&tau, &unit);
    for s in 0..SEGMENTS {
        let lo = s * n / SEGMENTS;
        let hi = ((s + 1) * n / SEGMENTS).max(lo + 1);
        f[FeatureLayout::SEGMENT_SLOPES.start + s] = ls_slope(&tau[lo..hi], &unit[lo..hi]);
    }

    let centered: Vec<f64> = series.iter().map(|v| v - m).collect();
    let var: f64 = centered.iter().map(|c| c * c).sum();
    for lag in 1..=LAGS {
        let cov: f64 = if lag < n {
            centered[..n - lag]
                .iter()
                .zip(&centered[lag..])
                .map(|(a, b)| a * b)
                .sum()
        } else {
            0.0
        };
        f[FeatureLayout::AUTOCORR.start + lag - 1] = ratio(cov, var);
    }

    let spectral = spectral_shares(&centered, sd);
    f[FeatureLayout::SPECTRAL].copy_from_slice(&spectral);

    let deltas: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    f[FeatureLayout::JUMPS] =
        jump_count(series, config.jump_factor) as f64 / deltas.len() as f64;
    f[FeatureLayout::UP_FRACTION] =
        deltas.iter().filter(|d| **d > 0.0).count() as f64 / deltas.len() as f64;
    f[FeatureLayout::NET_CHANGE] = ratio(series[n - 1] - series[0], range);

    Ok(f)
}

/// Share of spectral energy per frequency bin, mapped through ln(1 + 8e)/ln 9.
fn spectral_shares(centered: &[f64], sd: f64) -> [f64; SPECTRAL_BINS] {
    let mut out = [0.0; SPECTRAL_BINS];
    if sd == 0.0 {
        return out;
    }
    let n = centered.len();
    let mut buf: Vec<Complex<f64>> = centered.iter().map(|v| Complex::new(v / sd, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let power: Vec<f64> = buf[1..=half].iter().map(|c| c.norm_sqr()).collect();
    let total: f64 = power.iter().sum();
    if total == 0.0 {
        return out;
    }
    for (k, p) in power.iter().enumerate() {
        let bin = (k * SPECTRAL_BINS / power.len()).min(SPECTRAL_BINS - 1);
        out[bin] += p / total;
    }
    let denom = (1.0 + SPECTRAL_BINS as f64).ln();
    for e in &mut out {
        *e = (1.0 + SPECTRAL_BINS as f64 * *e).ln() / denom;
    }
    out
}

/// L2-normalized built-in embedding of a raw series.
///
/// An all-zero feature vector (only produced by an all-zero series) maps to
/// the unit vector on the level-max coordinate.
pub fn builtin_featurize(
    item_id: impl Into<String>,
    series: &[f64],
    config: &FeatureConfig,
) -> Result<EmbeddingVector> {
    let raw = raw_features(series, config)?;
    let values = if raw.iter().all(|v| *v == 0.0) {
        let mut v = vec![0.0; FEATURE_DIM];
        v[3] = 1.0;
        v
    } else {
        l2_normalize(raw.to_vec())?
    };
    Ok(EmbeddingVector {
        item_id: item_id.into(),
        values,
        provider_tag: BUILTIN_PROVIDER_TAG.to_string(),
    })
}
