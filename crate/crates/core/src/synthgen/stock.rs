//! Mean-reverting price process with trend and megashocks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::catalog::{RegimeSpec, StockCatalog};
use super::CaptionPair;
use crate::error::{Error, Result};
use crate::util::sentence;

/// How the per-step noise scale relates to the price level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    /// Standard deviation is `sigma` in price units.
    Absolute,
    /// Standard deviation is `sigma · max(r_{t-1}, 1)`.
    #[default]
    Relative,
}

/// Where the per-step trend enters the recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrendMode {
    /// `T` is added to `r_t` every step.
    #[default]
    Additive,
    /// The reversion anchor drifts: `r̄_t = r̄ + T·t`.
    AnchorDrift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StockParams {
    pub mean: f64,
    pub kappa: f64,
    pub sigma: f64,
    pub trend: f64,
    pub shock_prob: f64,
    pub shock_sigma: f64,
    pub length: usize,
    pub seed: u64,
    #[serde(default)]
    pub noise_mode: NoiseMode,
    #[serde(default)]
    pub trend_mode: TrendMode,
    /// Set for regimes that declare frequent megashocks; enforces
    /// `shock_sigma >= sigma`.
    #[serde(default)]
    pub shock_regime: bool,
}

impl StockParams {
    /// Parameters of a deterministic flat series at `mean`.
    pub fn flat(mean: f64, length: usize) -> Self {
        Self {
            mean,
            kappa: 0.0,
            sigma: 0.0,
            trend: 0.0,
            shock_prob: 0.0,
            shock_sigma: 0.0,
            length,
            seed: 0,
            noise_mode: NoiseMode::default(),
            trend_mode: TrendMode::default(),
            shock_regime: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.mean,
            self.kappa,
            self.sigma,
            self.trend,
            self.shock_prob,
            self.shock_sigma,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("stock parameters must be finite"));
        }
        if !(0.0..=1.0).contains(&self.kappa) {
            return Err(Error::invalid(format!("kappa {} outside [0, 1]", self.kappa)));
        }
        if self.sigma < 0.0 || self.shock_sigma < 0.0 {
            return Err(Error::invalid("noise scales must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.shock_prob) {
            return Err(Error::invalid(format!(
                "shock probability {} outside [0, 1]",
                self.shock_prob
            )));
        }
        if self.length < 2 {
            return Err(Error::invalid("stock series length must be at least 2"));
        }
        if self.shock_regime && self.shock_sigma < self.sigma {
            return Err(Error::invalid(
                "shock regime requires shock_sigma >= sigma",
            ));
        }
        Ok(())
    }
}

/// Generates `r_0 = r̄`, `r_t = max{0, κ·anchor + (1−κ)·r_{t−1} + drift + u_t + m_t}`.
///
/// Every step draws the same three variates (noise, shock coin, shock size)
/// regardless of parameters, so a seed fixes the random stream.
pub fn gen_stock_series(params: &StockParams) -> Result<Vec<f64>> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut out = Vec::with_capacity(params.length);
    let mut prev = params.mean;
    out.push(prev);
    for t in 1..params.length {
        let z: f64 = rng.sample(StandardNormal);
        let coin: f64 = rng.random();
        let zs: f64 = rng.sample(StandardNormal);

        let level = match params.noise_mode {
            NoiseMode::Absolute => 1.0,
            NoiseMode::Relative => prev.max(1.0),
        };
        let noise = params.sigma * level * z;
        let shock = if coin < params.shock_prob {
            params.shock_sigma * level * zs
        } else {
            0.0
        };
        let (anchor, drift) = match params.trend_mode {
            TrendMode::Additive => (params.mean, params.trend),
            TrendMode::AnchorDrift => (params.mean + params.trend * t as f64, 0.0),
        };
        let next = params.kappa * anchor + (1.0 - params.kappa) * prev + drift + noise + shock;
        prev = next.max(0.0);
        out.push(prev);
    }
    Ok(out)
}

/// Options shared by every sampled stock series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StockOptions {
    pub length: usize,
    pub noise_mode: NoiseMode,
    pub trend_mode: TrendMode,
}

impl Default for StockOptions {
    fn default() -> Self {
        Self {
            length: 128,
            noise_mode: NoiseMode::Relative,
            trend_mode: TrendMode::Additive,
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

fn pick<'a>(rng: &mut ChaCha8Rng, bank: &'a [String]) -> &'a str {
    &bank[rng.random_range(0..bank.len())]
}

/// Draws parameters inside one regime's ranges.
pub fn sample_params_in(
    regime: &RegimeSpec,
    options: &StockOptions,
    rng: &mut ChaCha8Rng,
    seed: u64,
) -> StockParams {
    let r = &regime.ranges;
    StockParams {
        mean: uniform(rng, r.mean.lo, r.mean.hi),
        kappa: uniform(rng, r.kappa.lo, r.kappa.hi),
        sigma: uniform(rng, r.sigma.lo, r.sigma.hi),
        trend: uniform(rng, r.trend.lo, r.trend.hi),
        shock_prob: uniform(rng, r.p.lo, r.p.hi),
        shock_sigma: uniform(rng, r.shock_sigma.lo, r.shock_sigma.hi),
        length: options.length,
        seed,
        noise_mode: options.noise_mode,
        trend_mode: options.trend_mode,
        shock_regime: regime.name == "shock-high",
    }
}

/// True when every parameter lies inside the regime's ranges.
pub fn regime_matches(regime: &RegimeSpec, params: &StockParams) -> bool {
    let r = &regime.ranges;
    r.mean.contains(params.mean)
        && r.kappa.contains(params.kappa)
        && r.sigma.contains(params.sigma)
        && r.trend.contains(params.trend)
        && r.p.contains(params.shock_prob)
        && r.shock_sigma.contains(params.shock_sigma)
}

/// Uniformly picks a regime, its parameters and one phrase from each bank.
pub fn sample_stock_regime(
    catalog: &StockCatalog,
    options: &StockOptions,
    seed: u64,
) -> Result<(StockParams, CaptionPair)> {
    if catalog.regimes.is_empty() {
        return Err(Error::invalid("empty regime catalog"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let regime = &catalog.regimes[rng.random_range(0..catalog.regimes.len())];
    let series_seed: u64 = rng.random();
    let params = sample_params_in(regime, options, &mut rng, series_seed);
    let caption = CaptionPair {
        agnostic: sentence(pick(&mut rng, &regime.agnostic)),
        in_domain: sentence(pick(&mut rng, &regime.domain)),
        regimes: vec![regime.name.clone()],
    };
    Ok((params, caption))
}
