//! Domain-agnostic shape captions.

use std::collections::HashMap;
use std::sync::Arc;

use parking_lot::RwLock;

use super::provider::{post_process, CompletionRequest, CompletionService};
use crate::error::{Error, Result};
use crate::retry::RetryPolicy;
use crate::util::{jump_count, median, sha256_hex, std_dev};

/// Shortest series the rule-based captioner accepts.
pub const MIN_CAPTION_LENGTH: usize = 8;

pub const RULE_CAPTIONER_TAG: &str = "rule-based/v1";

pub const AGNOSTIC_INSTRUCTION: &str =
    "Describe the generic shape of the time-series in this image, without domain context.";

/// Shape facts the rule-based captioner can state, each with a fixed phrase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShapeClass {
    Up,
    UpExponential,
    Flat,
    Down,
    DownExponential,
    LowVariability,
    MediumVariability,
    HighVariability,
    FrequentJumps,
}

impl ShapeClass {
    pub const ALL: [ShapeClass; 9] = [
        ShapeClass::Up,
        ShapeClass::UpExponential,
        ShapeClass::Flat,
        ShapeClass::Down,
        ShapeClass::DownExponential,
        ShapeClass::LowVariability,
        ShapeClass::MediumVariability,
        ShapeClass::HighVariability,
        ShapeClass::FrequentJumps,
    ];

    pub fn phrase(&self) -> &'static str {
        match self {
            ShapeClass::Up => "it grows",
            ShapeClass::UpExponential => "it grows exponentially",
            ShapeClass::Flat => "it is flat",
            ShapeClass::Down => "it is falling",
            ShapeClass::DownExponential => "it decays exponentially",
            ShapeClass::LowVariability => "it has small variability",
            ShapeClass::MediumVariability => "it has moderate variability",
            ShapeClass::HighVariability => "it has strong variability",
            ShapeClass::FrequentJumps => "it shows common jumps",
        }
    }

    /// Stock regime whose captions describe this shape.
    pub fn stock_regime(&self) -> &'static str {
        match self {
            ShapeClass::Up | ShapeClass::UpExponential => "trend-up",
            ShapeClass::Flat => "trend-neutral",
            ShapeClass::Down | ShapeClass::DownExponential => "trend-down",
            ShapeClass::LowVariability => "sigma-low",
            ShapeClass::MediumVariability => "sigma-medium",
            ShapeClass::HighVariability => "sigma-high",
            ShapeClass::FrequentJumps => "shock-high",
        }
    }

    /// Physics class for trend shapes; variability has no physics analogue.
    pub fn physics_class(&self) -> Option<&'static str> {
        match self {
            ShapeClass::Up => Some("linear-increasing"),
            ShapeClass::UpExponential => Some("exponential-positive"),
            ShapeClass::Flat => Some("linear-constant"),
            ShapeClass::Down => Some("linear-decreasing"),
            ShapeClass::DownExponential => Some("exponential-negative"),
            _ => None,
        }
    }
}

/// Thresholds of the rule-based captioner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleConfig {
    /// A split into more trend regions is kept only if it cuts the
    /// residual sum of squares by at least this factor.
    pub split_gain: f64,
    /// Smallest relative change that can count as a trend.
    pub min_trend: f64,
    /// Relative noise level separating low from medium variability.
    pub medium_variability: f64,
    /// Relative noise level separating medium from high variability.
    pub high_variability: f64,
    /// Relative noise below which a series counts as noiseless.
    pub noise_floor: f64,
    pub jump_factor: f64,
    /// Jumps per step above which jumps are called frequent.
    pub frequent_jump_rate: f64,
}

impl Default for RuleConfig {
    fn default() -> Self {
        Self {
            split_gain: 4.0,
            min_trend: 0.02,
            medium_variability: 0.005,
            high_variability: 0.02,
            noise_floor: 1e-4,
            jump_factor: 4.0,
            frequent_jump_rate: 0.04,
        }
    }
}

/// Running sums for O(1) least-squares fits over index ranges.
struct Prefix {
    s: Vec<[f64; 5]>,
}

impl Prefix {
    fn new(ys: &[f64]) -> Self {
        let mut s = Vec::with_capacity(ys.len() + 1);
        let mut acc = [0.0; 5];
        s.push(acc);
        for (i, &y) in ys.iter().enumerate() {
            let x = i as f64;
            acc[0] += x;
            acc[1] += x * x;
            acc[2] += y;
            acc[3] += y * y;
            acc[4] += x * y;
            s.push(acc);
        }
        Self { s }
    }

    /// (slope, residual sum of squares) of the LS line on `a..b`.
    fn fit(&self, a: usize, b: usize) -> (f64, f64) {
        let n = (b - a) as f64;
        let d: Vec<f64> = (0..5).map(|k| self.s[b][k] - self.s[a][k]).collect();
        let cxx = d[1] - d[0] * d[0] / n;
        let cxy = d[4] - d[0] * d[2] / n;
        let cyy = d[3] - d[2] * d[2] / n;
        if cxx <= 0.0 {
            return (0.0, cyy.max(0.0));
        }
        (cxy / cxx, (cyy - cxy * cxy / cxx).max(0.0))
    }
}

/// Best split of `0..n` into `parts` contiguous pieces of at least `min_len`.
fn best_split(p: &Prefix, n: usize, parts: usize, min_len: usize, step: usize) -> Option<(Vec<usize>, f64)> {
    let grid = |lo: usize, hi: usize| (lo..=hi).step_by(step.max(1));
    match parts {
        1 => Some((vec![0, n], p.fit(0, n).1)),
        2 => {
            if n < 2 * min_len {
                return None;
            }
            grid(min_len, n - min_len)
                .map(|b| (vec![0, b, n], p.fit(0, b).1 + p.fit(b, n).1))
                .min_by(|a, b| a.1.total_cmp(&b.1))
        }
        _ => {
            if n < 3 * min_len {
                return None;
            }
            let mut best: Option<(Vec<usize>, f64)> = None;
            for b1 in grid(min_len, n - 2 * min_len) {
                let left = p.fit(0, b1).1;
                for b2 in grid(b1 + min_len, n - min_len) {
                    let sse = left + p.fit(b1, b2).1 + p.fit(b2, n).1;
                    if best.as_ref().is_none_or(|(_, s)| sse < *s) {
                        best = Some((vec![0, b1, b2, n], sse));
                    }
                }
            }
            best
        }
    }
}

/// True when an exponential fits `ys` far better than a straight line.
fn looks_exponential(ys: &[f64], sse_linear: f64, floor: f64) -> bool {
    if ys.len() < 4 || sse_linear <= floor || ys.iter().any(|y| *y <= 0.0) {
        return false;
    }
    let logs: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let p = Prefix::new(&logs);
    let n = ys.len();
    let (slope, _) = p.fit(0, n);
    let mean_x = (n - 1) as f64 / 2.0;
    let mean_l = logs.iter().sum::<f64>() / n as f64;
    let sse_exp: f64 = ys
        .iter()
        .enumerate()
        .map(|(i, y)| (y - (mean_l + slope * (i as f64 - mean_x)).exp()).powi(2))
        .sum();
    sse_exp < 0.1 * sse_linear
}

#[derive(Debug, Clone, PartialEq)]
struct Region {
    start: usize,
    end: usize,
    class: ShapeClass,
}

/// Shape analysis behind the rule-based caption.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSummary {
    /// Trend classes of up to three consecutive regions.
    pub trends: Vec<ShapeClass>,
    /// Robust per-step noise relative to the series level.
    pub relative_noise: f64,
    pub variability: Option<ShapeClass>,
    pub jumps: usize,
    pub frequent_jumps: bool,
}

pub fn analyze_shape(series: &[f64], cfg: &RuleConfig) -> Result<ShapeSummary> {
    let n = series.len();
    if n < MIN_CAPTION_LENGTH {
        return Err(Error::invalid(format!(
            "series too short to caption: {n} < {MIN_CAPTION_LENGTH}"
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("cannot caption non-finite values"));
    }
    let scale = series.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1.0);
    let level = {
        let m = series.iter().map(|v| v.abs()).sum::<f64>() / n as f64;
        if m > 1e-9 * scale { m } else { scale }
    };
    let floor = 1e-10 * n as f64 * scale * scale;

    let prefix = Prefix::new(series);
    let min_len = (n / 8).max(4);
    let step = (n / 64).max(1);
    let mut bounds = vec![0, n];
    let mut sse = prefix.fit(0, n).1;
    for parts in 2..=3 {
        let Some((b, s)) = best_split(&prefix, n, parts, min_len, step) else { break };
        if sse <= floor || s * cfg.split_gain > sse {
            break;
        }
        bounds = b;
        sse = s;
    }

    let mut regions: Vec<Region> = Vec::new();
    for w in bounds.windows(2) {
        let (a, b) = (w[0], w[1]);
        let seg = &series[a..b];
        let (slope, seg_sse) = prefix.fit(a, b);
        let change = slope * (b - a - 1) as f64 / level;
        let deltas: Vec<f64> = seg.windows(2).map(|d| d[1] - d[0]).collect();
        let tau = (2.0 * std_dev(&deltas) * ((b - a) as f64).sqrt() / level).max(cfg.min_trend);
        let seg_floor = 1e-10 * (b - a) as f64 * scale * scale;
        let class = if change.abs() <= tau {
            ShapeClass::Flat
        } else {
            match (change > 0.0, looks_exponential(seg, seg_sse, seg_floor)) {
                (true, false) => ShapeClass::Up,
                (true, true) => ShapeClass::UpExponential,
                (false, false) => ShapeClass::Down,
                (false, true) => ShapeClass::DownExponential,
            }
        };
        match regions.last_mut() {
            Some(r) if r.class == class => r.end = b,
            _ => regions.push(Region { start: a, end: b, class }),
        }
    }

    // third differences cancel smooth curvature; for white increments
    // their standard deviation is sqrt(6) times the step noise
    let third: Vec<f64> = series
        .windows(4)
        .map(|w| w[3] - 3.0 * w[2] + 3.0 * w[1] - w[0])
        .collect();
    let abs_dev: Vec<f64> = {
        let m = median(&third);
        third.iter().map(|d| (d - m).abs()).collect()
    };
    let relative_noise = 1.4826 * median(&abs_dev) / 6f64.sqrt() / level;
    let variability = if relative_noise < cfg.noise_floor {
        None
    } else if relative_noise < cfg.medium_variability {
        Some(ShapeClass::LowVariability)
    } else if relative_noise < cfg.high_variability {
        Some(ShapeClass::MediumVariability)
    } else {
        Some(ShapeClass::HighVariability)
    };
    let jumps = jump_count(series, cfg.jump_factor);
    Ok(ShapeSummary {
        trends: regions.iter().map(|r| r.class).collect(),
        relative_noise,
        variability,
        jumps,
        // on noiseless curves a slope change is not a jump
        frequent_jumps: variability.is_some()
            && jumps as f64 / (n - 1) as f64 > cfg.frequent_jump_rate,
    })
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

/// Renders a summary as one trend sentence plus, for noisy or jumpy
/// series, one variability sentence.
pub fn render_shape(summary: &ShapeSummary) -> String {
    let t: Vec<&str> = summary.trends.iter().map(|c| c.phrase()).collect();
    let trend = match t.as_slice() {
        [one] => one.to_string(),
        [a, b] => format!("{a} at first, then {b}"),
        [a, b, c, ..] => format!("{a} at first, then {b}, and finally {c}"),
        [] => ShapeClass::Flat.phrase().to_string(),
    };
    let mut out = capitalize(&trend) + ".";
    let detail = match (summary.variability, summary.frequent_jumps) {
        (Some(v), true) => Some(format!("{} and {}", v.phrase(), &ShapeClass::FrequentJumps.phrase()[3..])),
        (Some(v), false) => Some(v.phrase().to_string()),
        (None, true) => Some(ShapeClass::FrequentJumps.phrase().to_string()),
        (None, false) => None,
    };
    if let Some(d) = detail {
        out.push(' ');
        out.push_str(&capitalize(&d));
        out.push('.');
    }
    out
}

/// Deterministic caption of trend regions, variability and jumps.
pub fn agnostic_caption_rule_based(series: &[f64]) -> Result<String> {
    Ok(render_shape(&analyze_shape(series, &RuleConfig::default())?))
}

/// Input available to an agnostic captioner.
pub struct CaptionInput<'a> {
    pub series: &'a [f64],
    /// Rendered plot, when the captioner needs it.
    pub image: Option<&'a [u8]>,
}

pub trait AgnosticCaptioner: Send + Sync {
    fn tag(&self) -> &str;
    fn needs_image(&self) -> bool;
    fn caption(&self, input: &CaptionInput<'_>) -> Result<String>;
}

#[derive(Debug, Default, Clone)]
pub struct RuleBasedCaptioner {
    pub config: RuleConfig,
}

impl AgnosticCaptioner for RuleBasedCaptioner {
    fn tag(&self) -> &str {
        RULE_CAPTIONER_TAG
    }

    fn needs_image(&self) -> bool {
        false
    }

    fn caption(&self, input: &CaptionInput<'_>) -> Result<String> {
        Ok(render_shape(&analyze_shape(input.series, &self.config)?))
    }
}

/// Multimodal-service captioner, cached by image content hash.
pub struct ExternalCaptioner {
    service: Arc<dyn CompletionService>,
    retry: RetryPolicy,
    max_tokens: u32,
    tag: String,
    cache: RwLock<HashMap<String, String>>,
}

impl ExternalCaptioner {
    pub fn new(service: Arc<dyn CompletionService>, retry: RetryPolicy) -> Self {
        let tag = format!("external:{}", service.tag());
        Self {
            service,
            retry,
            max_tokens: 256,
            tag,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn cached(&self) -> usize {
        self.cache.read().len()
    }
}

/// Captions an image through `service` with the fixed shape instruction.
pub fn agnostic_caption_external(
    image: &[u8],
    service: &dyn CompletionService,
    retry: &RetryPolicy,
    max_tokens: u32,
) -> Result<String> {
    let req = CompletionRequest::with_image(AGNOSTIC_INSTRUCTION, image, max_tokens);
    let raw = retry.run(|| service.complete(&req))?;
    let text = post_process(&raw);
    if text.is_empty() {
        return Err(Error::Provider("empty caption".into()));
    }
    Ok(text)
}

impl AgnosticCaptioner for ExternalCaptioner {
    fn tag(&self) -> &str {
        &self.tag
    }

    fn needs_image(&self) -> bool {
        true
    }

    fn caption(&self, input: &CaptionInput<'_>) -> Result<String> {
        let image = input
            .image
            .ok_or_else(|| Error::Precondition("external captioner needs a rendered image".into()))?;
        let key = sha256_hex(image);
        if let Some(hit) = self.cache.read().get(&key) {
            return Ok(hit.clone());
        }
        let text = agnostic_caption_external(image, self.service.as_ref(), &self.retry, self.max_tokens)?;
        self.cache.write().entry(key).or_insert_with(|| text.clone());
        Ok(text)
    }
}
