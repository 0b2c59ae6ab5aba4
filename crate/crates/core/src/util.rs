use sha2::{Digest, Sha256};

/// Hex SHA-256 of a byte payload.
pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// SplitMix64 finalizer; used to derive independent per-item seeds.
pub(crate) fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Bytes of a real series in little-endian order, for content hashing.
pub(crate) fn series_bytes(series: &[f64]) -> Vec<u8> {
    series.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Population standard deviation.
pub(crate) fn std_dev(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Least-squares slope of `ys` against `xs`. Zero when `xs` has no spread.
pub(crate) fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let mx = mean(xs);
    let my = mean(ys);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

pub(crate) fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Number of steps with |Δ| > factor·median|Δ|. Steps below a tiny
/// scale-relative floor never count, so flat stretches produce no jumps.
pub(crate) fn jump_count(series: &[f64], factor: f64) -> usize {
    let deltas: Vec<f64> = series.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let med = median(&deltas);
    let scale = series.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1.0);
    let floor = 1e-12 * scale;
    deltas
        .iter()
        .filter(|d| **d > (factor * med).max(floor))
        .count()
}

/// Capitalize the first character and terminate with a period.
pub(crate) fn sentence(text: &str) -> String {
    let trimmed = text.trim().trim_end_matches('.');
    let mut chars = trimmed.chars();
    let mut out = match chars.next() {
        Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    };
    out.push('.');
    out
}
