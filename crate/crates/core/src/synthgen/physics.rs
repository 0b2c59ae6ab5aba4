//! Piecewise linear / exponential velocity profiles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::catalog::PhysicsCatalog;
use super::CaptionPair;
use crate::error::{Error, Result};
use crate::util::sentence;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SegmentFn {
    /// x = p0 + p1·t
    Linear { p0: f64, p1: f64 },
    /// x = q0·exp(q1·t)
    Exponential { q0: f64, q1: f64 },
}

impl SegmentFn {
    fn eval(&self, t: f64) -> f64 {
        match *self {
            SegmentFn::Linear { p0, p1 } => p0 + p1 * t,
            SegmentFn::Exponential { q0, q1 } => q0 * (q1 * t).exp(),
        }
    }

    /// Same shape, moved so that `eval(0) == start`.
    fn anchored_at(&self, start: f64) -> Result<Self> {
        match *self {
            SegmentFn::Linear { p1, .. } => Ok(SegmentFn::Linear { p0: start, p1 }),
            SegmentFn::Exponential { q1, .. } => {
                if start <= 0.0 {
                    return Err(Error::invalid(
                        "exponential segment cannot continue from a non-positive value",
                    ));
                }
                Ok(SegmentFn::Exponential { q0: start, q1 })
            }
        }
    }

    /// Catalog class of this segment's parameter signs.
    pub fn sign_class(&self) -> Result<&'static str> {
        match *self {
            SegmentFn::Linear { p1, .. } if p1 > 0.0 => Ok("linear-increasing"),
            SegmentFn::Linear { p1, .. } if p1 < 0.0 => Ok("linear-decreasing"),
            SegmentFn::Linear { .. } => Ok("linear-constant"),
            SegmentFn::Exponential { q0, q1 } if q0 > 0.0 && q1 > 0.0 => {
                Ok("exponential-positive")
            }
            SegmentFn::Exponential { q0, q1 } if q0 > 0.0 && q1 < 0.0 => {
                Ok("exponential-negative")
            }
            SegmentFn::Exponential { q0, q1 } => Err(Error::invalid(format!(
                "exponential segment (q0 = {q0}, q1 = {q1}) has no caption class"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    #[serde(flatten)]
    pub function: SegmentFn,
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicsParams {
    pub segments: Vec<Segment>,
    pub seed: u64,
}

const MAX_EXPONENT: f64 = 30.0;

impl PhysicsParams {
    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.segments.len()) {
            return Err(Error::invalid("physics series needs one or two segments"));
        }
        let total: usize = self.segments.iter().map(|s| s.length).sum();
        if total < 8 {
            return Err(Error::invalid(format!("total length {total} < 8")));
        }
        for seg in &self.segments {
            if seg.length == 0 {
                return Err(Error::invalid("empty segment"));
            }
            match seg.function {
                SegmentFn::Linear { p0, p1 } if !(p0.is_finite() && p1.is_finite()) => {
                    return Err(Error::invalid("non-finite linear parameters"));
                }
                SegmentFn::Exponential { q0, q1 } => {
                    if !(q0 > 0.0 && q0.is_finite() && q1.is_finite()) {
                        return Err(Error::invalid("exponential segment needs finite q0 > 0"));
                    }
                    if (q1 * seg.length as f64).abs() > MAX_EXPONENT {
                        return Err(Error::invalid(format!(
                            "|q1·length| = {} exceeds {MAX_EXPONENT}",
                            (q1 * seg.length as f64).abs()
                        )));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Evaluates each segment on integer t. A second segment is re-anchored so
/// its value at local t = 0 equals the first segment's final value.
pub fn gen_physics_series(params: &PhysicsParams) -> Result<Vec<f64>> {
    params.validate()?;
    let mut out = Vec::new();
    for (i, seg) in params.segments.iter().enumerate() {
        let f = match out.last() {
            Some(&last) if i > 0 => seg.function.anchored_at(last)?,
            _ => seg.function,
        };
        out.extend((0..seg.length).map(|t| f.eval(t as f64)));
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("physics series overflowed"));
    }
    Ok(out)
}

fn lower_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

/// One sentence per segment from the matching sign-class banks; two segments
/// are joined as "… in the first part. Afterwards, …".
pub fn physics_caption(params: &PhysicsParams, seed: u64) -> Result<CaptionPair> {
    let catalog = PhysicsCatalog::bundled();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agnostic = Vec::new();
    let mut domain = Vec::new();
    let mut regimes = Vec::new();
    for seg in &params.segments {
        let name = seg.function.sign_class()?;
        let class = catalog
            .get(name)
            .ok_or_else(|| Error::invalid(format!("sign class {name} not in catalog")))?;
        agnostic.push(class.agnostic[rng.random_range(0..class.agnostic.len())].clone());
        domain.push(class.domain[rng.random_range(0..class.domain.len())].clone());
        regimes.push(name.to_string());
    }
    let join = |parts: &[String]| match parts {
        [one] => sentence(one),
        [first, second] => format!(
            "{} {}",
            sentence(&format!("{first} in the first part")),
            sentence(&format!("afterwards, {}", lower_first(second)))
        ),
        _ => unreachable!("validated segment count"),
    };
    Ok(CaptionPair {
        agnostic: join(&agnostic),
        in_domain: join(&domain),
        regimes,
    })
}

/// Random one- or two-segment parameters. Levels stay positive so that an
/// exponential second segment can always be re-anchored.
pub fn sample_physics_params(length: usize, seed: u64) -> PhysicsParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let two = rng.random_bool(0.5);
    let lengths = if two {
        vec![length / 2, length - length / 2]
    } else {
        vec![length]
    };
    let segments = lengths
        .into_iter()
        .map(|len| {
            let function = if rng.random_bool(0.5) {
                let p0 = rng.random_range(20.0..40.0);
                let p1 = match rng.random_range(0..3) {
                    0 => rng.random_range(0.05..0.15),
                    1 => 0.0,
                    _ => -rng.random_range(0.05..0.15),
                };
                SegmentFn::Linear { p0, p1 }
            } else {
                let q0 = rng.random_range(5.0..15.0);
                let mag = rng.random_range(0.01..0.03);
                let q1 = if rng.random_bool(0.5) { mag } else { -mag };
                SegmentFn::Exponential { q0, q1 }
            };
            Segment {
                function,
                length: len,
            }
        })
        .collect();
    PhysicsParams {
        segments,
        seed: rng.random(),
    }
}
