//! Bundled regime catalogs and phrase banks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) const STOCK_REGIMES_JSON: &str = include_str!("../../data/stock_regimes.json");
pub(crate) const PHYSICS_PHRASES_JSON: &str = include_str!("../../data/physics_phrases.json");

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct ParamRange {
    pub lo: f64,
    pub hi: f64,
}

impl From<[f64; 2]> for ParamRange {
    fn from([lo, hi]: [f64; 2]) -> Self {
        Self { lo, hi }
    }
}

impl From<ParamRange> for [f64; 2] {
    fn from(r: ParamRange) -> Self {
        [r.lo, r.hi]
    }
}

impl ParamRange {
    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StockRanges {
    pub mean: ParamRange,
    pub sigma: ParamRange,
    pub p: ParamRange,
    #[serde(rename = "T")]
    pub trend: ParamRange,
    pub kappa: ParamRange,
    pub shock_sigma: ParamRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub name: String,
    /// trend | shock | sigma
    pub group: String,
    pub agnostic: Vec<String>,
    pub domain: Vec<String>,
    pub ranges: StockRanges,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StockCatalog {
    pub version: String,
    pub regimes: Vec<RegimeSpec>,
}

impl StockCatalog {
    pub fn bundled() -> Self {
        Self::from_json(STOCK_REGIMES_JSON).expect("bundled stock catalog is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cat: StockCatalog = serde_json::from_str(text)?;
        cat.validate()?;
        Ok(cat)
    }

    fn validate(&self) -> Result<()> {
        for r in &self.regimes {
            if r.agnostic.is_empty() || r.domain.is_empty() {
                return Err(Error::invalid(format!("regime {} has an empty phrase bank", r.name)));
            }
            let rs = &r.ranges;
            for (field, range) in [
                ("mean", rs.mean),
                ("sigma", rs.sigma),
                ("p", rs.p),
                ("T", rs.trend),
                ("kappa", rs.kappa),
                ("shock_sigma", rs.shock_sigma),
            ] {
                if !(range.lo <= range.hi) {
                    return Err(Error::invalid(format!(
                        "regime {}: empty range for {field}",
                        r.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&RegimeSpec> {
        self.regimes.iter().find(|r| r.name == name)
    }
}

/// Sign class of a physics segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicsClass {
    pub name: String,
    pub agnostic: Vec<String>,
    pub domain: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhysicsCatalog {
    pub version: String,
    pub classes: Vec<PhysicsClass>,
}

impl PhysicsCatalog {
    pub fn bundled() -> Self {
        let cat: PhysicsCatalog =
            serde_json::from_str(PHYSICS_PHRASES_JSON).expect("bundled physics catalog is valid");
        cat
    }

    pub fn get(&self, name: &str) -> Option<&PhysicsClass> {
        self.classes.iter().find(|c| c.name == name)
    }
}

/// Agnostic phrase → regime name, for every bank in both catalogs. The first
/// regime listing a phrase wins.
pub fn agnostic_phrase_index() -> BTreeMap<String, String> {
    let mut index = BTreeMap::new();
    for r in StockCatalog::bundled().regimes {
        for p in r.agnostic {
            index.entry(p).or_insert_with(|| r.name.clone());
        }
    }
    for c in PhysicsCatalog::bundled().classes {
        for p in c.agnostic {
            index.entry(p).or_insert_with(|| c.name.clone());
        }
    }
    index
}
