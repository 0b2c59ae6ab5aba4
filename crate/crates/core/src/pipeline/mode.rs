use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::select::SelectionStrategy;

/// How a query caption is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// In-context examples are the annotated diverse exemplars.
    Diverse,
    /// In-context examples are the query's nearest neighbors.
    Nn,
    /// In-context examples are drawn uniformly at random.
    Random,
    /// Zero-shot: no examples, translation instruction only.
    Zs,
    /// The multimodal model captions the image directly.
    MultimodalDirect,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::Diverse,
        Mode::Nn,
        Mode::Random,
        Mode::Zs,
        Mode::MultimodalDirect,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Diverse => "diverse",
            Mode::Nn => "nn",
            Mode::Random => "random",
            Mode::Zs => "zs",
            Mode::MultimodalDirect => "multimodal-direct",
        }
    }

    /// Retrieval strategy for the in-context modes.
    pub fn strategy(&self) -> Option<SelectionStrategy> {
        match self {
            Mode::Diverse => Some(SelectionStrategy::Diverse),
            Mode::Nn => Some(SelectionStrategy::NearestNeighbor),
            Mode::Random => Some(SelectionStrategy::Random),
            Mode::Zs | Mode::MultimodalDirect => None,
        }
    }

    /// Nn and random retrieve from any entry, so every entry needs a caption.
    pub fn requires_full_annotation(&self) -> bool {
        matches!(self, Mode::Nn | Mode::Random)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown mode {s:?} (expected diverse, nn, random, zs or multimodal-direct)"
                ))
            })
    }
}
