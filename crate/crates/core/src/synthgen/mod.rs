//! Synthetic benchmark data: mean-reverting stock prices and piecewise
//! velocity profiles, each with a domain-agnostic and an in-domain caption.

pub mod catalog;
mod dataset;
mod physics;
mod render;
mod stock;

use serde::{Deserialize, Serialize};

pub use catalog::{agnostic_phrase_index, PhysicsCatalog, RegimeSpec, StockCatalog};
pub use dataset::{
    gen_dataset, read_dataset, write_dataset, DatasetKind, GenOptions, TimeSeriesSample,
    DEFAULT_DATASET_SIZE,
};
pub use dataset::{read_jsonl, write_jsonl};
pub use physics::{
    gen_physics_series, physics_caption, sample_physics_params, PhysicsParams, Segment, SegmentFn,
};
pub use render::{render_series, PlotStyle, CANVAS_HEIGHT, CANVAS_WIDTH};
pub use stock::{
    gen_stock_series, regime_matches, sample_params_in, sample_stock_regime, NoiseMode,
    StockOptions, StockParams, TrendMode,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionPair {
    pub agnostic: String,
    pub in_domain: String,
    pub regimes: Vec<String>,
}
