//! Retrieval-based, domain-aware captioning of time-series.
//!
//! The crate is organized around the captioning pipeline:
//!
//! - [`embeddings`]: series featurization, external embedding services and the
//!   cosine similarity kernel.
//! - [`select`]: determinantal point process scoring, greedy MAP selection of
//!   diverse exemplars, and the nearest-neighbor / random baselines.
//! - [`synthgen`]: synthetic stock and physics datasets with templated captions.
//! - [`db`]: the target-domain database, annotation workflow and retrieval.
//! - [`pipeline`]: agnostic captioning, prompt construction, LLM providers and
//!   the leave-one-out benchmark.
//! - [`metrics`]: ROUGE-L, CIDEr-D, SPICE-proxy, SPIDEr and report tables.

pub mod db;
pub mod embeddings;
mod error;
pub mod metrics;
pub mod pipeline;
pub mod retry;
pub mod select;
pub mod synthgen;
mod util;

pub use db::{Annotation, AnnotationTask, Database, DbEntry};
pub use embeddings::{EmbeddingVector, SimilarityKernel};
pub use error::{Error, Result};
pub use metrics::MetricReport;
pub use pipeline::{CaptionTrace, Mode, PromptBundle};
pub use select::{SelectionStrategy, SubsetSelection};
pub use synthgen::{CaptionPair, DatasetKind, PhysicsParams, StockParams};
