//! Synthetic dataset assembly and the dataset JSONL format.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::catalog::StockCatalog;
use super::physics::{gen_physics_series, physics_caption, sample_physics_params};
use super::render::{render_series, PlotStyle};
use super::stock::{gen_stock_series, sample_stock_regime, StockOptions};
use crate::error::{Error, Result};
use crate::util::mix_seed;

/// Size of each synthetic benchmark set.
pub const DEFAULT_DATASET_SIZE: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Stock,
    Physics,
    /// Externally collected series loaded from JSONL.
    Real,
}

impl DatasetKind {
    /// Domain descriptor used in prompts when none is configured.
    pub fn default_domain(&self) -> &'static str {
        match self {
            DatasetKind::Stock => "stock price series",
            DatasetKind::Physics => "velocity of an object",
            DatasetKind::Real => "time-series",
        }
    }

    pub fn prefix(&self) -> &'static str {
        match self {
            DatasetKind::Stock => "stock",
            DatasetKind::Physics => "physics",
            DatasetKind::Real => "real",
        }
    }
}

impl std::str::FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stock" => Ok(DatasetKind::Stock),
            "physics" => Ok(DatasetKind::Physics),
            "real" => Ok(DatasetKind::Real),
            other => Err(Error::Config(format!("unknown dataset kind {other:?}"))),
        }
    }
}

/// One series with its captions; a line of the dataset JSONL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesSample {
    pub id: String,
    pub kind: DatasetKind,
    pub series: Vec<f64>,
    #[serde(default)]
    pub image_path: Option<String>,
    #[serde(default)]
    pub agnostic: Option<String>,
    #[serde(default)]
    pub in_domain: Vec<String>,
    #[serde(default)]
    pub regime: Option<String>,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GenOptions {
    pub stock: StockOptions,
}

impl GenOptions {
    pub fn length(&self) -> usize {
        self.stock.length
    }
}

fn generate_one(kind: DatasetKind, index: usize, seed: u64, opts: &GenOptions) -> Result<TimeSeriesSample> {
    let sample_seed = mix_seed(seed, index as u64);
    let id = format!("{}-{index:04}", kind.prefix());
    let (series, caption, params) = match kind {
        DatasetKind::Stock => {
            let (params, caption) =
                sample_stock_regime(&StockCatalog::bundled(), &opts.stock, sample_seed)?;
            (gen_stock_series(&params)?, caption, serde_json::to_value(&params)?)
        }
        DatasetKind::Physics => {
            let params = sample_physics_params(opts.length(), sample_seed);
            let caption = physics_caption(&params, params.seed)?;
            (gen_physics_series(&params)?, caption, serde_json::to_value(&params)?)
        }
        DatasetKind::Real => {
            return Err(Error::Config("real datasets are loaded, not generated".into()))
        }
    };
    Ok(TimeSeriesSample {
        image_path: Some(format!("images/{id}.png")),
        id,
        kind,
        series,
        agnostic: Some(caption.agnostic),
        in_domain: vec![caption.in_domain],
        regime: Some(caption.regimes.join("+")),
        params,
        seed: Some(sample_seed),
    })
}

/// `n` samples with per-sample seeds derived from `(seed, index)`, so the
/// parallel build matches a serial one.
pub fn gen_dataset(kind: DatasetKind, n: usize, seed: u64, opts: &GenOptions) -> Result<Vec<TimeSeriesSample>> {
    if n == 0 {
        return Err(Error::Config("dataset size must be at least 1".into()));
    }
    (0..n)
        .into_par_iter()
        .map(|i| generate_one(kind, i, seed, opts))
        .collect()
}

/// Writes `dataset.jsonl` plus one PNG per sample under `dir`.
pub fn write_dataset(dir: &Path, samples: &[TimeSeriesSample], style: &PlotStyle) -> Result<()> {
    fs::create_dir_all(dir.join("images"))?;
    let pngs: Vec<(String, Vec<u8>)> = samples
        .par_iter()
        .filter_map(|s| s.image_path.clone().map(|p| (p, s)))
        .map(|(p, s)| Ok((p, render_series(&s.series, style)?)))
        .collect::<Result<_>>()?;
    for (path, bytes) in pngs {
        fs::write(dir.join(path), bytes)?;
    }
    write_jsonl(&dir.join("dataset.jsonl"), samples)
}

/// One JSON object per line.
pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for row in rows {
        serde_json::to_writer(&mut w, row)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Parses JSONL, skipping blank lines and reporting 1-based line numbers.
pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(row);
    }
    Ok(out)
}

/// Loads a dataset JSONL (synthetic or externally collected). Any sample count
/// is accepted.
pub fn read_dataset(path: &Path) -> Result<Vec<TimeSeriesSample>> {
    read_jsonl(path)
}
