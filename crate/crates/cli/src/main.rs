//! `tadacap`: synthetic data, exemplar selection, annotation round-trips,
//! captioning and benchmarking from the command line.

mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tadacap_core::pipeline::Endpoint;
use tadacap_core::synthgen::{NoiseMode, TrendMode};
use tadacap_core::{DatasetKind, Error, Mode};

use config::{ProviderConfig, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "tadacap", version, about = "Domain-aware time-series captioning with diverse retrieval")]
struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print the resolved configuration and exit without writing anything.
    #[arg(long, global = true)]
    dry_run: bool,
    #[arg(long, global = true)]
    concurrency: Option<usize>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct ProviderFlags {
    /// Completion endpoint: mock:echo, mock:oracle, mock:canned:<file> or a URL.
    #[arg(long)]
    llm: Option<Endpoint>,
    #[arg(long)]
    llm_model: Option<String>,
    /// Multimodal endpoint for multimodal-direct mode.
    #[arg(long)]
    mm: Option<Endpoint>,
    #[arg(long)]
    mm_model: Option<String>,
    /// Multimodal endpoint for agnostic captions (default: rule-based).
    #[arg(long)]
    captioner: Option<Endpoint>,
    #[arg(long)]
    domain: Option<String>,
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset with plots.
    Synthgen {
        #[arg(value_parser = parse_kind)]
        kind: DatasetKind,
        #[arg(short, long, default_value_t = tadacap_core::synthgen::DEFAULT_DATASET_SIZE)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        length: Option<usize>,
        #[arg(long, value_parser = parse_serde::<NoiseMode>)]
        noise_mode: Option<NoiseMode>,
        #[arg(long, value_parser = parse_serde::<TrendMode>)]
        trend_mode: Option<TrendMode>,
    },
    /// Build or check a database.
    Db {
        #[command(subcommand)]
        action: DbAction,
    },
    /// Choose the exemplars to annotate.
    Select {
        #[arg(long)]
        db: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        /// Stop when the marginal gain drops below the threshold (k caps the size).
        #[arg(long)]
        auto: bool,
        #[arg(long)]
        gain_threshold: Option<f64>,
        #[arg(long, default_value = "diverse")]
        strategy: String,
        /// Selection trace file (default: <db>.selection.json).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Annotation round-trip.
    Annotate {
        #[command(subcommand)]
        action: AnnotateAction,
    },
    /// Caption queries in one mode.
    Caption {
        #[arg(long)]
        db: Option<PathBuf>,
        #[arg(long, value_parser = parse_mode)]
        mode: Mode,
        /// Query ids (default: every leave-one-out query).
        #[arg(long = "id")]
        ids: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        providers: ProviderFlags,
    },
    /// Leave-one-out benchmark with metric report.
    Bench {
        #[arg(long)]
        db: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', value_parser = parse_mode)]
        modes: Vec<Mode>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        providers: ProviderFlags,
    },
    /// Score candidate captions against references.
    Eval {
        /// JSONL rows {"id", "caption"}.
        #[arg(long)]
        candidates: PathBuf,
        /// JSONL rows {"id", "caption"}, or a dataset/database file.
        #[arg(long)]
        references: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "candidates")]
        label: String,
    },
}

#[derive(Subcommand, Debug)]
enum DbAction {
    /// Load a dataset, embed every entry and save the database.
    Build {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        db: Option<PathBuf>,
        /// External embedding endpoint URL (default: built-in featurizer).
        #[arg(long)]
        embed: Option<Endpoint>,
        #[arg(long)]
        embed_model: Option<String>,
    },
    Validate {
        #[arg(long)]
        db: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum AnnotateAction {
    /// Write tasks for exemplars that still need a caption.
    Export {
        #[arg(long)]
        db: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        domain: Option<String>,
    },
    /// Append captions from JSONL rows {"id", "caption", "annotator"?}.
    Import {
        #[arg(long)]
        db: Option<PathBuf>,
        #[arg(long)]
        file: PathBuf,
        #[arg(long, default_value = "annotator")]
        annotator: String,
    },
    /// Annotate from the dataset's own captions (synthetic data only).
    Simulate {
        #[arg(long)]
        db: Option<PathBuf>,
        /// Every entry instead of only the exemplars.
        #[arg(long)]
        all: bool,
    },
}

fn parse_kind(s: &str) -> Result<DatasetKind, Error> {
    s.parse()
}

fn parse_mode(s: &str) -> Result<Mode, Error> {
    s.parse()
}

fn parse_serde<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

fn provider(slot: &mut Option<ProviderConfig>, endpoint: Option<Endpoint>, model: Option<String>) {
    match (slot.as_mut(), endpoint) {
        (_, Some(endpoint)) => {
            let model = model.or_else(|| slot.as_ref().map(|p| p.model.clone())).unwrap_or_default();
            *slot = Some(ProviderConfig { endpoint, model });
        }
        (Some(p), None) => set(&mut p.model, model),
        (None, None) => {}
    }
}

impl ProviderFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        provider(&mut cfg.llm, self.llm.clone(), self.llm_model.clone());
        provider(&mut cfg.multimodal, self.mm.clone(), self.mm_model.clone());
        provider(&mut cfg.captioner, self.captioner.clone(), None);
        set_opt(&mut cfg.domain, self.domain.clone());
        set(&mut cfg.k, self.k);
    }
}

/// File config first, then every flag that was given.
fn resolve(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.seed, cli.seed);
    set(&mut cfg.concurrency, cli.concurrency);
    match &cli.command {
        Command::Synthgen { out, length, noise_mode, trend_mode, .. } => {
            set_opt(&mut cfg.out, out.clone());
            set_opt(&mut cfg.length, *length);
            set(&mut cfg.noise_mode, *noise_mode);
            set(&mut cfg.trend_mode, *trend_mode);
        }
        Command::Db { action } => match action {
            DbAction::Build { db, embed, embed_model, .. } => {
                set_opt(&mut cfg.db, db.clone());
                provider(&mut cfg.embedding, embed.clone(), embed_model.clone());
            }
            DbAction::Validate { db } => set_opt(&mut cfg.db, db.clone()),
        },
        Command::Select { db, k, gain_threshold, .. } => {
            set_opt(&mut cfg.db, db.clone());
            set(&mut cfg.k, *k);
            set(&mut cfg.gain_threshold, *gain_threshold);
        }
        Command::Annotate { action } => match action {
            AnnotateAction::Export { db, out, domain } => {
                set_opt(&mut cfg.db, db.clone());
                set_opt(&mut cfg.out, out.clone());
                set_opt(&mut cfg.domain, domain.clone());
            }
            AnnotateAction::Import { db, .. } | AnnotateAction::Simulate { db, .. } => {
                set_opt(&mut cfg.db, db.clone())
            }
        },
        Command::Caption { db, mode, out, providers, .. } => {
            set_opt(&mut cfg.db, db.clone());
            set_opt(&mut cfg.out, out.clone());
            cfg.modes = vec![*mode];
            providers.apply(&mut cfg);
        }
        Command::Bench { db, modes, out, providers } => {
            set_opt(&mut cfg.db, db.clone());
            set_opt(&mut cfg.out, out.clone());
            if !modes.is_empty() {
                cfg.modes = modes.clone();
            }
            providers.apply(&mut cfg);
        }
        Command::Eval { out, .. } => set_opt(&mut cfg.out, out.clone()),
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let cfg = resolve(cli)?;
    if cli.dry_run {
        let mut out = std::io::stdout().lock();
        if let Err(e) = writeln!(out, "{}", serde_json::to_string_pretty(&cfg)?) {
            if e.kind() != std::io::ErrorKind::BrokenPipe {
                return Err(e.into());
            }
        }
        return Ok(());
    }
    match &cli.command {
        Command::Synthgen { kind, n, .. } => commands::synthgen(&cfg, *kind, *n),
        Command::Db { action: DbAction::Build { dataset, .. } } => commands::db_build(&cfg, dataset),
        Command::Db { action: DbAction::Validate { .. } } => commands::db_validate(&cfg),
        Command::Select { k, auto, strategy, trace, .. } => {
            commands::select(&cfg, strategy, *auto, k.is_some(), trace.as_deref())
        }
        Command::Annotate { action } => match action {
            AnnotateAction::Export { .. } => commands::annotate_export(&cfg),
            AnnotateAction::Import { file, annotator, .. } => commands::annotate_import(&cfg, file, annotator),
            AnnotateAction::Simulate { all, .. } => commands::annotate_simulate(&cfg, *all),
        },
        Command::Caption { mode, ids, .. } => commands::caption(&cfg, *mode, ids),
        Command::Bench { .. } => commands::bench(&cfg),
        Command::Eval { candidates, references, label, .. } => {
            commands::eval(&cfg, candidates, references, label)
        }
    }
}

/// 2 for configuration problems, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    let config = err
        .chain()
        .filter_map(|c| c.downcast_ref::<Error>())
        .any(Error::is_config);
    if config {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
