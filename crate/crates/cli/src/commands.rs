use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use log::{info, warn};
use serde::{Deserialize, Serialize};
use tadacap_core::db::{
    annotation_rows_from_references, check_mode_precondition, export_tasks, import_annotations,
    select_for_annotation, AnnotationImport, DbView,
};
use tadacap_core::embeddings::{EmbeddingCache, ExternalEmbedder, FeatureConfig, HttpEmbeddingService, PayloadKind};
use tadacap_core::metrics::{render_csv, render_markdown, score_items, MetricReport, ScoringItem};
use tadacap_core::pipeline::{
    agnostic_captions, generate_caption, run_benchmark, write_outputs, AgnosticCaptioner,
    CompletionService, EchoService, ExternalCaptioner, Providers, RuleBasedCaptioner, RunContext,
    LLM_API_KEY_ENV, MM_API_KEY_ENV,
};
use tadacap_core::synthgen::{
    gen_dataset, read_dataset, read_jsonl, write_dataset, write_jsonl, GenOptions, PlotStyle,
    StockOptions,
};
use tadacap_core::{Database, DatasetKind, Error, Mode, SelectionStrategy};

use crate::config::RunConfig;

pub fn synthgen(cfg: &RunConfig, kind: DatasetKind, n: usize) -> anyhow::Result<()> {
    let out = cfg.require_out()?;
    let opts = GenOptions {
        stock: StockOptions {
            length: cfg.length.unwrap_or(StockOptions::default().length),
            noise_mode: cfg.noise_mode,
            trend_mode: cfg.trend_mode,
        },
    };
    let samples = gen_dataset(kind, n, cfg.seed, &opts)?;
    write_dataset(out, &samples, &PlotStyle::default())?;
    info!("wrote {} {kind:?} samples to {}", samples.len(), out.display());
    Ok(())
}

fn embedding_cache_path(db: &Path) -> PathBuf {
    let mut p = db.as_os_str().to_owned();
    p.push(".embcache.json");
    PathBuf::from(p)
}

fn same_dir(a: &Path, b: &Path) -> bool {
    match (fs::canonicalize(a), fs::canonicalize(b)) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

fn parent(p: &Path) -> PathBuf {
    match p.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

pub fn db_build(cfg: &RunConfig, dataset: &Path) -> anyhow::Result<()> {
    let db_path = cfg.require_db()?;
    let mut samples = read_dataset(dataset)?;
    let (data_dir, db_dir) = (parent(dataset), parent(db_path));
    fs::create_dir_all(&db_dir)?;
    if !same_dir(&data_dir, &db_dir) {
        let base = fs::canonicalize(&data_dir)?;
        for s in &mut samples {
            if let Some(p) = &s.image_path {
                s.image_path = Some(base.join(p).to_string_lossy().into_owned());
            }
        }
    }
    let mut db = Database::from_samples(samples)?;
    db.set_base_dir(&db_dir);
    match &cfg.embedding {
        None => db.embed_builtin(&FeatureConfig::default())?,
        Some(p) => {
            let tadacap_core::pipeline::Endpoint::Http(url) = &p.endpoint else {
                return Err(Error::Config("embedding endpoint must be an http(s) URL".into()).into());
            };
            let retry = cfg.retry();
            let service = Arc::new(HttpEmbeddingService::from_env(url, &p.model, &retry)?);
            let cache_path = embedding_cache_path(db_path);
            let cache = if cache_path.exists() {
                EmbeddingCache::load(&cache_path)?
            } else {
                EmbeddingCache::new()
            };
            let embedder = ExternalEmbedder::new(service, Arc::new(cache))
                .with_retry(retry)
                .with_concurrency(cfg.concurrency);
            db.embed_external(&embedder, PayloadKind::Image)?;
            embedder.cache().save(&cache_path)?;
        }
    }
    db.save(db_path)?;
    info!("database {} with {} entries", db_path.display(), db.len());
    Ok(())
}

pub fn db_validate(cfg: &RunConfig) -> anyhow::Result<()> {
    let db = Database::load(cfg.require_db()?)?;
    let problems = db.validate();
    let annotated = db.entries().iter().filter(|e| e.is_annotated()).count();
    info!(
        "{} entries, {} exemplars, {} annotated, {} unembedded",
        db.len(),
        db.exemplars().len(),
        annotated,
        db.unembedded_ids().len()
    );
    for p in &problems {
        warn!("{p}");
    }
    if problems.is_empty() {
        Ok(())
    } else {
        anyhow::bail!("{} problems found", problems.len())
    }
}

#[derive(Serialize)]
struct SelectionTrace<'a> {
    #[serde(flatten)]
    selection: &'a tadacap_core::SubsetSelection,
    ids: Vec<&'a str>,
}

fn parse_strategy(s: &str) -> anyhow::Result<SelectionStrategy> {
    match s {
        "diverse" => Ok(SelectionStrategy::Diverse),
        "random" => Ok(SelectionStrategy::Random),
        "nn" | "nearest-neighbor" => Err(Error::Config(
            "nn retrieval is per query; annotation exemplars come from diverse or random selection".into(),
        )
        .into()),
        other => Err(Error::Config(format!("unknown strategy {other:?}")).into()),
    }
}

pub fn select(cfg: &RunConfig, strategy: &str, auto: bool, k_given: bool, trace: Option<&Path>) -> anyhow::Result<()> {
    let strategy = parse_strategy(strategy)?;
    let db_path = cfg.require_db()?;
    let mut db = Database::load(db_path)?;
    let (k, threshold) = if auto {
        if strategy != SelectionStrategy::Diverse {
            return Err(Error::Config("--auto applies to the diverse strategy only".into()).into());
        }
        (if k_given { cfg.k } else { db.len() }, Some(cfg.gain_threshold))
    } else {
        (cfg.k, None)
    };
    let selection = select_for_annotation(&mut db, strategy, k, threshold, cfg.seed)?;
    let ids: Vec<&str> = selection.indices.iter().map(|&i| db.entries()[i].id()).collect();
    let trace_path = trace.map(Path::to_path_buf).unwrap_or_else(|| {
        let mut p = db_path.as_os_str().to_owned();
        p.push(".selection.json");
        PathBuf::from(p)
    });
    let text = serde_json::to_string_pretty(&SelectionTrace { selection: &selection, ids: ids.clone() })?;
    fs::write(&trace_path, text + "\n")?;
    info!("selected {} exemplars: {}", ids.len(), ids.join(", "));
    db.save(db_path)?;
    Ok(())
}

fn domain(cfg: &RunConfig, db: &Database) -> String {
    cfg.domain
        .clone()
        .unwrap_or_else(|| db.kind().map_or("time-series", |k| k.default_domain()).to_string())
}

pub fn annotate_export(cfg: &RunConfig) -> anyhow::Result<()> {
    let db = Database::load(cfg.require_db()?)?;
    let out = cfg.require_out()?;
    let tasks = export_tasks(&db, &domain(cfg, &db));
    write_jsonl(out, &tasks)?;
    info!("exported {} annotation tasks to {}", tasks.len(), out.display());
    Ok(())
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

pub fn annotate_import(cfg: &RunConfig, file: &Path, annotator: &str) -> anyhow::Result<()> {
    let db_path = cfg.require_db()?;
    let mut db = Database::load(db_path)?;
    let rows: Vec<AnnotationImport> = read_jsonl(file)?;
    let n = import_annotations(&mut db, &rows, annotator, now())?;
    db.save(db_path)?;
    info!("imported {n} captions");
    Ok(())
}

pub fn annotate_simulate(cfg: &RunConfig, all: bool) -> anyhow::Result<()> {
    let db_path = cfg.require_db()?;
    let mut db = Database::load(db_path)?;
    let ids: Vec<String> = db
        .entries()
        .iter()
        .filter(|e| (all || e.is_diverse_exemplar) && !e.is_annotated())
        .map(|e| e.id().to_string())
        .collect();
    let rows = annotation_rows_from_references(&db, ids.iter().map(String::as_str));
    let n = import_annotations(&mut db, &rows, "reference", now())?;
    db.save(db_path)?;
    info!("annotated {} entries from reference captions ({n} rows)", ids.len());
    Ok(())
}

fn connect(cfg: &RunConfig, p: &crate::config::ProviderConfig, env: &str, kind: DatasetKind) -> anyhow::Result<Arc<dyn CompletionService>> {
    Ok(p.endpoint.connect(&p.model, env, kind, &cfg.retry())?)
}

/// Builds only the providers the requested modes use; a missing one is a
/// configuration error raised before any request.
fn providers(cfg: &RunConfig, kind: DatasetKind, modes: &[Mode]) -> anyhow::Result<Providers> {
    let need_llm = modes.iter().any(|m| *m != Mode::MultimodalDirect);
    let need_mm = modes.contains(&Mode::MultimodalDirect);
    let captioner: Arc<dyn AgnosticCaptioner> = match &cfg.captioner {
        Some(p) if need_llm => Arc::new(ExternalCaptioner::new(connect(cfg, p, MM_API_KEY_ENV, kind)?, cfg.retry())),
        _ => Arc::new(RuleBasedCaptioner::default()),
    };
    let llm: Arc<dyn CompletionService> = match (&cfg.llm, need_llm) {
        (Some(p), true) => connect(cfg, p, LLM_API_KEY_ENV, kind)?,
        (None, true) => {
            return Err(Error::Config("no LLM endpoint configured; pass --llm (for example mock:oracle)".into()).into())
        }
        (_, false) => Arc::new(EchoService::default()),
    };
    let multimodal = match (&cfg.multimodal, need_mm) {
        (Some(p), true) => Some(connect(cfg, p, MM_API_KEY_ENV, kind)?),
        (None, true) => {
            return Err(Error::Config("multimodal-direct mode needs --mm".into()).into())
        }
        (_, false) => None,
    };
    Ok(Providers {
        captioner,
        llm,
        multimodal,
        retry: cfg.retry(),
    })
}

pub fn caption(cfg: &RunConfig, mode: Mode, ids: &[String]) -> anyhow::Result<()> {
    let db = Database::load(cfg.require_db()?)?;
    let out = cfg.require_out()?;
    check_mode_precondition(&db, mode)?;
    let providers = providers(cfg, db.kind().unwrap_or(DatasetKind::Real), &[mode])?;
    let pipeline = cfg.pipeline();
    let agnostic = agnostic_captions(&db, providers.captioner.as_ref(), cfg.concurrency)?;
    let ctx = RunContext {
        db: &db,
        providers: &providers,
        config: &pipeline,
        agnostic: &agnostic,
    };
    let queries: Vec<usize> = if ids.is_empty() {
        tadacap_core::db::leave_one_out_iter(&db, mode)
            .filter_map(|(q, _)| db.position(q.id()))
            .collect()
    } else {
        let unknown: Vec<String> = ids.iter().filter(|id| db.get(id).is_none()).cloned().collect();
        if !unknown.is_empty() {
            return Err(Error::UnknownIds(unknown).into());
        }
        ids.iter().filter_map(|id| db.position(id)).collect()
    };
    let mut traces = Vec::with_capacity(queries.len());
    for i in queries {
        let q = &db.entries()[i];
        traces.push(generate_caption(&ctx, q, &DbView::without(&db, i), mode)?);
    }
    fs::create_dir_all(out)?;
    write_jsonl(&out.join("captions.jsonl"), &traces)?;
    info!("wrote {} captions to {}", traces.len(), out.join("captions.jsonl").display());
    Ok(())
}

pub fn bench(cfg: &RunConfig) -> anyhow::Result<()> {
    let db = Database::load(cfg.require_db()?)?;
    let out = cfg.require_out()?;
    let providers = providers(cfg, db.kind().unwrap_or(DatasetKind::Real), &cfg.modes)?;
    let run = run_benchmark(&db, &cfg.modes, &providers, &cfg.pipeline())?;
    write_outputs(out, &run)?;
    let reports = run.reports();
    for r in &reports {
        let latency: f64 = run
            .runs
            .iter()
            .filter(|m| m.report.mode == r.mode)
            .flat_map(|m| &m.traces)
            .map(|t| t.latency.as_secs_f64())
            .sum();
        info!(
            "{}: {}/{} scored, ROUGE-L {:.1}, total model latency {latency:.2}s",
            r.mode,
            r.n_scored,
            r.n_queries,
            100.0 * r.rouge_l
        );
    }
    info!("report written to {}", out.display());
    Ok(())
}

/// `{id, caption}` rows; `caption` output traces are accepted as is.
#[derive(Deserialize)]
struct CaptionRow {
    #[serde(alias = "query_id")]
    id: String,
    caption: String,
}

/// Reference rows, or a dataset/database whose lines carry `in_domain`.
fn load_references(path: &Path) -> anyhow::Result<BTreeMap<String, Vec<String>>> {
    let rows: Vec<serde_json::Value> = read_jsonl(path)?;
    let mut refs: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (i, row) in rows.into_iter().enumerate() {
        if row.get("series").is_some() {
            let entry: tadacap_core::DbEntry = serde_json::from_value(row)
                .with_context(|| format!("{} entry {}", path.display(), i + 1))?;
            refs.entry(entry.id().to_string()).or_default().extend(entry.references());
        } else {
            let r: CaptionRow = serde_json::from_value(row)
                .with_context(|| format!("{} row {}", path.display(), i + 1))?;
            refs.entry(r.id).or_default().push(r.caption);
        }
    }
    Ok(refs)
}

pub fn eval(cfg: &RunConfig, candidates: &Path, references: &Path, label: &str) -> anyhow::Result<()> {
    let out = cfg.require_out()?;
    let cands: Vec<CaptionRow> = read_jsonl(candidates)?;
    let refs = load_references(references)?;
    let mut items = Vec::new();
    let mut failures = Vec::new();
    for c in cands.iter() {
        match refs.get(&c.id) {
            Some(r) if !r.is_empty() => items.push(ScoringItem {
                id: c.id.clone(),
                candidate: c.caption.clone(),
                references: r.clone(),
            }),
            _ => failures.push((c.id.clone(), "no references".to_string())),
        }
    }
    let scores = score_items(&items, &cfg.metrics)?;
    let report = MetricReport::from_scores("eval", label, cands.len(), scores, failures);
    fs::create_dir_all(out)?;
    let reports = [report];
    fs::write(out.join("results.md"), render_markdown(&reports))?;
    fs::write(out.join("results.csv"), render_csv(&reports))?;
    write_jsonl(&out.join("samples.jsonl"), &reports[0].samples)?;
    info!("scored {}/{} candidates", reports[0].n_scored, reports[0].n_queries);
    Ok(())
}
