//! Query captioning and the leave-one-out benchmark.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::captioner::{AgnosticCaptioner, CaptionInput};
use super::prompt::{build_icl_prompt, build_zs_prompt, multimodal_instruction, ExamplePair, PromptBundle, TEMPLATE_VERSION};
use super::provider::{post_process, CompletionRequest, CompletionService};
use super::Mode;
use crate::db::{check_mode_precondition, leave_one_out_iter, retrieve, Database, DbEntry, DbView};
use crate::error::{Error, Result};
use crate::metrics::{render_csv, render_markdown, score_items, MetricConfig, MetricReport, ScoringItem};
use crate::retry::RetryPolicy;
use crate::synthgen::write_jsonl;
use crate::util::{mix_seed, series_bytes, sha256_hex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// In-context examples for nn and random; diverse uses every exemplar.
    pub k: usize,
    pub seed: u64,
    /// Domain descriptor; defaults to the dataset kind's.
    pub domain: Option<String>,
    /// Queries in flight at once.
    pub concurrency: usize,
    pub max_tokens: u32,
    pub metrics: MetricConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k: 4,
            seed: 0,
            domain: None,
            concurrency: 4,
            max_tokens: 256,
            metrics: MetricConfig::default(),
        }
    }
}

pub struct Providers {
    pub captioner: Arc<dyn AgnosticCaptioner>,
    pub llm: Arc<dyn CompletionService>,
    pub multimodal: Option<Arc<dyn CompletionService>>,
    pub retry: RetryPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionTrace {
    pub query_id: String,
    pub mode: Mode,
    pub retrieved_ids: Vec<String>,
    pub prompts: Vec<String>,
    pub raw_output: String,
    pub caption: String,
    pub provider_tags: Vec<String>,
    pub template_version: String,
    /// Wall time; not serialized so traces stay reproducible.
    #[serde(skip)]
    pub latency: Duration,
}

/// Agnostic caption per entry id, from one captioner.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AgnosticCaptions {
    pub tag: String,
    pub by_id: HashMap<String, String>,
    /// Captioner invocations made while building this map.
    pub computed: usize,
}

impl AgnosticCaptions {
    pub fn get(&self, id: &str) -> Result<&str> {
        self.by_id
            .get(id)
            .map(String::as_str)
            .ok_or_else(|| Error::Precondition(format!("no agnostic caption for {id}")))
    }
}

/// Captions every entry, reusing captions stored on entries by the same
/// captioner. Entries with identical content share one captioner call.
pub fn agnostic_captions(
    db: &Database,
    captioner: &dyn AgnosticCaptioner,
    concurrency: usize,
) -> Result<AgnosticCaptions> {
    let tag = captioner.tag().to_string();
    let mut by_id = HashMap::new();
    // content hash -> (payload, ids)
    let mut pending: Vec<(String, Option<Vec<u8>>, usize, Vec<String>)> = Vec::new();
    let mut slot: HashMap<String, usize> = HashMap::new();
    for (i, e) in db.entries().iter().enumerate() {
        if let Some((t, c)) = &e.agnostic_caption {
            if *t == tag {
                by_id.insert(e.id().to_string(), c.clone());
                continue;
            }
        }
        let image = if captioner.needs_image() {
            Some(fs::read(db.image_file(e)?)?)
        } else {
            None
        };
        let hash = sha256_hex(&image.clone().unwrap_or_else(|| series_bytes(e.series())));
        match slot.get(&hash) {
            Some(&s) => pending[s].3.push(e.id().to_string()),
            None => {
                slot.insert(hash.clone(), pending.len());
                pending.push((hash, image, i, vec![e.id().to_string()]));
            }
        }
    }
    let pool = thread_pool(concurrency)?;
    let texts: Vec<Result<String>> = pool.install(|| {
        pending
            .par_iter()
            .map(|(_, image, i, ids)| {
                let e = &db.entries()[*i];
                captioner
                    .caption(&CaptionInput {
                        series: e.series(),
                        image: image.as_deref(),
                    })
                    .map_err(|err| Error::Query {
                        query_id: ids[0].clone(),
                        source: Box::new(err),
                    })
            })
            .collect()
    });
    let computed = pending.len();
    for ((_, _, _, ids), text) in pending.into_iter().zip(texts) {
        let text = text?;
        for id in ids {
            by_id.insert(id, text.clone());
        }
    }
    Ok(AgnosticCaptions { tag, by_id, computed })
}

/// Stores captions on the entries so later runs can reuse them.
pub fn store_agnostic(db: &mut Database, captions: &AgnosticCaptions) {
    for e in db.entries_mut() {
        if let Some(c) = captions.by_id.get(e.id()) {
            e.agnostic_caption = Some((captions.tag.clone(), c.clone()));
        }
    }
}

fn thread_pool(n: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Everything one query needs besides its view of the database.
pub struct RunContext<'a> {
    pub db: &'a Database,
    pub providers: &'a Providers,
    pub config: &'a PipelineConfig,
    pub agnostic: &'a AgnosticCaptions,
}

impl RunContext<'_> {
    pub fn domain(&self) -> String {
        self.config.domain.clone().unwrap_or_else(|| {
            self.db
                .kind()
                .map_or("time-series", |k| k.default_domain())
                .to_string()
        })
    }

    fn complete(&self, service: &dyn CompletionService, req: &CompletionRequest) -> Result<(String, String)> {
        let raw = self.providers.retry.run(|| service.complete(req))?;
        let caption = post_process(&raw);
        if caption.is_empty() {
            return Err(Error::Provider("empty caption".into()));
        }
        Ok((raw, caption))
    }
}

/// The prompt a query would be sent with, plus the retrieved example ids.
pub fn build_prompt(ctx: &RunContext<'_>, query: &DbEntry, view: &DbView<'_>, mode: Mode) -> Result<(PromptBundle, Vec<String>)> {
    let domain = ctx.domain();
    let c_query = ctx.agnostic.get(query.id())?;
    let Some(strategy) = mode.strategy() else {
        return Ok((build_zs_prompt(c_query, &domain)?, Vec::new()));
    };
    let index = ctx.db.position(query.id()).unwrap_or(0) as u64;
    let seed = mix_seed(ctx.config.seed, index);
    let examples = retrieve(view, query, strategy, ctx.config.k, seed)?;
    let pairs = examples
        .iter()
        .map(|e| {
            Ok(ExamplePair {
                agnostic: ctx.agnostic.get(e.id())?.to_string(),
                in_domain: e.annotations[0].caption.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let bundle = build_icl_prompt(mode, &pairs, c_query, &domain)?;
    Ok((bundle, examples.iter().map(|e| e.id().to_string()).collect()))
}

/// Captions the multimodal model gives an image directly.
pub fn multimodal_direct(image: &[u8], domain: &str, service: &dyn CompletionService, retry: &RetryPolicy, max_tokens: u32) -> Result<(String, String)> {
    let req = CompletionRequest::with_image(multimodal_instruction(domain)?, image, max_tokens);
    let raw = retry.run(|| service.complete(&req))?;
    let caption = post_process(&raw);
    if caption.is_empty() {
        return Err(Error::Provider("empty caption".into()));
    }
    Ok((raw, caption))
}

fn caption_inner(ctx: &RunContext<'_>, query: &DbEntry, view: &DbView<'_>, mode: Mode) -> Result<CaptionTrace> {
    let start = Instant::now();
    let (prompt, retrieved, raw, caption, tags) = if mode == Mode::MultimodalDirect {
        let mm = ctx.providers.multimodal.as_ref().ok_or_else(|| {
            Error::Config("multimodal-direct mode needs a multimodal endpoint".into())
        })?;
        let image = fs::read(ctx.db.image_file(query)?)?;
        let (raw, caption) = multimodal_direct(&image, &ctx.domain(), mm.as_ref(), &ctx.providers.retry, ctx.config.max_tokens)?;
        (multimodal_instruction(&ctx.domain())?, Vec::new(), raw, caption, vec![mm.tag().to_string()])
    } else {
        let (bundle, retrieved) = build_prompt(ctx, query, view, mode)?;
        let req = CompletionRequest::new(bundle.text.clone(), ctx.config.max_tokens);
        let (raw, caption) = ctx.complete(ctx.providers.llm.as_ref(), &req)?;
        let tags = vec![ctx.agnostic.tag.clone(), ctx.providers.llm.tag().to_string()];
        (bundle.text, retrieved, raw, caption, tags)
    };
    Ok(CaptionTrace {
        query_id: query.id().to_string(),
        mode,
        retrieved_ids: retrieved,
        prompts: vec![prompt],
        raw_output: raw,
        caption,
        provider_tags: tags,
        template_version: TEMPLATE_VERSION.to_string(),
        latency: start.elapsed(),
    })
}

/// Captions one query against `view`; errors carry the query id.
pub fn generate_caption(ctx: &RunContext<'_>, query: &DbEntry, view: &DbView<'_>, mode: Mode) -> Result<CaptionTrace> {
    caption_inner(ctx, query, view, mode).map_err(|e| Error::Query {
        query_id: query.id().to_string(),
        source: Box::new(e),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeRun {
    pub mode: Mode,
    pub report: MetricReport,
    pub traces: Vec<CaptionTrace>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRun {
    pub runs: Vec<ModeRun>,
}

impl BenchmarkRun {
    pub fn reports(&self) -> Vec<MetricReport> {
        self.runs.iter().map(|r| r.report.clone()).collect()
    }

    pub fn report(&self, mode: Mode) -> Option<&MetricReport> {
        self.runs.iter().find(|r| r.mode == mode).map(|r| &r.report)
    }
}

fn provider_label(providers: &Providers, mode: Mode) -> String {
    match (mode, &providers.multimodal) {
        (Mode::MultimodalDirect, Some(mm)) => mm.tag().to_string(),
        (Mode::MultimodalDirect, None) => "none".into(),
        _ => providers.llm.tag().to_string(),
    }
}

/// Runs every mode over the leave-one-out queries and scores the captions
/// against each query's references. Query failures are recorded in the
/// report; unmet mode preconditions abort the run.
pub fn run_benchmark(db: &Database, modes: &[Mode], providers: &Providers, config: &PipelineConfig) -> Result<BenchmarkRun> {
    if config.k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if db.is_empty() {
        let runs = modes
            .iter()
            .map(|&mode| ModeRun {
                mode,
                report: MetricReport::from_scores(mode.as_str(), provider_label(providers, mode), 0, Vec::new(), Vec::new()),
                traces: Vec::new(),
            })
            .collect();
        return Ok(BenchmarkRun { runs });
    }
    for &mode in modes {
        check_mode_precondition(db, mode)?;
    }
    let agnostic = if modes.iter().any(|m| *m != Mode::MultimodalDirect) {
        agnostic_captions(db, providers.captioner.as_ref(), config.concurrency)?
    } else {
        AgnosticCaptions::default()
    };
    let ctx = RunContext {
        db,
        providers,
        config,
        agnostic: &agnostic,
    };
    let pool = thread_pool(config.concurrency)?;
    let mut runs = Vec::with_capacity(modes.len());
    for &mode in modes {
        let queries: Vec<(&DbEntry, DbView<'_>)> = leave_one_out_iter(db, mode).collect();
        let mut results: Vec<(String, Result<CaptionTrace>)> = pool.install(|| {
            queries
                .par_iter()
                .map(|(q, view)| (q.id().to_string(), generate_caption(&ctx, q, view, mode)))
                .collect()
        });
        results.sort_by(|a, b| a.0.cmp(&b.0));

        let mut traces = Vec::new();
        let mut items = Vec::new();
        let mut failures = Vec::new();
        for (id, r) in results {
            match r {
                Ok(t) => {
                    let refs = db.get(&id).map(|e| e.references()).unwrap_or_default();
                    if refs.is_empty() {
                        failures.push((id, "no reference captions".to_string()));
                    } else {
                        items.push(ScoringItem {
                            id,
                            candidate: t.caption.clone(),
                            references: refs,
                        });
                    }
                    traces.push(t);
                }
                Err(e) => {
                    log::warn!("{e}");
                    failures.push((id, e.to_string()));
                }
            }
        }
        let scores = score_items(&items, &config.metrics)?;
        let report = MetricReport::from_scores(mode.as_str(), provider_label(providers, mode), queries.len(), scores, failures);
        runs.push(ModeRun { mode, report, traces });
    }
    Ok(BenchmarkRun { runs })
}

#[derive(Serialize)]
struct SampleLine<'a> {
    mode: Mode,
    #[serde(flatten)]
    score: &'a crate::metrics::SampleScore,
}

/// Writes results.md, results.csv, samples.jsonl and traces.jsonl.
pub fn write_outputs(dir: &Path, run: &BenchmarkRun) -> Result<()> {
    fs::create_dir_all(dir)?;
    let reports = run.reports();
    fs::write(dir.join("results.md"), render_markdown(&reports))?;
    fs::write(dir.join("results.csv"), render_csv(&reports))?;
    let samples: Vec<SampleLine<'_>> = run
        .runs
        .iter()
        .flat_map(|r| r.report.samples.iter().map(move |s| SampleLine { mode: r.mode, score: s }))
        .collect();
    write_jsonl(&dir.join("samples.jsonl"), &samples)?;
    let traces: Vec<&CaptionTrace> = run.runs.iter().flat_map(|r| &r.traces).collect();
    write_jsonl(&dir.join("traces.jsonl"), &traces)?;
    Ok(())
}
