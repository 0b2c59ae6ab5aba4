//! Acceptance criteria 1-10, one PASS/FAIL line each.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use itertools::Itertools;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use tadacap_core::db::select_for_annotation;
use tadacap_core::embeddings::build_kernel;
use tadacap_core::metrics::{cider_d, compute_idf, rouge_l, spice_proxy};
use tadacap_core::pipeline::{run_benchmark, write_outputs, BenchmarkRun, EchoService, OracleService, PipelineConfig};
use tadacap_core::select::{brute_force_map, dpp_log_prob, greedy_map_select, DEFAULT_EPSILON};
use tadacap_core::synthgen::{
    gen_dataset, gen_stock_series, sample_params_in, GenOptions, NoiseMode, StockCatalog, StockOptions, TrendMode,
};
use tadacap_core::{Database, DatasetKind, Mode, SelectionStrategy, SimilarityKernel, StockParams};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn matrix(k: &SimilarityKernel) -> Vec<Vec<f64>> {
    (0..k.n()).map(|i| k.row(i).to_vec()).collect()
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

fn exp_normalization() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(1..=10);
        let dim = n + rng.random_range(0..4);
        let kernel = build_kernel(&gaussian_embeddings(&mut rng, n, dim)).unwrap();
        let m = matrix(&kernel);
        let mut total = 0.0;
        let mut prob = 0.0;
        for s in (0..n).powerset() {
            total += if s.is_empty() { 1.0 } else { det(&minor(&m, &s)) };
            prob += dpp_log_prob(&kernel, &s).map_err(|e| e.to_string())?.exp();
        }
        let plus_i: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| m[i][j] + f64::from(u8::from(i == j))).collect())
            .collect();
        let normalizer = det(&plus_i);
        ensure!(rel_close(total, normalizer, 1e-8), "n={n}: sum {total} vs det(L+I) {normalizer}");
        ensure!((prob - 1.0).abs() <= 1e-8, "n={n}: probabilities sum to {prob}");
        worst = worst.max((total - normalizer).abs() / normalizer);
    }
    let t = start.elapsed();
    ensure!(t < Duration::from_secs(30), "took {t:?}");
    Ok(format!("50 kernels, worst relative error {worst:.1e}, {t:.2?}"))
}

fn greedy_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut steps = 0;
    for _ in 0..200 {
        let n = rng.random_range(1..=20);
        let k = rng.random_range(1..=n.min(6));
        let dim = n + rng.random_range(1..4);
        let kernel = build_kernel(&gaussian_embeddings(&mut rng, n, dim)).unwrap();
        let m = matrix(&kernel);
        let sel = greedy_map_select(&kernel, k, DEFAULT_EPSILON).map_err(|e| e.to_string())?;
        ensure!(sel.len() == k, "n={n}: selected {} of {k}", sel.len());
        let mut prev = 0.0;
        for t in 0..sel.len() {
            let d = det(&minor(&m, &sel.indices[..=t]));
            if d < 1e-12 {
                break;
            }
            let direct = d.ln() - prev;
            ensure!(
                (sel.gains[t] - direct).abs() <= 1e-9,
                "n={n} step {t}: gain {} vs log-det difference {direct}",
                sel.gains[t]
            );
            if t > 0 {
                ensure!(sel.gains[t] <= sel.gains[t - 1] + 1e-9, "gains increase at step {t}: {:?}", sel.gains);
            }
            prev = d.ln();
            steps += 1;
        }
    }
    Ok(format!("200 kernels, {steps} greedy steps checked"))
}

fn greedy_optimal_on_clusters() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..100 {
        let c = rng.random_range(2..=5);
        let sizes: Vec<usize> = (0..c).map(|_| rng.random_range(1..=3)).collect();
        let (m, labels) = cluster_kernel(&mut rng, &sizes, 0.95, 0.05);
        let kernel = SimilarityKernel::from_matrix(m).unwrap();
        let mut greedy = greedy_map_select(&kernel, c, DEFAULT_EPSILON).unwrap().indices;
        greedy.sort_unstable();
        let brute = brute_force_map(&kernel, c).unwrap();
        ensure!(greedy == brute, "case {case}: greedy {greedy:?} vs brute force {brute:?}");
        let clusters: Vec<usize> = greedy.iter().map(|&i| labels[i]).sorted().collect();
        ensure!(clusters == (0..c).collect::<Vec<_>>(), "case {case}: clusters {clusters:?}");
    }
    Ok("100/100 cluster kernels".into())
}

fn kernel_validity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut min_eig = f64::INFINITY;
    for _ in 0..1000 {
        let n = rng.random_range(1..=30);
        let dim = rng.random_range(1..=40);
        let kernel = build_kernel(&gaussian_embeddings(&mut rng, n, dim)).unwrap();
        let m = matrix(&kernel);
        for i in 0..n {
            ensure!((m[i][i] - 1.0).abs() <= 1e-9, "diagonal {}", m[i][i]);
            for j in 0..i {
                ensure!((m[i][j] - m[j][i]).abs() <= 1e-12, "asymmetry at ({i},{j})");
            }
        }
        let dm = DMatrix::from_fn(n, n, |i, j| m[i][j]);
        let e = dm.symmetric_eigenvalues().min();
        ensure!(e >= -1e-8, "min eigenvalue {e} (n={n}, dim={dim})");
        min_eig = min_eig.min(e);
    }
    Ok(format!("1000 kernels, smallest eigenvalue {min_eig:.1e}"))
}

fn metric_oracles() -> Outcome {
    let s = |x: &str| vec![x.to_string()];
    let r = rouge_l("the price grows", &s("the price increases"), 1.2).unwrap();
    ensure!((r - 2.0 / 3.0).abs() <= 1e-9, "ROUGE-L {r}");

    // every n-gram of the first image is unique to it, so idf = ln 2 > 0
    let corpus = vec![s("price grows fast today"), s("knee angle falls")];
    let idf = compute_idf(&corpus, 4).unwrap();
    let same = cider_d("price grows fast today", &corpus[0], &idf, 4, 6.0);
    ensure!((same - 10.0).abs() <= 1e-9, "identical caption CIDEr-D {same}");

    // "price grows" vs 4 reference tokens: unigram cosine 2/(√2·2) = 1/√2,
    // bigram 1/√3, no trigrams or 4-grams, length gap 2 -> penalty e^(-4/72)
    let toy = cider_d("price grows", &corpus[0], &idf, 4, 6.0);
    let hand = 10.0 / 4.0 * (0.5f64.sqrt() + (1.0f64 / 3.0).sqrt()) * (-4.0f64 / 72.0).exp();
    ensure!((toy - hand).abs() <= 1e-6, "toy CIDEr-D {toy} vs hand {hand}");
    let miss = cider_d("price grows", &corpus[1], &idf, 4, 6.0);
    ensure!(miss.abs() <= 1e-6, "toy CIDEr-D against the other image {miss}");

    let sp = spice_proxy("price grow", &["price increase".to_string()]);
    ensure!(sp == 0.5, "spice_proxy {sp}");
    Ok(format!("ROUGE-L {r:.6}, CIDEr-D {same} / {toy:.6}, SPICE {sp}"))
}

fn stock_statistics() -> Outcome {
    let mut p = StockParams::flat(100.0, 1000);
    p.kappa = 0.3;
    p.seed = 11;
    let s = gen_stock_series(&p).unwrap();
    ensure!(s.iter().all(|v| *v == 100.0), "(a) flat series not constant");

    let mut p = StockParams::flat(100.0, 10_000);
    p.kappa = 0.05;
    p.sigma = 0.01;
    p.seed = 5;
    let s = gen_stock_series(&p).unwrap();
    let tail = s[5000..].iter().sum::<f64>() / 5000.0;
    ensure!((tail / 100.0 - 1.0).abs() <= 0.02, "(b) tail mean {tail}");

    let catalog = StockCatalog::bundled();
    let regime = catalog.get("trend-up").ok_or("no trend-up regime")?;
    let opts = StockOptions::default();
    ensure!(opts.length == 128, "default length {}", opts.length);
    let mut rising = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = gen_stock_series(&sample_params_in(regime, &opts, &mut rng, seed)).unwrap();
        rising += usize::from(s[s.len() - 1] > s[0]);
    }
    ensure!(rising >= 95, "(c) {rising}/100 trend-up series rise");

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut steps = 0usize;
    for i in 0..1000u64 {
        let p = StockParams {
            mean: rng.random_range(0.01..200.0),
            kappa: rng.random_range(0.0..=1.0),
            sigma: rng.random_range(0.0..2.0),
            trend: rng.random_range(-5.0..5.0),
            shock_prob: rng.random_range(0.0..=1.0),
            shock_sigma: rng.random_range(0.0..100.0),
            length: 1000,
            seed: i,
            noise_mode: if i % 2 == 0 { NoiseMode::Relative } else { NoiseMode::Absolute },
            trend_mode: if i % 3 == 0 { TrendMode::AnchorDrift } else { TrendMode::Additive },
            shock_regime: false,
        };
        let s = gen_stock_series(&p).unwrap();
        ensure!(s.iter().all(|v| v.is_finite() && *v >= 0.0), "(d) negative value with {p:?}");
        steps += s.len();
    }
    ensure!(steps >= 1_000_000, "(d) only {steps} steps");
    Ok(format!("tail mean {tail:.3}, {rising}/100 rising, {steps} fuzzed steps"))
}

fn run_modes(db: &Database, modes: &[Mode], llm: &str) -> Result<BenchmarkRun, String> {
    let llm: Arc<dyn tadacap_core::pipeline::CompletionService> = match llm {
        "oracle" => Arc::new(OracleService::new(DatasetKind::Stock)),
        _ => Arc::new(EchoService::default()),
    };
    run_benchmark(db, modes, &providers(llm), &PipelineConfig::default()).map_err(|e| e.to_string())
}

/// Generation through benchmark outputs; returns the files written.
fn protocol_run(seed: u64, dir: &std::path::Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut db = protocol_db(seed);
    let diverse = run_modes(&db, &[Mode::Diverse], "oracle")?;
    let d = &diverse.runs[0];
    ensure!(d.report.n_queries == 196 && d.traces.len() == 196, "diverse ran {} queries", d.traces.len());
    annotate_rest(&mut db);
    let rest = run_modes(&db, &[Mode::Nn, Mode::Random, Mode::Zs], "oracle")?;
    for r in &rest.runs {
        ensure!(r.traces.len() == 200, "{} ran {} queries", r.mode, r.traces.len());
    }
    for r in diverse.runs.iter().chain(&rest.runs) {
        for t in &r.traces {
            ensure!(!t.retrieved_ids.contains(&t.query_id), "{} retrieved its own query", t.query_id);
            let want = if r.mode == Mode::Zs { 0 } else { 4 };
            let got = example_pairs(&t.prompts[0]);
            ensure!(got == want && t.retrieved_ids.len() == want, "{} prompt for {} has {got} pairs", r.mode, t.query_id);
        }
    }
    let all = BenchmarkRun {
        runs: diverse.runs.into_iter().chain(rest.runs).collect(),
    };
    write_outputs(dir, &all).map_err(|e| e.to_string())?;
    db.save(&dir.join("db.jsonl")).map_err(|e| e.to_string())?;
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|f| {
            let f = f.unwrap();
            (f.file_name().to_string_lossy().into_owned(), std::fs::read(f.path()).unwrap())
        })
        .collect();
    files.sort();
    Ok(files)
}

fn pipeline_protocol() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let a = protocol_run(0, &tmp.path().join("a"))?;
    let t = start.elapsed();
    let b = protocol_run(0, &tmp.path().join("b"))?;
    ensure!(a.len() == 5, "wrote {} files", a.len());
    for ((name, x), (_, y)) in a.iter().zip(&b) {
        ensure!(x == y, "{name} differs between runs");
    }
    ensure!(t < Duration::from_secs(10), "run took {t:?}");
    Ok(format!("196 diverse / 200 nn, random, zs queries, 4 pairs each, byte-identical, {t:.2?}"))
}

// pinned from the first oracle run at seed 0
const GOLDEN_DIVERSE_ORACLE: f64 = 0.365504429954;
const GOLDEN_ZS_ECHO: f64 = 0.179912096055;

fn oracle_benefit() -> Outcome {
    let db = protocol_db(0);
    let diverse = run_modes(&db, &[Mode::Diverse], "oracle")?.runs[0].report.rouge_l;
    let zs = run_modes(&db, &[Mode::Zs], "echo")?.runs[0].report.rouge_l;
    ensure!(diverse > zs, "diverse/oracle {diverse} <= zs/echo {zs}");
    ensure!(
        (diverse - GOLDEN_DIVERSE_ORACLE).abs() <= 1e-9 && (zs - GOLDEN_ZS_ECHO).abs() <= 1e-9,
        "scores moved from golden values: diverse {diverse:.12} zs {zs:.12}"
    );
    Ok(format!("ROUGE-L diverse/oracle {diverse:.6} > zs/echo {zs:.6}"))
}

fn annotation_asymmetry() -> Outcome {
    let mut db = protocol_db(0);
    let annotated = db.entries().iter().filter(|e| e.is_annotated()).count();
    ensure!(annotated == 4, "{annotated} entries annotated");
    run_modes(&db, &[Mode::Diverse], "echo")?;
    let err = match run_modes(&db, &[Mode::Nn], "echo") {
        Ok(_) => return Err("nn ran with 4 annotations".into()),
        Err(e) => e,
    };
    ensure!(err.contains("annotat"), "diagnostic does not name annotation: {err}");
    annotate_rest(&mut db);
    let nn = run_modes(&db, &[Mode::Nn], "echo")?;
    ensure!(nn.runs[0].traces.len() == 200, "nn ran {} queries", nn.runs[0].traces.len());
    Ok(format!("nn refused with 4/200 annotated ({err}); ran after full annotation"))
}

fn roundtrip_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let db = protocol_db(9);
    let path = tmp.path().join("db.jsonl");
    db.save(&path).map_err(|e| e.to_string())?;
    let back = Database::load(&path).map_err(|e| e.to_string())?;
    ensure!(back.entries() == db.entries(), "database changed on round-trip");

    let opts = GenOptions::default();
    let g1 = gen_dataset(DatasetKind::Stock, 200, 9, &opts).unwrap();
    let g2 = gen_dataset(DatasetKind::Stock, 200, 9, &opts).unwrap();
    ensure!(g1 == g2, "datasets differ");
    ensure!(g1 != gen_dataset(DatasetKind::Stock, 200, 10, &opts).unwrap(), "seed ignored");

    let mut again = Database::from_samples(g2).unwrap();
    again.embed_builtin(&Default::default()).unwrap();
    let s1 = select_for_annotation(&mut again.clone(), SelectionStrategy::Diverse, 4, None, 9).unwrap();
    let s2 = select_for_annotation(&mut again, SelectionStrategy::Diverse, 4, None, 9).unwrap();
    ensure!(s1 == s2, "selections differ");

    let r1 = run_modes(&db, &[Mode::Diverse, Mode::Zs], "oracle")?;
    let r2 = run_modes(&back, &[Mode::Diverse, Mode::Zs], "oracle")?;
    for (a, b) in r1.runs.iter().zip(&r2.runs) {
        let prompts = |r: &tadacap_core::pipeline::ModeRun| r.traces.iter().map(|t| t.prompts.clone()).collect::<Vec<_>>();
        ensure!(prompts(a) == prompts(b), "{} prompts differ", a.mode);
        ensure!(a.report == b.report, "{} reports differ", a.mode);
    }
    Ok("round-trip equal; datasets, selections, prompts and reports repeat".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("DPP exp-normalization", exp_normalization),
        ("greedy gain consistency", greedy_consistency),
        ("greedy optimal on cluster kernels", greedy_optimal_on_clusters),
        ("kernel validity", kernel_validity),
        ("metric oracles", metric_oracles),
        ("SynthStock statistics", stock_statistics),
        ("pipeline protocol", pipeline_protocol),
        ("oracle beats zero-shot echo", oracle_benefit),
        ("annotation-cost asymmetry", annotation_asymmetry),
        ("round-trip and determinism", roundtrip_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {}/10 passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
