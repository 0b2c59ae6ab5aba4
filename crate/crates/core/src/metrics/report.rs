use std::fmt::Write;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub id: String,
    pub candidate: String,
    pub rouge_l: f64,
    pub cider_d: f64,
    pub spice_proxy: f64,
    pub spider: f64,
}

/// Corpus scores of one (mode, provider) run. Scores are on native scales:
/// CIDEr-D in [0, 10], the rest in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mode: String,
    pub provider: String,
    pub n_queries: usize,
    pub n_scored: usize,
    pub coverage: f64,
    pub rouge_l: f64,
    pub cider_d: f64,
    pub spice_proxy: f64,
    pub spider: f64,
    /// (query id, error message) for queries that did not produce a caption.
    pub failures: Vec<(String, String)>,
    pub samples: Vec<SampleScore>,
}

impl MetricReport {
    /// Averages per-sample scores. `n_queries` includes failed queries.
    pub fn from_scores(
        mode: impl Into<String>,
        provider: impl Into<String>,
        n_queries: usize,
        samples: Vec<SampleScore>,
        failures: Vec<(String, String)>,
    ) -> Self {
        let n = samples.len();
        let avg = |f: fn(&SampleScore) -> f64| {
            if n == 0 {
                0.0
            } else {
                samples.iter().map(f).sum::<f64>() / n as f64
            }
        };
        Self {
            mode: mode.into(),
            provider: provider.into(),
            n_queries,
            n_scored: n,
            coverage: if n_queries == 0 {
                0.0
            } else {
                n as f64 / n_queries as f64
            },
            rouge_l: avg(|s| s.rouge_l),
            cider_d: avg(|s| s.cider_d),
            spice_proxy: avg(|s| s.spice_proxy),
            spider: avg(|s| s.spider),
            failures,
            samples,
        }
    }

    /// The four table columns ×100 (CIDEr-D divided by 10 first).
    pub fn table_scores(&self) -> [f64; 4] {
        [
            100.0 * self.rouge_l,
            10.0 * self.cider_d,
            100.0 * self.spice_proxy,
            100.0 * self.spider,
        ]
    }
}

/// Markdown table in the ROUGE-L / CIDEr / SPICE / SPIDEr layout.
pub fn render_markdown(reports: &[MetricReport]) -> String {
    let mut out = String::new();
    out.push_str("| Mode | Provider | Queries | Coverage | ROUGE-L | CIDEr | SPICE-proxy | SPIDEr |\n");
    out.push_str("|---|---|---:|---:|---:|---:|---:|---:|\n");
    let mut flagged = false;
    for r in reports {
        let [a, b, c, d] = r.table_scores();
        let cov = if r.n_scored == 0 {
            flagged = true;
            format!("{:.2}*", r.coverage)
        } else {
            format!("{:.2}", r.coverage)
        };
        let _ = writeln!(
            out,
            "| {} | {} | {} | {cov} | {a:.1} | {b:.1} | {c:.1} | {d:.1} |",
            r.mode, r.provider, r.n_queries
        );
    }
    out.push_str("\nScores are ×100; the CIDEr column is CIDEr-D/10 ×100. ");
    out.push_str("SPICE-proxy is a content-word F1, not parser-based SPICE.\n");
    if flagged {
        out.push_str("\n\\* no query produced a caption for this row.\n");
    }
    out
}

/// CSV with one row per (mode, provider). Fixed formatting, so identical
/// inputs give identical bytes.
pub fn render_csv(reports: &[MetricReport]) -> String {
    let mut out = String::from("mode,provider,queries,scored,coverage,rouge_l,cider,spice_proxy,spider\n");
    for r in reports {
        let [a, b, c, d] = r.table_scores();
        let _ = writeln!(
            out,
            "{},{},{},{},{:.4},{a:.1},{b:.1},{c:.1},{d:.1}",
            r.mode, r.provider, r.n_queries, r.n_scored, r.coverage
        );
    }
    out
}
