//! `fullscan bench`: latency and throughput by term pass rate and batch size,
//! plus bucket top-K against a full sort.

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use fullscan::bench::{bench_interleaved, bench_topk, uniform_scores, LatencyReport, TopKTiming};
use fullscan::synth::{pass_rate_corpus, pass_rate_terms, random_unit};
use fullscan::term_match::full_scan_tbr;
use fullscan::{CnfQuery, Executor, ExecutorConfig, FrozenIndex, HybridQuery};

use crate::config::BenchConfig;

#[derive(Debug, Clone)]
pub struct BenchArgs {
    /// Benchmark this index with match-all queries instead of a synthetic one.
    pub index: Option<PathBuf>,
    pub config: BenchConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct LatencyRow {
    /// Requested pass rate; `None` for match-all queries on a given index.
    pub pass_rate: Option<f64>,
    /// Fraction of rows that actually matched.
    pub measured_pass_rate: f64,
    #[serde(flatten)]
    pub report: LatencyReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub docs: usize,
    pub k: usize,
    pub latency: Vec<LatencyRow>,
    pub topk: Vec<TopKTiming>,
}

fn workload(index: &FrozenIndex, terms: &CnfQuery, n: usize, k: usize, seed: u64) -> Vec<HybridQuery> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| HybridQuery::new(terms.clone(), Some(random_unit(&mut rng, index.dim())), k))
        .collect()
}

pub fn run(args: &BenchArgs) -> Result<BenchReport> {
    let c = &args.config;
    if c.batch_sizes.is_empty() || c.queries == 0 || c.k == 0 {
        bail!("need at least one batch size, one query and k >= 1");
    }
    let max_batch = *c.batch_sizes.iter().max().expect("non-empty");
    let (index, cases): (FrozenIndex, Vec<(Option<f64>, CnfQuery)>) = match &args.index {
        Some(path) => (FrozenIndex::load(path)?, vec![(None, CnfQuery::match_all())]),
        None => (
            pass_rate_corpus(c.docs, c.dim, c.seed)?,
            c.pass_rates.iter().map(|&r| (Some(r), pass_rate_terms(r))).collect(),
        ),
    };
    let index = Arc::new(index);
    let mut exec = Executor::new(
        index.clone(),
        ExecutorConfig {
            max_batch,
            ..ExecutorConfig::default()
        },
    );
    let mut latency = Vec::new();
    for (rate, terms) in cases {
        let measured = full_scan_tbr(&index, &terms, 0).len() as f64 / index.num_docs() as f64;
        let queries = workload(&index, &terms, c.queries, c.k, c.seed + 1);
        for report in bench_interleaved(&mut exec, &queries, &c.batch_sizes, c.rounds)? {
            latency.push(LatencyRow {
                pass_rate: rate,
                measured_pass_rate: measured,
                report,
            });
        }
    }
    let mut topk = Vec::new();
    if c.topk_items > 0 {
        let items = uniform_scores(c.topk_items, c.seed + 2);
        for &g in &c.granularities {
            topk.push(bench_topk(&items, c.topk_k, g, 3));
        }
    }
    Ok(BenchReport {
        docs: index.num_docs(),
        k: c.k,
        latency,
        topk,
    })
}

/// Plain-text tables for terminals.
pub fn render(report: &BenchReport) -> String {
    let mut s = format!("{} docs, k = {}\n\n", report.docs, report.k);
    s.push_str("pass rate  batch      qps    mean ms    p50 ms    p90 ms    p99 ms\n");
    for row in &report.latency {
        let r = &row.report;
        s.push_str(&format!(
            "{:>9.3}  {:>5}  {:>7.0}  {:>9.2}  {:>8.2}  {:>8.2}  {:>8.2}\n",
            row.measured_pass_rate,
            r.batch_size,
            r.qps,
            r.mean_us / 1e3,
            r.p50_us / 1e3,
            r.p90_us / 1e3,
            r.p99_us / 1e3,
        ));
    }
    if !report.topk.is_empty() {
        s.push_str("\n      n      k     G   bucket ms   sort ms   speedup  identical\n");
        for t in &report.topk {
            s.push_str(&format!(
                "{:>7}  {:>5}  {:>4}  {:>10.2}  {:>8.2}  {:>7.2}x  {}\n",
                t.n,
                t.k,
                t.granularity,
                t.bucket_us / 1e3,
                t.full_sort_us / 1e3,
                t.speedup,
                t.identical
            ));
        }
    }
    s
}
