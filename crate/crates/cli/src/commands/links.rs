//! `fullscan links`: learns links from labelled pairs and exports them as a
//! term index input.
//!
//! Output directory:
//! * `links.jsonl`: kept links with support, no-hire count and quality.
//! * `jobs.jsonl` + `schema.json`: ingest input for `build`, one document per
//!   job with its serving-graph node ids in the `link_node` clause.
//! * `seekers.jsonl`: node ids per seeker, i.e. each seeker's query.
//! * `report.json`: candidate counts and the held-out recall / false-positive
//!   sweep over quality thresholds.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use fullscan::corpus::SchemaFile;
use fullscan::link_learner::{
    build_link_graph, collapse_graph, export_to_index, learn_links, parse_pairs, seekers_from_pairs,
    threshold_sweep, JobCatalog, L1Options, LearnerConfig, LinkKey, LinkTemplate, LinkageReport,
    PruneConfig, Scoring, TrainingPair, NODE_CLAUSE,
};

use super::{open, write_json, write_jsonl};
use crate::config::LinksConfig;

#[derive(Debug, Clone)]
pub struct LinksArgs {
    pub train: PathBuf,
    pub holdout: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub config: LinksConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct TruthReport {
    pub planted: usize,
    pub retained: usize,
    pub recall: f64,
    pub spurious: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LinksReport {
    pub train_pairs: usize,
    pub holdout_pairs: usize,
    pub candidates: usize,
    pub kept: usize,
    pub seekers: usize,
    pub seekers_with_links: usize,
    pub jobs: usize,
    pub nodes: usize,
    /// Held-out linkage at the configured threshold.
    pub holdout: LinkageReport,
    pub sweep: Vec<LinkageReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<TruthReport>,
}

pub fn parse_template(s: &str) -> Result<LinkTemplate> {
    match s.split_once('=') {
        Some((a, b)) if !a.trim().is_empty() && !b.trim().is_empty() => {
            Ok(LinkTemplate::new(a.trim(), b.trim()))
        }
        _ => bail!("template {s:?} must look like seeker_attr=job_attr"),
    }
}

fn scoring(config: &LinksConfig) -> Result<Scoring> {
    match config.scoring.as_str() {
        "l1" => Ok(Scoring::L1 {
            lambda: config.lambda,
        }),
        "ratio" => Ok(Scoring::Ratio),
        other => bail!("unknown scoring {other:?} (expected l1 or ratio)"),
    }
}

fn read_pairs(path: &Path) -> Result<Vec<TrainingPair>> {
    parse_pairs(open(path)?).with_context(|| format!("parsing {}", path.display()))
}

/// Deterministic split: shuffles with `seed` and holds out a fraction.
pub fn split(mut pairs: Vec<TrainingPair>, fraction: f64, seed: u64) -> (Vec<TrainingPair>, Vec<TrainingPair>) {
    pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let held = ((pairs.len() as f64) * fraction.clamp(0.0, 1.0)).round() as usize;
    let train = pairs.split_off(held);
    (train, pairs)
}

fn default_sweep(threshold: f64) -> Vec<f64> {
    let mut grid: Vec<f64> = (-10..=10).map(|i| f64::from(i) * 0.5).collect();
    grid.push(threshold);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

pub fn run(args: &LinksArgs) -> Result<LinksReport> {
    let cfg = &args.config;
    if cfg.templates.is_empty() {
        bail!("no link templates given (--template seeker_attr=job_attr)");
    }
    let templates = cfg
        .templates
        .iter()
        .map(|t| parse_template(t))
        .collect::<Result<Vec<_>>>()?;
    let all = read_pairs(&args.train)?;
    let (train, holdout) = match &args.holdout {
        Some(path) => (all, read_pairs(path)?),
        None => split(all, cfg.holdout_fraction, cfg.seed),
    };
    if train.is_empty() {
        bail!("no training pairs");
    }
    let learner = LearnerConfig {
        prune: PruneConfig {
            min_support: cfg.min_support,
            max_meta_links: cfg.max_meta_links,
        },
        scoring: scoring(cfg)?,
        quality_threshold: cfg.threshold,
        l1: L1Options::default(),
    };
    let learned = learn_links(&train, &templates, &learner)?;

    // Every seeker and job seen in either split is served.
    let everything: Vec<TrainingPair> = train.iter().chain(&holdout).cloned().collect();
    let seekers = seekers_from_pairs(&everything);
    let jobs = JobCatalog::from_pairs(&everything);
    let graph = build_link_graph(&learned.kept, &seekers, &jobs, cfg.theta);
    let serving = collapse_graph(&graph);
    let export = export_to_index(&serving, jobs.ids())?;

    std::fs::create_dir_all(&args.out_dir)?;
    write_jsonl(&args.out_dir.join("links.jsonl"), &learned.kept)?;
    write_jsonl(&args.out_dir.join("jobs.jsonl"), &export.job_records(|_| None))?;
    write_jsonl(&args.out_dir.join("seekers.jsonl"), &export.seeker_records())?;
    write_json(
        &args.out_dir.join("schema.json"),
        &SchemaFile {
            clauses: vec![NODE_CLAUSE.to_string()],
            max_num_attr: export.max_nodes_per_job(),
            dim: 1,
        },
    )?;

    let sweep_at = if cfg.sweep.is_empty() {
        default_sweep(cfg.threshold)
    } else {
        cfg.sweep.clone()
    };
    let sweep = threshold_sweep(&learned.scored, &holdout, &templates, &sweep_at, cfg.max_meta_links)?;
    let at = threshold_sweep(&learned.scored, &holdout, &templates, &[cfg.threshold], cfg.max_meta_links)?
        .remove(0);

    let truth = match &args.truth {
        Some(path) => {
            let planted: Vec<LinkKey> = super::read_jsonl(path)?;
            let planted: BTreeSet<LinkKey> = planted.into_iter().map(|k| LinkKey::new(k.metas().to_vec())).collect();
            let kept: BTreeSet<&LinkKey> = learned.kept.iter().map(|l| &l.key).collect();
            let retained = planted.iter().filter(|k| kept.contains(k)).count();
            Some(TruthReport {
                planted: planted.len(),
                retained,
                recall: if planted.is_empty() { 0.0 } else { retained as f64 / planted.len() as f64 },
                spurious: kept.iter().filter(|k| !planted.contains(**k)).count(),
            })
        }
        None => None,
    };

    let report = LinksReport {
        train_pairs: train.len(),
        holdout_pairs: holdout.len(),
        candidates: learned.scored.len(),
        kept: learned.kept.len(),
        seekers: seekers.len(),
        seekers_with_links: export.seeker_nodes.values().filter(|n| !n.is_empty()).count(),
        jobs: jobs.len(),
        nodes: serving.num_nodes(),
        holdout: at,
        sweep,
        truth,
    };
    write_json(&args.out_dir.join("report.json"), &report)?;
    Ok(report)
}
