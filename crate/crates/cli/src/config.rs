//! Configuration files and their command-line overrides.
//!
//! One TOML file holds a table per subcommand. Every field can also be set
//! with a flag; flags win over the file, the file wins over defaults.
//!
//! ```toml
//! [serve]
//! index = "jobs.fsx"
//! listen = "0.0.0.0:7878"
//! workers = 4
//!
//! [train]
//! batch_size = 256
//! hard_k = 128
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use fullscan::two_tower::TrainConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub build: BuildConfig,
    pub serve: ServiceConfig,
    pub links: LinksConfig,
    pub train: TrainConfig,
    pub bench: BenchConfig,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildConfig {
    pub num_bits: usize,
    pub seed: u64,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            num_bits: 512,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub index: Option<PathBuf>,
    pub listen: String,
    /// Executors, each with its own scratch memory.
    pub workers: usize,
    pub max_batch: usize,
    pub default_k: usize,
    /// Pre-selection budget per requested result when a request gives none.
    pub quant_k_multiplier: usize,
    pub granularity: usize,
    pub max_granularity: usize,
    /// Requests waiting for a worker before new ones are turned away.
    pub queue_depth: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            index: None,
            listen: "127.0.0.1:7878".into(),
            workers: 2,
            max_batch: 16,
            default_k: 10,
            quant_k_multiplier: fullscan::quantizer::DEFAULT_QUANT_K_MULTIPLIER,
            granularity: fullscan::knn::DEFAULT_GRANULARITY,
            max_granularity: 1000,
            queue_depth: 256,
        }
    }
}

impl ServiceConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("workers", self.workers),
            ("max_batch", self.max_batch),
            ("default_k", self.default_k),
            ("quant_k_multiplier", self.quant_k_multiplier),
            ("granularity", self.granularity),
            ("max_granularity", self.max_granularity),
            ("queue_depth", self.queue_depth),
        ] {
            if v == 0 {
                bail!("{name} must be positive");
            }
        }
        if self.granularity > self.max_granularity {
            bail!(
                "granularity {} exceeds max_granularity {}",
                self.granularity,
                self.max_granularity
            );
        }
        if self.index.is_none() {
            bail!("no index given (--index or [serve] index)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinksConfig {
    /// `seeker_attr=job_attr` pairs.
    pub templates: Vec<String>,
    /// `l1` or `ratio`.
    pub scoring: String,
    pub lambda: f64,
    pub min_support: u32,
    pub max_meta_links: usize,
    pub threshold: f64,
    /// Per-seeker liquidity target.
    pub theta: usize,
    /// Share of pairs held out for the report when no holdout file is given.
    pub holdout_fraction: f64,
    /// Thresholds for the report sweep; empty means a default grid.
    pub sweep: Vec<f64>,
    pub seed: u64,
}

impl Default for LinksConfig {
    fn default() -> Self {
        Self {
            templates: Vec::new(),
            scoring: "l1".into(),
            lambda: 1e-3,
            min_support: 3,
            max_meta_links: fullscan::link_learner::DEFAULT_MAX_META_LINKS,
            threshold: 0.0,
            theta: 1000,
            holdout_fraction: 0.2,
            sweep: Vec::new(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub docs: usize,
    pub dim: usize,
    pub num_bits: usize,
    pub pass_rates: Vec<f64>,
    pub batch_sizes: Vec<usize>,
    pub queries: usize,
    pub rounds: usize,
    pub k: usize,
    pub topk_items: usize,
    pub topk_k: usize,
    pub granularities: Vec<usize>,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            docs: 100_000,
            dim: 64,
            num_bits: 512,
            pass_rates: vec![0.1, 0.33],
            batch_sizes: vec![1, 8],
            queries: 64,
            rounds: 3,
            k: 100,
            topk_items: 1_000_000,
            topk_k: 2000,
            granularities: vec![2, 100],
            seed: 0,
        }
    }
}

/// Overwrites `target` when a flag was given.
pub fn set<T>(target: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *target = v;
    }
}
