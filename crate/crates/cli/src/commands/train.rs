//! `fullscan train` and `fullscan eval`.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use fullscan::two_tower::{
    inventory_from_pairs, knn_recall, mean_in_batch_recall, parse_engagements, train, InventoryJob,
    PairExample, TowerModel, TrainConfig,
};

use super::{open, read_jsonl, write_jsonl};

#[derive(Debug, Clone)]
pub struct TrainArgs {
    pub train: PathBuf,
    pub validation: Option<PathBuf>,
    pub inventory: Option<PathBuf>,
    pub model_out: PathBuf,
    pub stage1_out: Option<PathBuf>,
    pub metrics_out: Option<PathBuf>,
    pub config: TrainConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub train_pairs: usize,
    pub validation_pairs: usize,
    pub inventory: usize,
    pub batch_width: usize,
    pub final_loss: Option<f64>,
    pub stage1_val_recall: Option<f64>,
    pub stage2_val_recall: Option<f64>,
    pub model: PathBuf,
}

pub fn read_pairs(path: &Path) -> Result<Vec<PairExample>> {
    parse_engagements(open(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn read_inventory(path: Option<&Path>, fallback: &[PairExample]) -> Result<Vec<InventoryJob>> {
    match path {
        Some(p) => read_jsonl(p),
        None => Ok(inventory_from_pairs(fallback)),
    }
}

pub fn run_train(args: &TrainArgs) -> Result<TrainSummary> {
    let pairs = read_pairs(&args.train)?;
    let validation = match &args.validation {
        Some(p) => read_pairs(p)?,
        None => Vec::new(),
    };
    let inventory = read_inventory(args.inventory.as_deref(), &pairs)?;
    let out = train(&args.config, &pairs, &inventory, &validation)?;
    out.model.save(&args.model_out)?;
    if let Some(p) = &args.stage1_out {
        out.stage1.save(p)?;
    }
    if let Some(p) = &args.metrics_out {
        write_jsonl(p, &out.history)?;
    }
    let last_recall = |stage: u8| {
        out.history
            .iter()
            .filter(|r| r.stage == stage)
            .filter_map(|r| r.val_in_batch_recall)
            .next_back()
    };
    Ok(TrainSummary {
        train_pairs: pairs.len(),
        validation_pairs: validation.len(),
        inventory: inventory.len(),
        batch_width: args.config.width(),
        final_loss: out.history.last().map(|r| r.loss),
        stage1_val_recall: last_recall(1),
        stage2_val_recall: last_recall(2),
        model: args.model_out.clone(),
    })
}

#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub model: PathBuf,
    pub data: PathBuf,
    pub inventory: Option<PathBuf>,
    pub ks: Vec<usize>,
    pub batch_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecallLine {
    pub metric: &'static str,
    pub k: usize,
    /// Batch size for in-batch recall, inventory size for KNN recall.
    pub pool: usize,
    pub value: f64,
}

pub fn run_eval(args: &EvalArgs) -> Result<Vec<RecallLine>> {
    let model = TowerModel::load(&args.model)?;
    let pairs = read_pairs(&args.data)?;
    if pairs.is_empty() {
        bail!("no positive pairs in {}", args.data.display());
    }
    // The KNN pool holds every evaluated job plus any extra inventory.
    let mut inventory = inventory_from_pairs(&pairs);
    if let Some(p) = &args.inventory {
        let known: HashSet<String> = inventory.iter().map(|j| j.job_id.clone()).collect();
        let extra: Vec<InventoryJob> = read_jsonl(p)?;
        inventory.extend(extra.into_iter().filter(|j| !known.contains(&j.job_id)));
    }
    let batch = args.batch_size.min(pairs.len()).max(1);
    let mut out = Vec::new();
    for &k in &args.ks {
        if k <= batch {
            out.push(RecallLine {
                metric: "in_batch_recall",
                k,
                pool: batch,
                value: mean_in_batch_recall(&model, &pairs, batch, k)?,
            });
        }
        if k <= inventory.len() {
            out.push(RecallLine {
                metric: "knn_recall",
                k,
                pool: inventory.len(),
                value: knn_recall(&model, &pairs, &inventory, k)?,
            });
        }
    }
    if out.is_empty() {
        bail!("every k exceeds both the batch size and the inventory");
    }
    Ok(out)
}
