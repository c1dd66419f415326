//! Two-tower retrieval model: hashed-feature towers, in-batch softmax
//! training with easy and hard negatives, and recall metrics.

mod batch;
mod eval;
mod loss;
mod model;
mod train;

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use batch::{mix_easy_negatives, InventoryJob, PairExample, TrainingBatch};
pub use eval::{in_batch_recall, knn_index, knn_recall, mean_in_batch_recall, recall_at_k, score_matrix};
pub use loss::{hard_negative_filter, softmax_loss, softmax_rows, HardNegatives};
pub use model::{ModelConfig, Tower, TowerCache, TowerModel};
pub use train::{
    batch_objective, consolidate, finite_difference, relative_error, train, Anchor, Columns,
    MetricRecord, Objective, TrainConfig, TrainOutput,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TwoTowerError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("score matrix contains a non-finite value")]
    NonFinite,
    #[error("inventory has {available} jobs, {needed} needed per batch")]
    InventoryTooSmall { needed: usize, available: usize },
    #[error("actual set {0} is empty, recall is undefined")]
    EmptyActual(usize),
    #[error("training diverged in stage {stage} at step {step} (loss {loss})")]
    Diverged {
        stage: u8,
        step: usize,
        loss: f64,
        state: Box<TowerModel>,
    },
    #[error("index: {0}")]
    Index(String),
    #[error("io: {0}")]
    Io(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// One line of a training data file. Only pairs with `label` 1 are
/// positives; other labels are skipped for training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementRecord {
    pub seeker: Vec<String>,
    pub job_id: String,
    pub job: Vec<String>,
    #[serde(default = "one")]
    pub label: u8,
}

fn one() -> u8 {
    1
}

/// Parses engagement records and returns the positive pairs.
pub fn parse_engagements(reader: impl BufRead) -> Result<Vec<PairExample>, TwoTowerError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let err = |message: String| TwoTowerError::Parse { line: i + 1, message };
        let line = line.map_err(|e| err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let r: EngagementRecord = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        if r.label > 1 {
            return Err(err(format!("label must be 0 or 1, got {}", r.label)));
        }
        if r.label == 1 {
            out.push(PairExample {
                seeker: r.seeker,
                job_id: r.job_id,
                job: r.job,
            });
        }
    }
    Ok(out)
}

/// Distinct jobs of a pair list, first occurrence wins.
pub fn inventory_from_pairs(pairs: &[PairExample]) -> Vec<InventoryJob> {
    let mut seen = BTreeMap::new();
    for p in pairs {
        seen.entry(p.job_id.clone()).or_insert_with(|| p.job.clone());
    }
    seen.into_iter()
        .map(|(job_id, features)| InventoryJob { job_id, features })
        .collect()
}
