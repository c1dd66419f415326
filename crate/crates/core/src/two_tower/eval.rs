//! Recall metrics.

use std::collections::HashSet;
use std::hash::Hash;
use std::sync::Arc;

use ndarray::Array2;

use super::batch::{InventoryJob, PairExample, TrainingBatch};
use super::model::{Tower, TowerModel};
use super::TwoTowerError;
use crate::corpus::{DocumentInput, FrozenIndex, IndexBuilder, IndexSchema};
use crate::pipeline::{Executor, ExecutorConfig, HybridQuery, QueryOptions};
use crate::quantizer::QuantCodec;
use crate::term_match::CnfQuery;

/// `(1/N) sum_i |R_i & A_i| / |A_i|`, with duplicates ignored.
pub fn recall_at_k<T: Eq + Hash>(retrieved: &[Vec<T>], actual: &[Vec<T>]) -> Result<f64, TwoTowerError> {
    if retrieved.len() != actual.len() {
        return Err(TwoTowerError::Shape(format!(
            "{} retrieved sets for {} actual sets",
            retrieved.len(),
            actual.len()
        )));
    }
    if actual.is_empty() {
        return Err(TwoTowerError::EmptyActual(0));
    }
    let mut total = 0.0;
    for (i, (r, a)) in retrieved.iter().zip(actual).enumerate() {
        let a: HashSet<&T> = a.iter().collect();
        if a.is_empty() {
            return Err(TwoTowerError::EmptyActual(i));
        }
        let r: HashSet<&T> = r.iter().collect();
        total += r.intersection(&a).count() as f64 / a.len() as f64;
    }
    Ok(total / actual.len() as f64)
}

/// Cosine scores `z[i][j]` between seeker row `i` and job column `j`.
pub fn score_matrix(model: &TowerModel, batch: &TrainingBatch<'_>) -> Array2<f64> {
    let s = model.forward(Tower::Seeker, &batch.seekers);
    let j = model.forward(Tower::Job, &batch.jobs);
    s.output.dot(&j.output.t())
}

/// Columns of the `k` best scores in a row, ties to the lower column.
pub(crate) fn top_columns(row: ndarray::ArrayView1<f64>, k: usize) -> Vec<usize> {
    let mut cols: Vec<usize> = (0..row.len()).collect();
    cols.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    cols.truncate(k);
    cols
}

/// Recall@k where each row retrieves from the batch's own jobs and its
/// target is its positive column.
pub fn in_batch_recall(model: &TowerModel, pairs: &[PairExample], k: usize) -> Result<f64, TwoTowerError> {
    if k == 0 || k > pairs.len() {
        return Err(TwoTowerError::Config(format!(
            "k must be in 1..={}, got {k}",
            pairs.len()
        )));
    }
    let batch = TrainingBatch::in_batch(pairs);
    let z = score_matrix(model, &batch);
    let retrieved: Vec<Vec<usize>> = z.rows().into_iter().map(|r| top_columns(r, k)).collect();
    let actual: Vec<Vec<usize>> = batch.positives.iter().map(|&p| vec![p]).collect();
    recall_at_k(&retrieved, &actual)
}

/// Mean in-batch recall over consecutive batches of `batch_size` (a trailing
/// partial batch is dropped).
pub fn mean_in_batch_recall(
    model: &TowerModel,
    pairs: &[PairExample],
    batch_size: usize,
    k: usize,
) -> Result<f64, TwoTowerError> {
    let chunks: Vec<&[PairExample]> = pairs.chunks_exact(batch_size.max(1)).collect();
    if chunks.is_empty() {
        return Err(TwoTowerError::Config(format!(
            "need at least {batch_size} pairs, got {}",
            pairs.len()
        )));
    }
    let mut total = 0.0;
    for c in &chunks {
        total += in_batch_recall(model, c, k)?;
    }
    Ok(total / chunks.len() as f64)
}

/// Indexes job-tower outputs of the inventory, with no term clauses.
pub fn knn_index(model: &TowerModel, inventory: &[InventoryJob]) -> Result<FrozenIndex, TwoTowerError> {
    let dim = model.config.out_dim;
    let schema = IndexSchema::new(Vec::new(), 0, dim).map_err(|e| TwoTowerError::Index(e.to_string()))?;
    let mut builder = IndexBuilder::new(schema);
    let feats: Vec<&[String]> = inventory.iter().map(|j| j.features.as_slice()).collect();
    let out = model.forward(Tower::Job, &feats).output;
    for (job, row) in inventory.iter().zip(out.rows()) {
        builder
            .add_document(DocumentInput {
                doc_id: job.job_id.clone(),
                clauses: Vec::new(),
                embedding: row.to_vec(),
            })
            .map_err(|e| TwoTowerError::Index(e.to_string()))?;
    }
    let codec = QuantCodec::new(dim, 64, 0).map_err(|e| TwoTowerError::Index(e.to_string()))?;
    builder.freeze(codec).map_err(|e| TwoTowerError::Index(e.to_string()))
}

/// Recall@k where each request retrieves from the whole inventory through the
/// retrieval pipeline (match-all terms, exact scoring) and its target is its
/// positive job id.
pub fn knn_recall(
    model: &TowerModel,
    requests: &[PairExample],
    inventory: &[InventoryJob],
    k: usize,
) -> Result<f64, TwoTowerError> {
    if k == 0 || k > inventory.len() {
        return Err(TwoTowerError::Config(format!(
            "k must be in 1..={}, got {k}",
            inventory.len()
        )));
    }
    let index = Arc::new(knn_index(model, inventory)?);
    let config = ExecutorConfig::default();
    let mut executor = Executor::new(index, config);
    let feats: Vec<&[String]> = requests.iter().map(|r| r.seeker.as_slice()).collect();
    let queries = model.forward(Tower::Seeker, &feats).output;
    let mut retrieved = Vec::with_capacity(requests.len());
    let all: Vec<HybridQuery> = queries
        .rows()
        .into_iter()
        .map(|q| {
            HybridQuery::new(CnfQuery::match_all(), Some(q.to_vec()), k).with_options(QueryOptions::exact())
        })
        .collect();
    for chunk in all.chunks(config.max_batch) {
        let out = executor
            .execute_batch(chunk)
            .map_err(|e| TwoTowerError::Index(e.to_string()))?;
        for r in out.results {
            let r = r.map_err(|e| TwoTowerError::Index(e.to_string()))?;
            retrieved.push(r.hits.into_iter().map(|h| h.doc_id).collect::<Vec<_>>());
        }
    }
    let actual: Vec<Vec<String>> = requests.iter().map(|r| vec![r.job_id.clone()]).collect();
    recall_at_k(&retrieved, &actual)
}
