//! Training batches: in-batch positives plus sampled easy negatives.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TwoTowerError;

/// A positive seeker/job pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairExample {
    pub seeker: Vec<String>,
    pub job_id: String,
    pub job: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InventoryJob {
    pub job_id: String,
    pub features: Vec<String>,
}

/// `m` seeker rows against `d = m + easy` job columns; row `i`'s positive is
/// column `positives[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingBatch<'a> {
    pub seekers: Vec<&'a [String]>,
    pub jobs: Vec<&'a [String]>,
    pub job_ids: Vec<&'a str>,
    pub positives: Vec<usize>,
    easy: usize,
}

impl<'a> TrainingBatch<'a> {
    /// Pure in-batch batch: `d = m`.
    pub fn in_batch(pairs: &'a [PairExample]) -> Self {
        Self {
            seekers: pairs.iter().map(|p| p.seeker.as_slice()).collect(),
            jobs: pairs.iter().map(|p| p.job.as_slice()).collect(),
            job_ids: pairs.iter().map(|p| p.job_id.as_str()).collect(),
            positives: (0..pairs.len()).collect(),
            easy: 0,
        }
    }

    pub fn m(&self) -> usize {
        self.seekers.len()
    }

    pub fn d(&self) -> usize {
        self.jobs.len()
    }

    /// Number of appended easy-negative columns.
    pub fn easy(&self) -> usize {
        self.easy
    }
}

/// Appends `n / p` jobs drawn uniformly without replacement from `inventory`.
pub fn mix_easy_negatives<'a, R: Rng + ?Sized>(
    pairs: &'a [PairExample],
    inventory: &'a [InventoryJob],
    n: usize,
    p: usize,
    rng: &mut R,
) -> Result<TrainingBatch<'a>, TwoTowerError> {
    if p == 0 || n % p != 0 {
        return Err(TwoTowerError::Config(format!("n={n} must be divisible by p={p}")));
    }
    let per_batch = n / p;
    if inventory.len() < per_batch {
        return Err(TwoTowerError::InventoryTooSmall {
            needed: per_batch,
            available: inventory.len(),
        });
    }
    let mut batch = TrainingBatch::in_batch(pairs);
    for j in sample(rng, inventory.len(), per_batch) {
        batch.jobs.push(&inventory[j].features);
        batch.job_ids.push(&inventory[j].job_id);
    }
    batch.easy = per_batch;
    debug_assert_eq!(batch.d(), batch.m() + n / p);
    Ok(batch)
}
