//! Exact embedding scoring of selected rows and bucketized top-K selection.

use std::cmp::Ordering;

use thiserror::Error;

use crate::corpus::FrozenIndex;
use crate::term_match::Messenger;

/// Default bucket granularity for [`bucket_top_k`].
pub const DEFAULT_GRANULARITY: usize = 100;

/// Largest supported granularity (bucket ids are stored as `u16`).
pub const MAX_GRANULARITY: usize = (u16::MAX as usize - 1) / 2;

/// Slack allowed around the `[-1, 1]` score bounds for rounding error.
pub const SCORE_BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KnnError {
    #[error("query embedding has {found} dimensions, index expects {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("query embedding contains a non-finite value")]
    NonFinite,
    #[error("score {score} of row {row_id} is outside [-1, 1]")]
    ScoreOutOfBounds { row_id: u32, score: f64 },
    #[error("granularity must be in 1..={max}, got {got}")]
    Granularity { got: usize, max: usize },
}

/// Messengers carrying cosine scores, bounded by `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredMessengers {
    pub items: Vec<Messenger>,
    /// Set when the query embedding was not unit length and had to be normalized.
    pub query_renormalized: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hit {
    pub row_id: u32,
    pub doc_id: String,
    pub score: f64,
}

/// Descending by score, ties by ascending row id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TopKResult {
    pub hits: Vec<Hit>,
}

impl TopKResult {
    pub fn from_messengers(index: &FrozenIndex, items: &[Messenger]) -> Self {
        Self {
            hits: items
                .iter()
                .map(|m| Hit {
                    row_id: m.row_id,
                    doc_id: index.doc_id(m.row_id).to_string(),
                    score: m.score,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }

    pub fn row_ids(&self) -> Vec<u32> {
        self.hits.iter().map(|h| h.row_id).collect()
    }
}

/// Result order: higher score first, then lower row id.
#[inline]
pub fn rank_order(a: &Messenger, b: &Messenger) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.row_id.cmp(&b.row_id))
}

/// Inner product accumulated left to right in `f64`.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Returns the unit-length version of `query` and whether it had to be
/// rescaled (norm off by more than 1e-6). A zero query stays zero.
pub fn prepare_query(index: &FrozenIndex, query: &[f64]) -> Result<(Vec<f64>, bool), KnnError> {
    if query.len() != index.dim() {
        return Err(KnnError::Dimension {
            expected: index.dim(),
            found: query.len(),
        });
    }
    if query.iter().any(|x| !x.is_finite()) {
        return Err(KnnError::NonFinite);
    }
    let norm = query.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut out = vec![0.0; query.len()];
    crate::corpus::normalize_into(query, &mut out);
    Ok((out, (norm - 1.0).abs() > 1e-6))
}

/// Scores each candidate row against the query; other rows are never touched.
pub fn exact_scores(
    index: &FrozenIndex,
    query: &[f64],
    mut candidates: Vec<Messenger>,
) -> Result<ScoredMessengers, KnnError> {
    let (q, renormalized) = prepare_query(index, query)?;
    for m in &mut candidates {
        m.score = dot(&q, index.embedding(m.row_id));
    }
    Ok(ScoredMessengers {
        items: candidates,
        query_renormalized: renormalized,
    })
}

/// Scratch for [`bucket_top_k_with`].
#[derive(Debug, Default)]
pub(crate) struct TopKScratch {
    pub(crate) counts: Vec<u32>,
    pub(crate) buckets: Vec<u16>,
    pub(crate) suffix: Vec<Messenger>,
}

impl TopKScratch {
    pub(crate) fn with_capacity(n: usize, max_granularity: usize) -> Self {
        Self {
            counts: vec![0; 2 * max_granularity + 1],
            buckets: Vec::with_capacity(n),
            suffix: Vec::with_capacity(n),
        }
    }
}

#[inline]
fn bucket_of(score: f64, granularity: usize) -> usize {
    let g = granularity as f64;
    let b = (score * g).floor() + g;
    b.clamp(0.0, 2.0 * g) as usize
}

/// Selects the top `k` items by score without sorting the whole input.
///
/// Scores are mapped to `2G + 1` buckets with `floor(score * G) + G`; the
/// buckets are walked from the top until at least `k` items are gathered, and
/// only that suffix is sorted. Returns exactly `min(k, n)` items, identical to
/// sorting everything under [`rank_order`].
pub fn bucket_top_k(
    items: &[Messenger],
    k: usize,
    granularity: usize,
) -> Result<Vec<Messenger>, KnnError> {
    let mut scratch = TopKScratch::with_capacity(items.len(), granularity.min(MAX_GRANULARITY));
    let mut out = Vec::with_capacity(k.min(items.len()));
    bucket_top_k_with(items, k, granularity, &mut scratch, &mut out)?;
    Ok(out)
}

pub(crate) fn bucket_top_k_with(
    items: &[Messenger],
    k: usize,
    granularity: usize,
    scratch: &mut TopKScratch,
    out: &mut Vec<Messenger>,
) -> Result<(), KnnError> {
    out.clear();
    if granularity == 0 || granularity > MAX_GRANULARITY {
        return Err(KnnError::Granularity {
            got: granularity,
            max: MAX_GRANULARITY,
        });
    }
    let lo = -1.0 - SCORE_BOUND_SLACK;
    let hi = 1.0 + SCORE_BOUND_SLACK;
    if let Some(bad) = items.iter().find(|m| !(lo..=hi).contains(&m.score)) {
        return Err(KnnError::ScoreOutOfBounds {
            row_id: bad.row_id,
            score: bad.score,
        });
    }
    if k == 0 || items.is_empty() {
        return Ok(());
    }

    let num_buckets = 2 * granularity + 1;
    scratch.counts.clear();
    scratch.counts.resize(num_buckets, 0);
    scratch.buckets.clear();
    for m in items {
        let b = bucket_of(m.score, granularity);
        scratch.buckets.push(b as u16);
        scratch.counts[b] += 1;
    }

    let mut gathered = 0usize;
    let mut cutoff = 0usize;
    for b in (0..num_buckets).rev() {
        gathered += scratch.counts[b] as usize;
        if gathered >= k {
            cutoff = b;
            break;
        }
    }

    scratch.suffix.clear();
    scratch.suffix.extend(
        items
            .iter()
            .zip(&scratch.buckets)
            .filter(|(_, &b)| b as usize >= cutoff)
            .map(|(m, _)| *m),
    );
    scratch.suffix.sort_unstable_by(rank_order);
    out.extend(scratch.suffix.iter().take(k).copied());
    Ok(())
}
