//! Term matching, then optional sign-quantized pre-selection, then exact
//! scoring and top-K, for single queries and batches.
//!
//! An [`Executor`] owns all scratch memory it will ever need, sized when it is
//! constructed from the index size and the maximum batch size. Requests that
//! would need more (a larger batch, a finer granularity) are rejected instead
//! of growing the buffers. One executor runs one request at a time; create
//! several to serve in parallel over the same [`FrozenIndex`].
//!
//! Batches are executed with a single pass over the index: every row is
//! tested against all queries of the batch, producing one messenger stream
//! ordered by `(row_id, batch_id)`. Quantized pre-selection and exact scoring
//! run over that merged stream, so each row's signature and embedding are
//! read once per batch rather than once per query.

use std::sync::Arc;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::corpus::FrozenIndex;
use crate::knn::{self, KnnError, TopKResult, TopKScratch, DEFAULT_GRANULARITY};
use crate::quantizer::{self, PreselectScratch, Signature, DEFAULT_QUANT_K_MULTIPLIER};
use crate::term_match::{self, CnfQuery, Messenger, TermError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueryError {
    #[error(transparent)]
    Term(#[from] TermError),
    #[error(transparent)]
    Knn(#[from] KnnError),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("quant_k must be at least 1")]
    InvalidQuantK,
    #[error("granularity must be in 1..={max}, got {got}")]
    Granularity { got: usize, max: usize },
    #[error("batch of {size} exceeds max batch {max}")]
    BatchTooLarge { size: usize, max: usize },
    #[error("empty batch")]
    EmptyBatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryOptions {
    pub quant_enabled: bool,
    /// Pre-selection budget; `None` means `200 * k`.
    pub quant_k: Option<usize>,
    pub granularity: usize,
}

impl Default for QueryOptions {
    fn default() -> Self {
        Self {
            quant_enabled: true,
            quant_k: None,
            granularity: DEFAULT_GRANULARITY,
        }
    }
}

impl QueryOptions {
    pub fn exact() -> Self {
        Self {
            quant_enabled: false,
            ..Self::default()
        }
    }

    pub fn effective_quant_k(&self, k: usize) -> usize {
        self.quant_k
            .unwrap_or_else(|| k.saturating_mul(DEFAULT_QUANT_K_MULTIPLIER))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridQuery {
    pub terms: CnfQuery,
    /// Without an embedding the query is term-only: matches in row order.
    pub embedding: Option<Vec<f64>>,
    pub k: usize,
    pub options: QueryOptions,
}

impl HybridQuery {
    pub fn new(terms: CnfQuery, embedding: Option<Vec<f64>>, k: usize) -> Self {
        Self {
            terms,
            embedding,
            k,
            options: QueryOptions::default(),
        }
    }

    pub fn with_options(mut self, options: QueryOptions) -> Self {
        self.options = options;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecutorConfig {
    pub max_batch: usize,
    pub max_granularity: usize,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        Self {
            max_batch: 16,
            max_granularity: 1000,
        }
    }
}

/// Wall time spent in each stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StageTimings {
    pub tbr: Duration,
    pub quant: Duration,
    pub ebr: Duration,
    pub topk: Duration,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.tbr + self.quant + self.ebr + self.topk
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutput {
    pub results: Vec<Result<TopKResult, QueryError>>,
    pub timings: StageTimings,
}

struct Prepared {
    k: usize,
    granularity: usize,
    /// Unit query vector; `None` for term-only queries.
    vector: Option<Vec<f64>>,
    /// Present when pre-selection is on for this query.
    quant: Option<(Signature, usize)>,
}

struct Scratch {
    merged: Vec<Messenger>,
    survivors: Vec<Messenger>,
    grouped: Vec<Messenger>,
    quant_scores: Vec<u32>,
    histograms: Vec<u32>,
    group_counts: Vec<usize>,
    group_starts: Vec<usize>,
    thresholds: Vec<(u32, usize)>,
    single: Vec<Messenger>,
    selected: Vec<Messenger>,
    top: Vec<Messenger>,
    preselect: PreselectScratch,
    topk: TopKScratch,
}

pub struct Executor {
    index: Arc<FrozenIndex>,
    config: ExecutorConfig,
    scratch: Scratch,
}

impl Executor {
    pub fn new(index: Arc<FrozenIndex>, config: ExecutorConfig) -> Self {
        let n = index.num_docs();
        let b = config.max_batch.max(1);
        let bits = index.codec().num_bits();
        let scratch = Scratch {
            merged: Vec::with_capacity(n * b),
            survivors: Vec::with_capacity(n * b),
            grouped: Vec::with_capacity(n * b),
            quant_scores: Vec::with_capacity(n * b),
            histograms: Vec::with_capacity((bits + 1) * b),
            group_counts: Vec::with_capacity(b),
            group_starts: Vec::with_capacity(b + 1),
            thresholds: Vec::with_capacity(b),
            single: Vec::with_capacity(n),
            selected: Vec::with_capacity(n),
            top: Vec::with_capacity(n),
            preselect: PreselectScratch::with_capacity(n, bits),
            topk: TopKScratch::with_capacity(n, config.max_granularity),
        };
        Self {
            index,
            config,
            scratch,
        }
    }

    pub fn index(&self) -> &Arc<FrozenIndex> {
        &self.index
    }

    pub fn config(&self) -> ExecutorConfig {
        self.config
    }

    fn prepare(&self, q: &HybridQuery) -> Result<Prepared, QueryError> {
        if q.k == 0 {
            return Err(QueryError::InvalidK);
        }
        let g = q.options.granularity;
        if g == 0 || g > self.config.max_granularity {
            return Err(QueryError::Granularity {
                got: g,
                max: self.config.max_granularity,
            });
        }
        q.terms.validate(self.index.num_clauses())?;
        let vector = match &q.embedding {
            Some(e) => Some(knn::prepare_query(&self.index, e)?.0),
            None => None,
        };
        let quant = match (&vector, q.options.quant_enabled) {
            (Some(v), true) => {
                let quant_k = q.options.effective_quant_k(q.k);
                if quant_k == 0 {
                    return Err(QueryError::InvalidQuantK);
                }
                let sig = self
                    .index
                    .codec()
                    .encode(v)
                    .expect("query length checked against index dim");
                Some((sig, quant_k))
            }
            _ => None,
        };
        Ok(Prepared {
            k: q.k,
            granularity: g,
            vector,
            quant,
        })
    }

    pub fn execute(&mut self, query: &HybridQuery) -> Result<TopKResult, QueryError> {
        self.execute_timed(query).map(|(r, _)| r)
    }

    /// Runs one query stage by stage.
    pub fn execute_timed(
        &mut self,
        query: &HybridQuery,
    ) -> Result<(TopKResult, StageTimings), QueryError> {
        let prepared = self.prepare(query)?;
        let index = &*self.index;
        let s = &mut self.scratch;
        let mut timings = StageTimings::default();

        let t = Instant::now();
        term_match::full_scan_into(index, &query.terms, 0, &mut s.single);
        timings.tbr = t.elapsed();

        let Some(vector) = &prepared.vector else {
            let t = Instant::now();
            s.single.truncate(prepared.k);
            let result = TopKResult::from_messengers(index, &s.single);
            timings.topk = t.elapsed();
            return Ok((result, timings));
        };

        let t = Instant::now();
        match &prepared.quant {
            Some((sig, quant_k)) => quantizer::preselect_with(
                index,
                sig,
                &s.single,
                *quant_k,
                &mut s.preselect,
                &mut s.selected,
            ),
            None => {
                s.selected.clear();
                s.selected.extend_from_slice(&s.single);
            }
        }
        timings.quant = t.elapsed();

        let t = Instant::now();
        for m in &mut s.selected {
            m.score = knn::dot(vector, index.embedding(m.row_id));
        }
        timings.ebr = t.elapsed();

        let t = Instant::now();
        knn::bucket_top_k_with(
            &s.selected,
            prepared.k,
            prepared.granularity,
            &mut s.topk,
            &mut s.top,
        )?;
        let result = TopKResult::from_messengers(index, &s.top);
        timings.topk = t.elapsed();
        Ok((result, timings))
    }

    /// Runs a batch with one merged scan. Invalid queries get their own error
    /// entry and do not take part; the rest of the batch still runs.
    pub fn execute_batch(&mut self, batch: &[HybridQuery]) -> Result<BatchOutput, QueryError> {
        if batch.is_empty() {
            return Err(QueryError::EmptyBatch);
        }
        if batch.len() > self.config.max_batch {
            return Err(QueryError::BatchTooLarge {
                size: batch.len(),
                max: self.config.max_batch,
            });
        }
        let prepared: Vec<Result<Prepared, QueryError>> =
            batch.iter().map(|q| self.prepare(q)).collect();
        let index = &*self.index;
        let s = &mut self.scratch;
        let b = batch.len();
        let mut timings = StageTimings::default();

        let t = Instant::now();
        let terms: Vec<Option<&CnfQuery>> = batch
            .iter()
            .zip(&prepared)
            .map(|(q, p)| p.is_ok().then_some(&q.terms))
            .collect();
        term_match::merged_scan_into(index, &terms, &mut s.merged);
        timings.tbr = t.elapsed();

        // Pre-selection over the merged stream: per-query histograms of
        // sign-match scores, then one filtering pass.
        let t = Instant::now();
        s.group_counts.clear();
        s.group_counts.resize(b, 0);
        for m in &s.merged {
            s.group_counts[m.batch_id as usize] += 1;
        }
        let bits = index.codec().num_bits();
        let needs_quant: Vec<Option<&Signature>> = prepared
            .iter()
            .zip(&s.group_counts)
            .map(|(p, &count)| match p {
                Ok(Prepared {
                    quant: Some((sig, quant_k)),
                    ..
                }) if count > *quant_k => Some(sig),
                _ => None,
            })
            .collect();
        s.survivors.clear();
        if needs_quant.iter().any(Option::is_some) {
            s.histograms.clear();
            s.histograms.resize((bits + 1) * b, 0);
            s.quant_scores.clear();
            for m in &s.merged {
                let score = match needs_quant[m.batch_id as usize] {
                    Some(sig) => {
                        let sc = quantizer::sign_matches(index.signature(m.row_id), sig.words(), bits);
                        s.histograms[m.batch_id as usize * (bits + 1) + sc as usize] += 1;
                        sc
                    }
                    None => 0,
                };
                s.quant_scores.push(score);
            }
            s.thresholds.clear();
            for (batch_id, p) in prepared.iter().enumerate() {
                let th = match (needs_quant[batch_id], p) {
                    (Some(_), Ok(Prepared { quant: Some((_, quant_k)), .. })) => {
                        let hist = &s.histograms[batch_id * (bits + 1)..(batch_id + 1) * (bits + 1)];
                        quantizer::threshold_from_histogram(hist, *quant_k)
                    }
                    _ => (0, usize::MAX),
                };
                s.thresholds.push(th);
            }
            for (m, &score) in s.merged.iter().zip(&s.quant_scores) {
                let batch_id = m.batch_id as usize;
                if needs_quant[batch_id].is_none() {
                    s.survivors.push(*m);
                    continue;
                }
                let (threshold, remaining) = &mut s.thresholds[batch_id];
                if score > *threshold {
                    s.survivors.push(*m);
                } else if score == *threshold && *remaining > 0 {
                    *remaining -= 1;
                    s.survivors.push(*m);
                }
            }
        } else {
            s.survivors.extend_from_slice(&s.merged);
        }
        timings.quant = t.elapsed();

        let t = Instant::now();
        let vectors: Vec<Option<&[f64]>> = prepared
            .iter()
            .map(|p| p.as_ref().ok().and_then(|p| p.vector.as_deref()))
            .collect();
        for m in &mut s.survivors {
            if let Some(v) = vectors[m.batch_id as usize] {
                m.score = knn::dot(v, index.embedding(m.row_id));
            }
        }
        timings.ebr = t.elapsed();

        // Stable counting sort by batch id keeps row order within each query.
        let t = Instant::now();
        s.group_counts.clear();
        s.group_counts.resize(b, 0);
        for m in &s.survivors {
            s.group_counts[m.batch_id as usize] += 1;
        }
        s.group_starts.clear();
        s.group_starts.push(0);
        for c in &s.group_counts {
            let last = *s.group_starts.last().unwrap();
            s.group_starts.push(last + c);
        }
        s.grouped.clear();
        s.grouped.resize(s.survivors.len(), Messenger::new(0, 0));
        let mut cursor: Vec<usize> = s.group_starts[..b].to_vec();
        for m in &s.survivors {
            let slot = &mut cursor[m.batch_id as usize];
            s.grouped[*slot] = *m;
            *slot += 1;
        }

        let mut results = Vec::with_capacity(b);
        for (batch_id, p) in prepared.into_iter().enumerate() {
            let p = match p {
                Ok(p) => p,
                Err(e) => {
                    results.push(Err(e));
                    continue;
                }
            };
            let group = &s.grouped[s.group_starts[batch_id]..s.group_starts[batch_id + 1]];
            let result = if p.vector.is_none() {
                Ok(TopKResult::from_messengers(index, &group[..group.len().min(p.k)]))
            } else {
                knn::bucket_top_k_with(group, p.k, p.granularity, &mut s.topk, &mut s.top)
                    .map(|()| TopKResult::from_messengers(index, &s.top))
                    .map_err(QueryError::from)
            };
            results.push(result);
        }
        timings.topk = t.elapsed();
        Ok(BatchOutput { results, timings })
    }
}
