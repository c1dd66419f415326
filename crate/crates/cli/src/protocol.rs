//! Wire format of the query service, version 1.
//!
//! Request, sent alone or as a JSON array for batch execution:
//!
//! ```json
//! {"clauses": {"geo": [934]}, "embedding": [0.6, 0.8], "k": 10,
//!  "options": {"quant": true, "quant_k": 2000, "granularity": 100}}
//! ```
//!
//! Single response: `{"version": 1, "results": [{"doc_id", "score"}], "timings_us": {...}}`.
//! Batch response: `{"version": 1, "responses": [...], "timings_us": {...}}`,
//! where each entry holds either `results` or `error`. Request-level failures
//! use HTTP 400 (or 503 when the queue is full) with `{"error": {"code", "message"}}`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use fullscan::knn::KnnError;
use fullscan::pipeline::StageTimings;
use fullscan::term_match::TermError;
use fullscan::{CnfQuery, FrozenIndex, HybridQuery, QueryError, QueryOptions, TopKResult};

use crate::config::ServiceConfig;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryRequest {
    #[serde(default)]
    pub clauses: BTreeMap<String, Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default)]
    pub options: RequestOptions,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestOptions {
    /// Sign-quantized pre-selection; on unless set to false.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quant: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quant_k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub granularity: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitOut {
    pub doc_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingsOut {
    pub tbr: f64,
    pub quant: f64,
    pub ebr: f64,
    pub topk: f64,
    pub total: f64,
}

impl From<StageTimings> for TimingsOut {
    fn from(t: StageTimings) -> Self {
        let us = |d: std::time::Duration| d.as_secs_f64() * 1e6;
        Self {
            tbr: us(t.tbr),
            quant: us(t.quant),
            ebr: us(t.ebr),
            topk: us(t.topk),
            total: us(t.total()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub version: u32,
    pub results: Vec<HitOut>,
    pub timings_us: TimingsOut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BatchEntry {
    Results { results: Vec<HitOut> },
    Error { error: ErrorBody },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResponse {
    pub version: u32,
    pub responses: Vec<BatchEntry>,
    pub timings_us: TimingsOut,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

impl ErrorBody {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Self {
            code: code.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: ErrorBody,
}

pub fn hits(result: &TopKResult) -> Vec<HitOut> {
    result
        .hits
        .iter()
        .map(|h| HitOut {
            doc_id: h.doc_id.clone(),
            score: h.score,
        })
        .collect()
}

/// Stable error code for each query failure.
pub fn query_error(e: &QueryError) -> ErrorBody {
    let code = match e {
        QueryError::Term(TermError::UnknownClause(_) | TermError::UnknownSlot { .. }) => "unknown_clause",
        QueryError::Term(_) => "invalid_clause",
        QueryError::Knn(KnnError::Dimension { .. }) => "dimension_mismatch",
        QueryError::Knn(KnnError::NonFinite) => "non_finite_embedding",
        QueryError::Knn(_) => "invalid_embedding",
        QueryError::InvalidK => "invalid_k",
        QueryError::InvalidQuantK => "invalid_quant_k",
        QueryError::Granularity { .. } => "invalid_granularity",
        QueryError::BatchTooLarge { .. } => "batch_too_large",
        QueryError::EmptyBatch => "empty_batch",
    };
    ErrorBody::new(code, e.to_string())
}

/// Parsed request body.
#[derive(Debug, Clone, PartialEq)]
pub enum RequestBody {
    One(QueryRequest),
    Many(Vec<QueryRequest>),
}

pub fn parse_body(bytes: &[u8]) -> Result<RequestBody, ErrorBody> {
    let value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| ErrorBody::new("malformed_request", e.to_string()))?;
    let malformed = |e: serde_json::Error| ErrorBody::new("malformed_request", e.to_string());
    match value {
        serde_json::Value::Array(items) => items
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                serde_json::from_value(v).map_err(|e| ErrorBody::new("malformed_request", format!("request {i}: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(RequestBody::Many),
        v @ serde_json::Value::Object(_) => serde_json::from_value(v).map(RequestBody::One).map_err(malformed),
        _ => Err(ErrorBody::new(
            "malformed_request",
            "expected a request object or an array of them",
        )),
    }
}

/// Resolves clause names and fills in defaults.
pub fn to_query(
    req: &QueryRequest,
    index: &FrozenIndex,
    config: &ServiceConfig,
) -> Result<HybridQuery, QueryError> {
    let terms = CnfQuery::from_names(index, req.clauses.iter().map(|(n, a)| (n.as_str(), a.clone())))?;
    let k = req.k.unwrap_or(config.default_k);
    let options = QueryOptions {
        quant_enabled: req.options.quant.unwrap_or(true),
        quant_k: Some(
            req.options
                .quant_k
                .unwrap_or_else(|| k.saturating_mul(config.quant_k_multiplier)),
        ),
        granularity: req.options.granularity.unwrap_or(config.granularity),
    };
    Ok(HybridQuery::new(terms, req.embedding.clone(), k).with_options(options))
}
