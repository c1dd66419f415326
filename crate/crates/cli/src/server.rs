//! Query service: an HTTP front end feeding a fixed pool of executors.
//!
//! Each worker thread owns one [`Executor`] and therefore its own scratch
//! memory, all allocated at startup. Requests wait in a bounded queue; when it
//! is full new requests get 503. On shutdown the listener stops accepting,
//! in-flight requests finish, and the workers drain the queue before exiting.

use std::future::Future;
use std::sync::Arc;
use std::thread::JoinHandle;

use anyhow::{Context, Result};
use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use crossbeam::channel::{self, Sender, TrySendError};
use serde_json::json;
use tokio::net::TcpListener;
use tokio::sync::oneshot;

use fullscan::pipeline::{BatchOutput, StageTimings};
use fullscan::{Executor, ExecutorConfig, FrozenIndex, HybridQuery, QueryError, TopKResult};

use crate::config::ServiceConfig;
use crate::protocol::{
    hits, parse_body, query_error, to_query, BatchEntry, BatchResponse, ErrorBody, ErrorResponse,
    QueryResponse, RequestBody, PROTOCOL_VERSION,
};

enum Work {
    One(HybridQuery),
    Many(Vec<HybridQuery>),
}

enum Outcome {
    One(Result<(TopKResult, StageTimings), QueryError>),
    Many(Result<BatchOutput, QueryError>),
}

struct Job {
    work: Work,
    reply: oneshot::Sender<Outcome>,
}

/// The executor pool.
pub struct WorkerPool {
    sender: Option<Sender<Job>>,
    handles: Vec<JoinHandle<()>>,
}

impl WorkerPool {
    pub fn start(index: Arc<FrozenIndex>, config: &ServiceConfig) -> Self {
        let (sender, receiver) = channel::bounded::<Job>(config.queue_depth);
        let exec_config = ExecutorConfig {
            max_batch: config.max_batch,
            max_granularity: config.max_granularity,
        };
        let handles = (0..config.workers)
            .map(|i| {
                let receiver = receiver.clone();
                let mut executor = Executor::new(index.clone(), exec_config);
                std::thread::Builder::new()
                    .name(format!("executor-{i}"))
                    .spawn(move || {
                        for job in receiver {
                            let outcome = match job.work {
                                Work::One(q) => Outcome::One(executor.execute_timed(&q)),
                                Work::Many(qs) => Outcome::Many(executor.execute_batch(&qs)),
                            };
                            // the client may have gone away
                            let _ = job.reply.send(outcome);
                        }
                    })
                    .expect("spawning executor thread")
            })
            .collect();
        Self {
            sender: Some(sender),
            handles,
        }
    }

    fn sender(&self) -> Sender<Job> {
        self.sender.clone().expect("pool is running")
    }

    /// Closes the queue and waits for the workers to finish what is queued.
    pub fn shutdown(mut self) {
        self.sender.take();
        for h in self.handles.drain(..) {
            let _ = h.join();
        }
    }
}

#[derive(Clone)]
struct AppState {
    index: Arc<FrozenIndex>,
    config: Arc<ServiceConfig>,
    jobs: Sender<Job>,
}

fn error(status: StatusCode, body: ErrorBody) -> Response {
    (status, Json(ErrorResponse { error: body })).into_response()
}

async fn submit(state: &AppState, work: Work) -> Result<Outcome, Response> {
    let (reply, rx) = oneshot::channel();
    match state.jobs.try_send(Job { work, reply }) {
        Ok(()) => {}
        Err(TrySendError::Full(_)) => {
            return Err(error(
                StatusCode::SERVICE_UNAVAILABLE,
                ErrorBody::new("overloaded", "request queue is full"),
            ))
        }
        Err(TrySendError::Disconnected(_)) => {
            return Err(error(
                StatusCode::SERVICE_UNAVAILABLE,
                ErrorBody::new("shutting_down", "service is shutting down"),
            ))
        }
    }
    rx.await.map_err(|_| {
        error(
            StatusCode::INTERNAL_SERVER_ERROR,
            ErrorBody::new("worker_failed", "executor stopped before answering"),
        )
    })
}

async fn query(State(state): State<AppState>, body: Bytes) -> Response {
    let parsed = match parse_body(&body) {
        Ok(p) => p,
        Err(e) => return error(StatusCode::BAD_REQUEST, e),
    };
    match parsed {
        RequestBody::One(req) => {
            let q = match to_query(&req, &state.index, &state.config) {
                Ok(q) => q,
                Err(e) => return error(StatusCode::BAD_REQUEST, query_error(&e)),
            };
            match submit(&state, Work::One(q)).await {
                Ok(Outcome::One(Ok((result, timings)))) => Json(QueryResponse {
                    version: PROTOCOL_VERSION,
                    results: hits(&result),
                    timings_us: timings.into(),
                })
                .into_response(),
                Ok(Outcome::One(Err(e))) => error(StatusCode::BAD_REQUEST, query_error(&e)),
                Ok(Outcome::Many(_)) => unreachable!("single request answered as batch"),
                Err(resp) => resp,
            }
        }
        RequestBody::Many(reqs) => {
            if reqs.is_empty() {
                return error(StatusCode::BAD_REQUEST, query_error(&QueryError::EmptyBatch));
            }
            if reqs.len() > state.config.max_batch {
                let e = QueryError::BatchTooLarge {
                    size: reqs.len(),
                    max: state.config.max_batch,
                };
                return error(StatusCode::BAD_REQUEST, query_error(&e));
            }
            // Requests that fail to resolve keep their position with an error.
            let resolved: Vec<Result<HybridQuery, QueryError>> = reqs
                .iter()
                .map(|r| to_query(r, &state.index, &state.config))
                .collect();
            let runnable: Vec<HybridQuery> = resolved.iter().filter_map(|r| r.as_ref().ok().cloned()).collect();
            let (mut outputs, timings) = if runnable.is_empty() {
                (Vec::new().into_iter(), StageTimings::default())
            } else {
                match submit(&state, Work::Many(runnable)).await {
                    Ok(Outcome::Many(Ok(out))) => (out.results.into_iter(), out.timings),
                    Ok(Outcome::Many(Err(e))) => return error(StatusCode::BAD_REQUEST, query_error(&e)),
                    Ok(Outcome::One(_)) => unreachable!("batch answered as single request"),
                    Err(resp) => return resp,
                }
            };
            let responses = resolved
                .into_iter()
                .map(|r| {
                    let result = match r {
                        Ok(_) => outputs.next().expect("one output per runnable query"),
                        Err(e) => Err(e),
                    };
                    match result {
                        Ok(res) => BatchEntry::Results { results: hits(&res) },
                        Err(e) => BatchEntry::Error { error: query_error(&e) },
                    }
                })
                .collect();
            Json(BatchResponse {
                version: PROTOCOL_VERSION,
                responses,
                timings_us: timings.into(),
            })
            .into_response()
        }
    }
}

async fn info(State(state): State<AppState>) -> Response {
    let index = &state.index;
    Json(json!({
        "version": PROTOCOL_VERSION,
        "num_docs": index.num_docs(),
        "dim": index.dim(),
        "clauses": index.schema().clause_names(),
        "num_bits": index.codec().num_bits(),
        "max_batch": state.config.max_batch,
        "default_k": state.config.default_k,
        "workers": state.config.workers,
    }))
    .into_response()
}

async fn not_found() -> Response {
    error(StatusCode::NOT_FOUND, ErrorBody::new("not_found", "no such endpoint"))
}

pub fn router(index: Arc<FrozenIndex>, config: Arc<ServiceConfig>, pool: &WorkerPool) -> Router {
    let state = AppState {
        index,
        config,
        jobs: pool.sender(),
    };
    Router::new()
        .route("/v1/query", post(query))
        .route("/v1/info", get(info))
        .route("/health", get(|| async { "ok" }))
        .fallback(not_found)
        .with_state(state)
}

/// Serves until `shutdown` resolves, then drains in-flight work. `on_bound`
/// receives the bound address (useful with port 0).
pub async fn serve(
    config: ServiceConfig,
    on_bound: impl FnOnce(std::net::SocketAddr),
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<()> {
    config.validate()?;
    let path = config.index.clone().expect("validated");
    let index = Arc::new(
        FrozenIndex::load(&path).with_context(|| format!("loading index {}", path.display()))?,
    );
    let listener = TcpListener::bind(&config.listen)
        .await
        .with_context(|| format!("binding {}", config.listen))?;
    let addr = listener.local_addr()?;
    let pool = WorkerPool::start(index.clone(), &config);
    tracing::info!(
        docs = index.num_docs(),
        workers = config.workers,
        max_batch = config.max_batch,
        %addr,
        "serving"
    );
    on_bound(addr);
    let app = router(index, Arc::new(config), &pool);
    axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await
        .context("server error")?;
    tokio::task::spawn_blocking(move || pool.shutdown()).await?;
    tracing::info!("stopped");
    Ok(())
}

/// Resolves on Ctrl-C or, on Unix, SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}
