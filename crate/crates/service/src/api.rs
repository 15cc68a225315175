use std::future::Future;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, SyncSender, TrySendError};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, Path, Request, State};
use axum::http::{HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use logchain_core::anchor::{AnchorBackend, AnchorError, SimulatedBackend};
use logchain_core::hash::{is_hex64, sha256_hex};
use logchain_core::ledger::LedgerError;
use logchain_core::node::{Logchain, NodeError};
use logchain_core::store::{payload_key, StorePaths};
use logchain_core::{Block, Ledger};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio::sync::oneshot;

use crate::auth::{ApiKey, ApiKeys, Plan};
use crate::config::{ConfigError, ServiceConfig};

pub const API_KEY_HEADER: &str = "x-api-key";
pub const NO_MATCH: &str = "no match has been found";

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Node(#[from] NodeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<LedgerError> for ServiceError {
    fn from(e: LedgerError) -> Self {
        ServiceError::Node(e.into())
    }
}

impl From<AnchorError> for ServiceError {
    fn from(e: AnchorError) -> Self {
        ServiceError::Node(e.into())
    }
}

/// Failed response: `{"status": "failed", "error": {"code", "description"}}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub description: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, description: impl Into<String>) -> Self {
        Self { status, code, description: description.into() }
    }

    fn unauthorized() -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or unknown API key")
    }

    fn unprocessable(code: &'static str, description: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, description)
    }

    fn internal(code: &'static str, description: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, code, description)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({
            "status": "failed",
            "error": { "code": self.code, "description": self.description },
        });
        (self.status, Json(body)).into_response()
    }
}

fn success(mut body: Value) -> Response {
    body["status"] = json!("success");
    Json(body).into_response()
}

struct Job {
    payload: String,
    reply: oneshot::Sender<Result<Block, String>>,
}

#[derive(Debug, Default)]
struct Counters {
    accepted: AtomicU64,
    rejected: AtomicU64,
}

#[derive(Clone)]
pub struct AppState {
    node: Arc<Logchain>,
    keys: Arc<ApiKeys>,
    queue: SyncSender<Job>,
    queue_depth: usize,
    max_data_bytes: usize,
    read_only: bool,
    counters: Arc<Counters>,
}

/// The HTTP front of one ledger. Appends go through a bounded queue to a
/// single writer thread; reads are served from committed state.
pub struct Service {
    state: AppState,
    writer: JoinHandle<()>,
}

impl Service {
    pub fn new(node: Arc<Logchain>, keys: ApiKeys, queue_depth: usize, max_data_bytes: usize) -> Self {
        let (queue, rx) = mpsc::sync_channel::<Job>(queue_depth);
        let read_only = node.read().is_read_only();
        let writer_node = node.clone();
        let writer = std::thread::Builder::new()
            .name("logchain-writer".into())
            .spawn(move || {
                for job in rx {
                    let result = writer_node.append(&job.payload).map(|o| o.block).map_err(|e| e.to_string());
                    let _ = job.reply.send(result);
                }
            })
            .expect("spawn writer thread");
        let state = AppState {
            node,
            keys: Arc::new(keys),
            queue,
            queue_depth,
            max_data_bytes,
            read_only,
            counters: Arc::default(),
        };
        Self { state, writer }
    }

    /// Builds the ledger, backend and key set described by `config`.
    pub fn from_config(config: &ServiceConfig) -> Result<Self, ServiceError> {
        let keys = match &config.api_keys_file {
            Some(path) => ApiKeys::load(path)?,
            None => {
                tracing::warn!("no api_keys_file configured; every request will be rejected");
                ApiKeys::default()
            }
        };
        Self::with_keys(config, keys)
    }

    /// Like [`from_config`](Self::from_config) with keys supplied directly.
    pub fn with_keys(config: &ServiceConfig, keys: ApiKeys) -> Result<Self, ServiceError> {
        config.validate()?;
        let ledger_config = config.ledger_config()?;
        let durability = config.durability.into();
        let anchor = config.backend.clone();
        let (sender, gas_price) = (anchor.sender.clone(), anchor.gas_price);
        let node = match &config.store_path {
            Some(dir) if config.read_only => {
                let ledger = Ledger::open_read_only(dir)?;
                let receipts = logchain_core::node::load_receipts(dir)?;
                let backend: Arc<dyn AnchorBackend> = Arc::new(SimulatedBackend::with_receipts(anchor, receipts));
                Logchain::new(ledger, backend, sender, gas_price)?
            }
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let receipts = StorePaths::new(dir).receipts();
                let backend: Arc<dyn AnchorBackend> =
                    Arc::new(SimulatedBackend::with_receipt_log(anchor, receipts, durability)?);
                Logchain::open(dir, ledger_config, durability, backend, sender, gas_price)?
            }
            None => {
                let backend: Arc<dyn AnchorBackend> = Arc::new(SimulatedBackend::new(anchor));
                Logchain::new(Ledger::in_memory(ledger_config)?, backend, sender, gas_price)?
            }
        };
        Ok(Self::new(Arc::new(node), keys, config.queue_depth, config.max_data_bytes))
    }

    pub fn node(&self) -> &Arc<Logchain> {
        &self.state.node
    }

    pub fn router(&self) -> Router {
        // JSON string escaping can inflate a payload up to six times.
        let body_limit = self.state.max_data_bytes.saturating_mul(6).saturating_add(4096);
        Router::new()
            .route("/submit_raw", post(submit_raw))
            .route("/submit_digest", post(submit_digest))
            .route("/verify_raw", post(verify_raw))
            .route("/verify_digest", post(verify_digest))
            .route("/verify_tb", post(verify_tb))
            .route("/timings", get(timings))
            .route("/stats", get(stats))
            .route("/receipts/{tx_hash}", get(receipt))
            .route("/healthz", get(healthz))
            .fallback(not_found)
            .layer(DefaultBodyLimit::max(body_limit))
            .layer(middleware::from_fn(access_log))
            .with_state(self.state.clone())
    }

    /// Serves until `shutdown` resolves, then waits for the writer to finish
    /// queued appends and for outstanding anchoring receipts.
    pub async fn serve(
        self,
        listener: TcpListener,
        shutdown: impl Future<Output = ()> + Send + 'static,
    ) -> std::io::Result<()> {
        let app = self.router();
        axum::serve(listener, app).with_graceful_shutdown(shutdown).await?;
        let Service { state, writer } = self;
        let node = state.node.clone();
        drop(state);
        tokio::task::spawn_blocking(move || {
            let _ = writer.join();
            node.drain();
        })
        .await
        .map_err(std::io::Error::other)?;
        Ok(())
    }

    /// Binds `addr` and serves in the background until [`RunningService::stop`].
    pub async fn spawn(self, addr: SocketAddr) -> std::io::Result<RunningService> {
        let listener = TcpListener::bind(addr).await?;
        let addr = listener.local_addr()?;
        let node = self.node().clone();
        let (tx, rx) = oneshot::channel::<()>();
        let task = tokio::spawn(self.serve(listener, async move {
            let _ = rx.await;
        }));
        Ok(RunningService { addr, node, shutdown: Some(tx), task })
    }
}

/// A service running on a background task.
pub struct RunningService {
    pub addr: SocketAddr,
    node: Arc<Logchain>,
    shutdown: Option<oneshot::Sender<()>>,
    task: tokio::task::JoinHandle<std::io::Result<()>>,
}

impl RunningService {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn node(&self) -> &Arc<Logchain> {
        &self.node
    }

    /// Graceful shutdown: in-flight requests finish and the writer drains.
    pub async fn stop(mut self) -> std::io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        (&mut self.task).await.map_err(std::io::Error::other)?
    }
}

async fn access_log(req: Request, next: Next) -> Response {
    let method = req.method().clone();
    let path = req.uri().path().to_owned();
    let start = Instant::now();
    let response = next.run(req).await;
    tracing::info!(
        target: "logchain::access",
        method = %method,
        path = %path,
        status = response.status().as_u16(),
        latency_ms = start.elapsed().as_secs_f64() * 1e3,
        "request"
    );
    response
}

fn authenticate(state: &AppState, headers: &HeaderMap) -> Result<ApiKey, ApiError> {
    headers
        .get(API_KEY_HEADER)
        .and_then(|v| v.to_str().ok())
        .and_then(|secret| state.keys.authenticate(secret))
        .cloned()
        .ok_or_else(ApiError::unauthorized)
}

fn body_bytes(body: Result<Bytes, BytesRejection>) -> Result<Bytes, ApiError> {
    body.map_err(|e| {
        if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
            ApiError::new(StatusCode::PAYLOAD_TOO_LARGE, "payload_too_large", e.body_text())
        } else {
            ApiError::new(e.status(), "invalid_request", e.body_text())
        }
    })
}

fn parse<T: for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::unprocessable("invalid_request", e.to_string()))
}

#[derive(Deserialize)]
struct DataRequest {
    data: String,
}

#[derive(Deserialize)]
struct DigestRequest {
    digest: String,
}

#[derive(Deserialize)]
struct TbRequest {
    terminal_block: Block,
}

/// Extracts a raw payload, enforcing the non-empty and size limits.
fn raw_payload(state: &AppState, headers: &HeaderMap, body: Result<Bytes, BytesRejection>) -> Result<String, ApiError> {
    authenticate(state, headers)?;
    let req: DataRequest = parse(&body_bytes(body)?)?;
    if req.data.is_empty() {
        return Err(ApiError::unprocessable("empty_payload", "data must not be empty"));
    }
    if req.data.len() > state.max_data_bytes {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            "payload_too_large",
            format!("data exceeds {} bytes", state.max_data_bytes),
        ));
    }
    Ok(req.data)
}

fn digest_payload(
    state: &AppState,
    headers: &HeaderMap,
    body: Result<Bytes, BytesRejection>,
) -> Result<String, ApiError> {
    authenticate(state, headers)?;
    let req: DigestRequest = parse(&body_bytes(body)?)?;
    if !is_hex64(&req.digest) {
        return Err(ApiError::unprocessable("malformed_digest", "digest must be 64 lowercase hex characters"));
    }
    Ok(req.digest)
}

async fn enqueue(state: &AppState, payload: String) -> Result<Response, ApiError> {
    if state.read_only {
        return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "read_only", "service is in read-only mode"));
    }
    let (reply, rx) = oneshot::channel();
    match state.queue.try_send(Job { payload, reply }) {
        Ok(()) => {}
        Err(TrySendError::Full(_)) => {
            state.counters.rejected.fetch_add(1, Ordering::Relaxed);
            return Err(ApiError::new(
                StatusCode::TOO_MANY_REQUESTS,
                "queue_full",
                format!("ingestion queue of {} is full", state.queue_depth),
            ));
        }
        Err(TrySendError::Disconnected(_)) => {
            return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "shutting_down", "ledger writer stopped"));
        }
    }
    let block = rx
        .await
        .map_err(|_| ApiError::internal("ledger_error", "ledger writer stopped"))?
        .map_err(|e| ApiError::internal("ledger_error", e))?;
    state.counters.accepted.fetch_add(1, Ordering::Relaxed);
    Ok(success(json!({
        "timestamp": block.timestamp,
        "block_index": block.index,
        "current_hash": block.current_hash,
    })))
}

async fn submit_raw(
    State(state): State<AppState>,
    headers: HeaderMap,
    body: Result<Bytes, BytesRejection>,
) -> Result<Response, ApiError> {
    let payload = raw_payload(&state, &headers, body)?;
    enqueue(&state, payload).await
}

async fn submit_digest(
    State(state): State<AppState>,
    headers: HeaderMap,
    body: Result<Bytes, BytesRejection>,
) -> Result<Response, ApiError> {
    let payload = digest_payload(&state, &headers, body)?;
    enqueue(&state, payload).await
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal("internal", e.to_string()))
}

async fn lookup(state: &AppState, payload: String) -> Result<Response, ApiError> {
    let node = state.node.clone();
    let key = payload_key(&payload);
    match blocking(move || node.lookup_payload(&key)).await? {
        Ok(matches) => {
            let mut body = json!({ "matches": matches, "count": matches.len() });
            if matches.is_empty() {
                body["message"] = json!(NO_MATCH);
            }
            Ok(success(body))
        }
        Err(NodeError::Ledger(e @ LedgerError::Integrity { .. })) => {
            Err(ApiError::internal("integrity_failure", e.to_string()))
        }
        Err(e) => Err(ApiError::internal("ledger_error", e.to_string())),
    }
}

async fn verify_raw(
    State(state): State<AppState>,
    headers: HeaderMap,
    body: Result<Bytes, BytesRejection>,
) -> Result<Response, ApiError> {
    let payload = raw_payload(&state, &headers, body)?;
    lookup(&state, payload).await
}

async fn verify_digest(
    State(state): State<AppState>,
    headers: HeaderMap,
    body: Result<Bytes, BytesRejection>,
) -> Result<Response, ApiError> {
    let payload = digest_payload(&state, &headers, body)?;
    lookup(&state, payload).await
}

async fn verify_tb(
    State(state): State<AppState>,
    headers: HeaderMap,
    body: Result<Bytes, BytesRejection>,
) -> Result<Response, ApiError> {
    let key = authenticate(&state, &headers)?;
    let req: TbRequest = parse(&body_bytes(body)?)?;
    let node = state.node.clone();
    let report = match blocking(move || node.verify_tb(&req.terminal_block)).await? {
        Ok(r) => r,
        Err(NodeError::Ledger(LedgerError::NotFound)) => {
            return Err(ApiError::new(StatusCode::NOT_FOUND, "not_found", "no terminal block with that hash"))
        }
        Err(e) => return Err(ApiError::internal("ledger_error", e.to_string())),
    };
    let mut body = json!({
        "valid": report.valid,
        "aggr_match": report.aggr_match,
        "anchored": report.anchored,
        "terminal_index": report.terminal_index,
    });
    if key.plan == Plan::Premium {
        body["receipt"] = json!(report.receipt);
        body["super_block"] = json!(report.super_block);
    }
    Ok(success(body))
}

async fn receipt(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(tx_hash): Path<String>,
) -> Result<Response, ApiError> {
    let key = authenticate(&state, &headers)?;
    if key.plan != Plan::Premium {
        return Err(ApiError::new(StatusCode::FORBIDDEN, "premium_required", "receipts require a premium plan"));
    }
    match state.node.backend().get_receipt(&tx_hash) {
        Ok(r) => Ok(success(json!({ "receipt": r }))),
        Err(_) => Err(ApiError::new(StatusCode::NOT_FOUND, "not_found", "no receipt with that transaction hash")),
    }
}

async fn timings(State(state): State<AppState>, headers: HeaderMap) -> Result<Response, ApiError> {
    authenticate(&state, &headers)?;
    let node = state.node.clone();
    let timings = blocking(move || node.timings()).await?;
    Ok(success(json!({ "timings": timings })))
}

async fn stats(State(state): State<AppState>, headers: HeaderMap) -> Result<Response, ApiError> {
    authenticate(&state, &headers)?;
    let node = state.node.clone();
    let s = blocking(move || node.stats()).await?;
    let mut body = serde_json::to_value(s).map_err(|e| ApiError::internal("internal", e.to_string()))?;
    body["accepted"] = json!(state.counters.accepted.load(Ordering::Relaxed));
    body["rejected"] = json!(state.counters.rejected.load(Ordering::Relaxed));
    body["queue_depth"] = json!(state.queue_depth);
    Ok(success(body))
}

async fn healthz() -> Response {
    success(json!({}))
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

/// Convenience for clients and tests: the digest accepted by `/submit_digest`
/// for a given file content.
pub fn digest_of(content: impl AsRef<[u8]>) -> String {
    sha256_hex(content)
}
