use std::sync::Arc;
use std::time::{Duration, Instant};

use logchain_core::node::{TimingKind, TimingRecord};
use logchain_service::{ApiKeys, Plan, Service, ServiceConfig, ServiceError, API_KEY_HEADER};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::Semaphore;

use crate::scenario::Scenario;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("service unreachable at {url}: {reason}")]
    ServiceUnreachable { url: String, reason: String },
    #[error("unexpected response from {path}: {detail}")]
    Protocol { path: &'static str, detail: String },
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Minimal client for the ingestion API.
#[derive(Clone)]
pub struct Client {
    http: reqwest::Client,
    base: String,
    api_key: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubmitOutcome {
    Accepted { block_index: u64 },
    Rejected { status: u16 },
    Failed,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
pub struct RemoteStats {
    pub blocks: u64,
    pub super_blocks: u64,
    pub sealed: u64,
    pub anchored: u64,
    pub accepted: u64,
    pub rejected: u64,
}

impl Client {
    pub fn new(base: impl Into<String>, api_key: impl Into<String>) -> Self {
        Self {
            http: reqwest::Client::new(),
            base: base.into().trim_end_matches('/').to_string(),
            api_key: api_key.into(),
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    fn unreachable(&self, e: impl std::fmt::Display) -> BenchError {
        BenchError::ServiceUnreachable { url: self.base.clone(), reason: e.to_string() }
    }

    async fn get(&self, path: &'static str) -> Result<Value, BenchError> {
        let resp = self
            .http
            .get(format!("{}{path}", self.base))
            .header(API_KEY_HEADER, &self.api_key)
            .send()
            .await
            .map_err(|e| self.unreachable(e))?;
        let status = resp.status();
        let body: Value = resp.json().await.map_err(|e| BenchError::Protocol { path, detail: e.to_string() })?;
        if !status.is_success() {
            return Err(BenchError::Protocol { path, detail: format!("{status}: {body}") });
        }
        Ok(body)
    }

    pub async fn health(&self) -> Result<(), BenchError> {
        self.get("/healthz").await.map(|_| ())
    }

    pub async fn stats(&self) -> Result<RemoteStats, BenchError> {
        let body = self.get("/stats").await?;
        serde_json::from_value(body).map_err(|e| BenchError::Protocol { path: "/stats", detail: e.to_string() })
    }

    pub async fn timings(&self) -> Result<Vec<TimingRecord>, BenchError> {
        let body = self.get("/timings").await?;
        serde_json::from_value(body["timings"].clone())
            .map_err(|e| BenchError::Protocol { path: "/timings", detail: e.to_string() })
    }

    pub async fn submit_digest(&self, digest: &str) -> SubmitOutcome {
        let sent = self
            .http
            .post(format!("{}/submit_digest", self.base))
            .header(API_KEY_HEADER, &self.api_key)
            .json(&json!({ "digest": digest }))
            .send()
            .await;
        let Ok(resp) = sent else { return SubmitOutcome::Failed };
        let status = resp.status();
        if !status.is_success() {
            return SubmitOutcome::Rejected { status: status.as_u16() };
        }
        match resp.json::<Value>().await.ok().and_then(|b| b["block_index"].as_u64()) {
            Some(block_index) => SubmitOutcome::Accepted { block_index },
            None => SubmitOutcome::Failed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Maximum requests in flight.
    pub workers: usize,
    /// How long to wait for the expected super blocks to be anchored.
    pub anchor_timeout: Duration,
    pub poll_interval: Duration,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { workers: 32, anchor_timeout: Duration::from_secs(120), poll_interval: Duration::from_millis(20) }
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub scenario: Scenario,
    pub accepted: u32,
    /// Non-success HTTP responses.
    pub rejected: u32,
    /// Transport failures.
    pub failed: u32,
    /// From first request to last response.
    pub wall_seconds: f64,
    /// Super blocks anchored during the run.
    pub anchored: u64,
    pub records: Vec<TimingRecord>,
}

impl RunResult {
    pub fn sb_records(&self) -> impl Iterator<Item = &TimingRecord> {
        self.records.iter().filter(|r| r.kind == TimingKind::Sb)
    }
}

fn split(records: Vec<TimingRecord>) -> (Vec<TimingRecord>, Vec<TimingRecord>) {
    records.into_iter().partition(|r| r.kind.is_internal())
}

/// Submits the scenario's digests at its rate, paced against absolute
/// deadlines, then waits for anchoring and collects the run's timings.
pub async fn run_scenario(client: &Client, scenario: &Scenario, opts: &RunOptions) -> Result<RunResult, BenchError> {
    client.health().await?;
    let before_stats = client.stats().await?;
    let (before_internal, before_sb) = split(client.timings().await?);

    let semaphore = Arc::new(Semaphore::new(opts.workers.max(1)));
    let period = 1.0 / scenario.tps;
    let start = Instant::now();
    let start_tokio = tokio::time::Instant::from_std(start);
    let mut tasks = Vec::with_capacity(scenario.file_count as usize);
    for i in 0..scenario.file_count {
        tokio::time::sleep_until(start_tokio + Duration::from_secs_f64(i as f64 * period)).await;
        let permit = semaphore.clone().acquire_owned().await.expect("semaphore open");
        let client = client.clone();
        let digest = scenario.digest(i);
        tasks.push(tokio::spawn(async move {
            let outcome = client.submit_digest(&digest).await;
            drop(permit);
            outcome
        }));
    }
    let (mut accepted, mut rejected, mut failed) = (0, 0, 0);
    for t in tasks {
        match t.await.unwrap_or(SubmitOutcome::Failed) {
            SubmitOutcome::Accepted { .. } => accepted += 1,
            SubmitOutcome::Rejected { status } => {
                tracing::debug!(status, "submission rejected");
                rejected += 1
            }
            SubmitOutcome::Failed => failed += 1,
        }
    }
    let wall_seconds = start.elapsed().as_secs_f64();

    let target = before_stats.anchored + scenario.expected_supers() as u64;
    let deadline = Instant::now() + opts.anchor_timeout;
    let mut anchored = client.stats().await?.anchored;
    while anchored < target && Instant::now() < deadline {
        tokio::time::sleep(opts.poll_interval).await;
        anchored = client.stats().await?.anchored;
    }
    if anchored < target {
        tracing::warn!(anchored, target, "timed out waiting for anchoring");
    }

    let (internal, sb) = split(client.timings().await?);
    let mut records: Vec<TimingRecord> = internal.into_iter().skip(before_internal.len()).collect();
    records.extend(sb.into_iter().skip(before_sb.len()));
    Ok(RunResult {
        scenario: scenario.clone(),
        accepted,
        rejected,
        failed,
        wall_seconds,
        anchored: anchored - before_stats.anchored,
        records,
    })
}

/// Runs each scenario against a fresh in-process service on an ephemeral port.
#[derive(Clone, Debug, Default)]
pub struct LocalRunner {
    pub base: ServiceConfig,
    pub options: RunOptions,
}

impl LocalRunner {
    pub async fn run(&self, scenario: &Scenario) -> Result<RunResult, BenchError> {
        const KEY: &str = "bench";
        let config = scenario.service_config(&self.base);
        let keys = ApiKeys::new([ApiKeys::entry("bench", KEY, Plan::Premium)]).map_err(ServiceError::from)?;
        let service = Service::with_keys(&config, keys)?;
        let running = service.spawn((config.bind, 0).into()).await?;
        let client = Client::new(running.url(), KEY);
        let result = run_scenario(&client, scenario, &self.options).await;
        running.stop().await?;
        result
    }
}
