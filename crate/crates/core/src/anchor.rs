//! Anchoring of super blocks to an external chain.
//!
//! Two deterministic simulators stand in for the external vendors:
//!
//! * **public**: gas-priced; latency is lognormal around a fixed median with a
//!   per-tier cap chosen from the request's gas price. Each submission costs a
//!   fixed number of gas units.
//! * **private**: permissioned; latency is uniform in a fixed window and
//!   there is no per-transaction fee.
//!
//! Both draw a rare heavy-tail event that multiplies latency. All randomness
//! comes from one seeded ChaCha stream consumed in submission order, so the
//! same seed and request sequence produce the same receipts.
//!
//! Each backend resolves submissions in FIFO order on a single worker thread.
//! Latency is simulated: the worker only sleeps `latency * time_scale`, and
//! `time_scale` defaults to 0.

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::path::Path;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use parking_lot::{Condvar, Mutex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::block::{Block, BlockKind, Timestamp};
use crate::hash::sha256_hex;
use crate::store::{Durability, JsonLog, OpenMode, StoreError};

/// Gas units charged per super-block submission on the public backend.
pub const GAS_UNITS_PER_SB: u64 = 335_000;

#[derive(Debug, thiserror::Error)]
pub enum AnchorError {
    #[error("sender {0:?} is not on the allowlist")]
    NotAllowed(String),
    #[error("anchoring backend is down")]
    BackendDown,
    #[error("receipt not found")]
    NotFound,
    #[error("only super blocks can be anchored, got {0}")]
    NotSuper(BlockKind),
    #[error("anchoring backend stopped")]
    Closed,
    #[error("timed out waiting for receipt")]
    Timeout,
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Public,
    Private,
}

/// Latency cap for requests paying at least `gwei`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GasTier {
    pub gwei: u64,
    pub max_latency_secs: f64,
}

/// SafeLow / Standard / Fast suggestions and their confirmation windows.
pub fn default_tiers() -> Vec<GasTier> {
    vec![
        GasTier { gwei: 6, max_latency_secs: 1800.0 },
        GasTier { gwei: 9, max_latency_secs: 300.0 },
        GasTier { gwei: 20, max_latency_secs: 120.0 },
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnchorConfig {
    pub kind: BackendKind,
    pub seed: u64,
    pub tiers: Vec<GasTier>,
    /// Lognormal median of public confirmation latency.
    pub median_secs: f64,
    /// Lognormal shape; 0.5045 puts the mean near 23.1 s.
    pub sigma: f64,
    pub private_min_secs: f64,
    pub private_max_secs: f64,
    pub tail_probability: f64,
    pub tail_multiplier: f64,
    pub gas_units_per_sb: u64,
    /// Account the node submits as.
    pub sender: String,
    /// Senders allowed to submit; the node's own sender is always added.
    pub allowlist: Vec<String>,
    /// Gas price attached to public submissions.
    pub gas_price: Option<u64>,
    /// Real seconds slept per simulated second of latency.
    pub time_scale: f64,
}

impl Default for AnchorConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Private,
            seed: 0,
            tiers: default_tiers(),
            median_secs: 20.34,
            sigma: 0.5045,
            private_min_secs: 0.78,
            private_max_secs: 3.63,
            tail_probability: 0.002,
            tail_multiplier: 10.0,
            gas_units_per_sb: GAS_UNITS_PER_SB,
            sender: "logchain".into(),
            allowlist: Vec::new(),
            gas_price: None,
            time_scale: 0.0,
        }
    }
}

impl AnchorConfig {
    pub fn public(seed: u64, gas_price: Option<u64>) -> Self {
        Self { kind: BackendKind::Public, seed, gas_price, ..Self::default() }
    }

    pub fn private(seed: u64) -> Self {
        Self { kind: BackendKind::Private, seed, ..Self::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LatencyModel {
    PublicGasTiered { median_secs: f64, sigma: f64, tiers: Vec<GasTier> },
    PrivateFixed { min_secs: f64, max_secs: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatencySample {
    pub seconds: f64,
    pub tail: bool,
}

impl LatencyModel {
    pub fn from_config(cfg: &AnchorConfig) -> Self {
        match cfg.kind {
            BackendKind::Public => {
                let mut tiers = cfg.tiers.clone();
                tiers.sort_by_key(|t| t.gwei);
                LatencyModel::PublicGasTiered { median_secs: cfg.median_secs, sigma: cfg.sigma, tiers }
            }
            BackendKind::Private => {
                LatencyModel::PrivateFixed { min_secs: cfg.private_min_secs, max_secs: cfg.private_max_secs }
            }
        }
    }

    /// Cap for a gas price: the highest tier it reaches, else the lowest tier.
    pub fn cap_for(&self, gas_price: Option<u64>) -> f64 {
        match self {
            LatencyModel::PrivateFixed { .. } => f64::INFINITY,
            LatencyModel::PublicGasTiered { tiers, .. } => {
                let g = gas_price.unwrap_or(0);
                tiers.iter().rev().find(|t| t.gwei <= g).or(tiers.first()).map_or(f64::INFINITY, |t| t.max_latency_secs)
            }
        }
    }

    /// Draws one latency. Consumes exactly two values from `rng`.
    pub fn sample<R: Rng>(&self, rng: &mut R, gas_price: Option<u64>, tail_p: f64, tail_mult: f64) -> LatencySample {
        let base = match self {
            LatencyModel::PublicGasTiered { median_secs, sigma, .. } => {
                let z: f64 = rng.sample(StandardNormal);
                median_secs * (sigma * z).exp()
            }
            LatencyModel::PrivateFixed { min_secs, max_secs } => rng.random_range(*min_secs..=*max_secs),
        };
        let tail = rng.random::<f64>() < tail_p;
        let seconds = if tail { base * tail_mult } else { base };
        LatencySample { seconds: seconds.min(self.cap_for(gas_price)).max(0.0), tail }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnchorRequest {
    pub super_block: Block,
    pub sender: String,
    pub gas_price: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchorReceipt {
    pub tx_hash: String,
    pub backend: BackendKind,
    pub backend_block_number: u64,
    pub sender: String,
    /// SHA-256 of the anchored super block's JSON.
    pub content_hash: String,
    /// Index of the super block in the super chain.
    pub super_index: u64,
    pub fee_units: u64,
    pub gas_price: Option<u64>,
    pub latency: f64,
    pub tail_event: bool,
    pub submitted_at: Timestamp,
    pub confirmed_at: Timestamp,
}

/// Completion handle for one submission.
pub struct PendingReceipt {
    tx_hash: String,
    rx: Receiver<AnchorReceipt>,
}

impl PendingReceipt {
    pub fn tx_hash(&self) -> &str {
        &self.tx_hash
    }

    pub fn wait(self) -> Result<AnchorReceipt, AnchorError> {
        self.rx.recv().map_err(|_| AnchorError::Closed)
    }

    pub fn wait_timeout(&self, timeout: Duration) -> Result<AnchorReceipt, AnchorError> {
        self.rx.recv_timeout(timeout).map_err(|e| match e {
            RecvTimeoutError::Timeout => AnchorError::Timeout,
            RecvTimeoutError::Disconnected => AnchorError::Closed,
        })
    }
}

pub trait AnchorBackend: Send + Sync {
    fn kind(&self) -> BackendKind;
    fn submit(&self, request: AnchorRequest) -> Result<PendingReceipt, AnchorError>;
    fn get_receipt(&self, tx_hash: &str) -> Result<AnchorReceipt, AnchorError>;
    /// Receipt whose content hash matches this super block, if any.
    fn receipt_for(&self, super_block: &Block) -> Option<AnchorReceipt>;
    fn fee_for(&self, request: &AnchorRequest) -> u64;
    fn allowlist_add(&self, sender: &str);
    fn allowlist_remove(&self, sender: &str);
    /// Blocks until every accepted submission has a receipt.
    fn drain(&self);
    /// All receipts ordered by backend block number.
    fn receipts(&self) -> Vec<AnchorReceipt>;

    fn verify_anchor(&self, super_block: &Block) -> bool {
        self.receipt_for(super_block).is_some()
    }
}

struct Job {
    receipt: AnchorReceipt,
}

struct State {
    rng: ChaCha8Rng,
    next_block: u64,
    allowlist: HashSet<String>,
    down: bool,
    in_flight: usize,
    receipts: HashMap<String, AnchorReceipt>,
    by_content: HashMap<String, String>,
    waiters: HashMap<String, Vec<Sender<AnchorReceipt>>>,
    log: Option<JsonLog>,
}

struct Shared {
    config: AnchorConfig,
    model: LatencyModel,
    state: Mutex<State>,
    idle: Condvar,
}

/// Seeded simulator of either backend kind.
pub struct SimulatedBackend {
    shared: Arc<Shared>,
    tx: Mutex<Option<Sender<Job>>>,
    worker: Mutex<Option<JoinHandle<()>>>,
}

impl SimulatedBackend {
    pub fn new(config: AnchorConfig) -> Self {
        Self::build(config, None, Vec::new())
    }

    /// Backend whose receipts are persisted to (and reloaded from) `path`.
    pub fn with_receipt_log(
        config: AnchorConfig,
        path: impl AsRef<Path>,
        durability: Durability,
    ) -> Result<Self, AnchorError> {
        let log = JsonLog::open(path, OpenMode::ReadWrite, durability)?;
        let existing: Vec<AnchorReceipt> = log.load()?;
        Ok(Self::build(config, Some(log), existing))
    }

    fn build(config: AnchorConfig, log: Option<JsonLog>, existing: Vec<AnchorReceipt>) -> Self {
        let mut allowlist: HashSet<String> = config.allowlist.iter().cloned().collect();
        allowlist.insert(config.sender.clone());
        let next_block = existing.iter().map(|r| r.backend_block_number + 1).max().unwrap_or(1);
        let mut receipts = HashMap::new();
        let mut by_content = HashMap::new();
        for r in existing {
            by_content.insert(r.content_hash.clone(), r.tx_hash.clone());
            receipts.insert(r.tx_hash.clone(), r);
        }
        let state = State {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            next_block,
            allowlist,
            down: false,
            in_flight: 0,
            receipts,
            by_content,
            waiters: HashMap::new(),
            log,
        };
        let shared = Arc::new(Shared {
            model: LatencyModel::from_config(&config),
            config,
            state: Mutex::new(state),
            idle: Condvar::new(),
        });
        let (tx, rx) = mpsc::channel::<Job>();
        let worker_shared = Arc::clone(&shared);
        let worker = std::thread::Builder::new()
            .name("anchor-worker".into())
            .spawn(move || run_worker(worker_shared, rx))
            .expect("spawn anchor worker");
        Self { shared, tx: Mutex::new(Some(tx)), worker: Mutex::new(Some(worker)) }
    }

    /// In-memory backend preloaded with receipts, e.g. for read-only audits.
    pub fn with_receipts(config: AnchorConfig, receipts: Vec<AnchorReceipt>) -> Self {
        Self::build(config, None, receipts)
    }

    pub fn config(&self) -> &AnchorConfig {
        &self.shared.config
    }

    pub fn model(&self) -> &LatencyModel {
        &self.shared.model
    }

    /// Simulated outage: submissions fail with `BackendDown` while set.
    pub fn set_down(&self, down: bool) {
        self.shared.state.lock().down = down;
    }

    /// Writes every receipt as one JSON document per line.
    pub fn export_jsonl(&self, mut out: impl Write) -> std::io::Result<()> {
        for r in self.receipts() {
            serde_json::to_writer(&mut out, &r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn run_worker(shared: Arc<Shared>, rx: Receiver<Job>) {
    for Job { receipt } in rx {
        let scale = shared.config.time_scale;
        if scale > 0.0 {
            std::thread::sleep(Duration::from_secs_f64(receipt.latency * scale));
        }
        let mut st = shared.state.lock();
        if let Some(log) = st.log.as_mut() {
            if let Err(e) = log.append(&receipt) {
                tracing::error!(error = %e, tx = %receipt.tx_hash, "failed to persist receipt");
            }
        }
        st.by_content.insert(receipt.content_hash.clone(), receipt.tx_hash.clone());
        st.receipts.insert(receipt.tx_hash.clone(), receipt.clone());
        for w in st.waiters.remove(&receipt.tx_hash).unwrap_or_default() {
            let _ = w.send(receipt.clone());
        }
        st.in_flight -= 1;
        if st.in_flight == 0 {
            shared.idle.notify_all();
        }
    }
}

impl AnchorBackend for SimulatedBackend {
    fn kind(&self) -> BackendKind {
        self.shared.config.kind
    }

    fn submit(&self, request: AnchorRequest) -> Result<PendingReceipt, AnchorError> {
        if request.super_block.kind != BlockKind::Super {
            return Err(AnchorError::NotSuper(request.super_block.kind));
        }
        let content_hash = request.super_block.content_hash();
        let fee_units = self.fee_for(&request);
        let cfg = &self.shared.config;
        let (done_tx, done_rx) = mpsc::channel();
        let mut st = self.shared.state.lock();
        if st.down {
            return Err(AnchorError::BackendDown);
        }
        if !st.allowlist.contains(&request.sender) {
            return Err(AnchorError::NotAllowed(request.sender));
        }
        // Idempotent per content: join the existing receipt or in-flight job.
        if let Some(tx_hash) = st.by_content.get(&content_hash).cloned() {
            if let Some(r) = st.receipts.get(&tx_hash) {
                let _ = done_tx.send(r.clone());
            } else {
                st.waiters.entry(tx_hash.clone()).or_default().push(done_tx);
            }
            return Ok(PendingReceipt { tx_hash, rx: done_rx });
        }

        let block_number = st.next_block;
        st.next_block += 1;
        let sample =
            self.shared.model.sample(&mut st.rng, request.gas_price, cfg.tail_probability, cfg.tail_multiplier);
        let latency_us = (sample.seconds * 1e6).round() as i64;
        let submitted_at = Timestamp::now();
        let confirmed_at = Timestamp::from_micros(submitted_at.micros() + latency_us).unwrap_or(submitted_at);
        let tx_hash =
            sha256_hex(format!("{:?}:{}:{}:{}:{}", cfg.kind, cfg.seed, block_number, request.sender, content_hash));
        let receipt = AnchorReceipt {
            tx_hash: tx_hash.clone(),
            backend: cfg.kind,
            backend_block_number: block_number,
            sender: request.sender,
            content_hash: content_hash.clone(),
            super_index: request.super_block.index,
            fee_units,
            gas_price: request.gas_price,
            latency: latency_us as f64 / 1e6,
            tail_event: sample.tail,
            submitted_at,
            confirmed_at,
        };
        let sender = self.tx.lock().clone().ok_or(AnchorError::Closed)?;
        st.by_content.insert(content_hash, tx_hash.clone());
        st.waiters.entry(tx_hash.clone()).or_default().push(done_tx);
        st.in_flight += 1;
        sender.send(Job { receipt }).map_err(|_| AnchorError::Closed)?;
        Ok(PendingReceipt { tx_hash, rx: done_rx })
    }

    fn get_receipt(&self, tx_hash: &str) -> Result<AnchorReceipt, AnchorError> {
        self.shared.state.lock().receipts.get(tx_hash).cloned().ok_or(AnchorError::NotFound)
    }

    fn receipt_for(&self, super_block: &Block) -> Option<AnchorReceipt> {
        let content = super_block.content_hash();
        let st = self.shared.state.lock();
        st.by_content.get(&content).and_then(|tx| st.receipts.get(tx)).cloned()
    }

    fn fee_for(&self, _request: &AnchorRequest) -> u64 {
        match self.shared.config.kind {
            BackendKind::Public => self.shared.config.gas_units_per_sb,
            BackendKind::Private => 0,
        }
    }

    fn allowlist_add(&self, sender: &str) {
        self.shared.state.lock().allowlist.insert(sender.to_string());
    }

    fn allowlist_remove(&self, sender: &str) {
        self.shared.state.lock().allowlist.remove(sender);
    }

    fn drain(&self) {
        let mut st = self.shared.state.lock();
        while st.in_flight > 0 {
            self.shared.idle.wait(&mut st);
        }
    }

    fn receipts(&self) -> Vec<AnchorReceipt> {
        let mut all: Vec<_> = self.shared.state.lock().receipts.values().cloned().collect();
        all.sort_by_key(|r| r.backend_block_number);
        all
    }
}

impl Drop for SimulatedBackend {
    fn drop(&mut self) {
        self.tx.lock().take();
        if let Some(w) = self.worker.lock().take() {
            let _ = w.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::Difficulty;
    use crate::hash::ZERO_HASH;

    fn sb(i: u64, data: &str) -> Block {
        Block::mine(BlockKind::Super, i, Timestamp::epoch(), data, ZERO_HASH, &Difficulty::new("0").unwrap()).unwrap()
    }

    fn req(b: &Block, gas: Option<u64>) -> AnchorRequest {
        AnchorRequest { super_block: b.clone(), sender: "logchain".into(), gas_price: gas }
    }

    #[test]
    fn public_latency_respects_tier_caps() {
        for (gas, cap) in [(20, 120.0), (6, 1800.0), (9, 300.0)] {
            let backend =
                SimulatedBackend::new(AnchorConfig { tail_probability: 0.5, ..AnchorConfig::public(7, Some(gas)) });
            for i in 0..200 {
                let r = backend.submit(req(&sb(i, &format!("{gas}-{i}")), Some(gas))).unwrap().wait().unwrap();
                assert!(r.latency <= cap, "g={gas} latency {}", r.latency);
                assert_eq!(r.fee_units, GAS_UNITS_PER_SB);
            }
        }
    }

    #[test]
    fn private_latency_window() {
        let backend = SimulatedBackend::new(AnchorConfig::private(3));
        for i in 0..300 {
            let r = backend.submit(req(&sb(i, &i.to_string()), None)).unwrap().wait().unwrap();
            assert_eq!(r.fee_units, 0);
            if !r.tail_event {
                assert!((0.78..=3.63).contains(&r.latency), "{}", r.latency);
            } else {
                assert!(r.latency <= 36.3);
            }
        }
    }

    #[test]
    fn tier_selection() {
        let m = LatencyModel::from_config(&AnchorConfig::public(0, None));
        assert_eq!(m.cap_for(Some(6)), 1800.0);
        assert_eq!(m.cap_for(Some(8)), 1800.0);
        assert_eq!(m.cap_for(Some(9)), 300.0);
        assert_eq!(m.cap_for(Some(25)), 120.0);
        assert_eq!(m.cap_for(None), 1800.0);
        assert_eq!(m.cap_for(Some(1)), 1800.0);
    }

    #[test]
    fn receipts_are_reproducible_under_a_seed() {
        let run = |seed| {
            let b = SimulatedBackend::new(AnchorConfig::public(seed, Some(9)));
            (0..50)
                .map(|i| {
                    let r = b.submit(req(&sb(i, &i.to_string()), Some(9))).unwrap().wait().unwrap();
                    (r.tx_hash, r.backend_block_number, r.latency)
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(11), run(11));
        assert_ne!(run(11), run(12));
    }

    #[test]
    fn block_numbers_increase_and_latency_is_consistent() {
        let b = SimulatedBackend::new(AnchorConfig::public(1, Some(20)));
        let pending: Vec<_> = (0..20).map(|i| b.submit(req(&sb(i, &i.to_string()), Some(20))).unwrap()).collect();
        b.drain();
        let receipts: Vec<_> = pending.into_iter().map(|p| p.wait().unwrap()).collect();
        for w in receipts.windows(2) {
            assert!(w[1].backend_block_number > w[0].backend_block_number);
        }
        for r in &receipts {
            let delta = r.confirmed_at.micros() - r.submitted_at.micros();
            assert_eq!(delta as f64 / 1e6, r.latency);
            assert_eq!(b.get_receipt(&r.tx_hash).unwrap(), *r);
        }
        assert_eq!(b.receipts().len(), 20);
    }

    #[test]
    fn verify_anchor_matches_content() {
        let b = SimulatedBackend::new(AnchorConfig::private(0));
        let block = sb(0, "tb json");
        b.submit(req(&block, None)).unwrap().wait().unwrap();
        assert!(b.verify_anchor(&block));
        let mut changed = block.clone();
        changed.nonce += 1;
        assert!(!b.verify_anchor(&changed));
        assert!(!b.verify_anchor(&sb(1, "never anchored")));
        assert!(matches!(b.get_receipt(&"0".repeat(64)), Err(AnchorError::NotFound)));
    }

    #[test]
    fn allowlist_and_outage() {
        let b = SimulatedBackend::new(AnchorConfig::private(0));
        let block = sb(0, "x");
        let stranger = AnchorRequest { sender: "mallory".into(), ..req(&block, None) };
        assert!(matches!(b.submit(stranger.clone()), Err(AnchorError::NotAllowed(_))));
        b.allowlist_add("mallory");
        assert!(b.submit(stranger.clone()).is_ok());
        b.allowlist_remove("mallory");
        assert!(matches!(
            b.submit(AnchorRequest { super_block: sb(1, "y"), ..stranger }),
            Err(AnchorError::NotAllowed(_))
        ));

        b.set_down(true);
        assert!(matches!(b.submit(req(&sb(2, "z"), None)), Err(AnchorError::BackendDown)));
        b.set_down(false);
        assert!(b.submit(req(&sb(2, "z"), None)).is_ok());

        let data_block = Block { kind: BlockKind::Data, ..block };
        assert!(matches!(b.submit(req(&data_block, None)), Err(AnchorError::NotSuper(BlockKind::Data))));
    }

    #[test]
    fn resubmission_is_idempotent() {
        let b = SimulatedBackend::new(AnchorConfig::private(0));
        let block = sb(0, "once");
        let first = b.submit(req(&block, None)).unwrap();
        let second = b.submit(req(&block, None)).unwrap();
        assert_eq!(first.tx_hash(), second.tx_hash());
        assert_eq!(first.wait().unwrap(), second.wait().unwrap());
        assert_eq!(b.receipts().len(), 1);
    }

    #[test]
    fn fee_is_constant_in_payload_size() {
        let public = SimulatedBackend::new(AnchorConfig::public(0, Some(20)));
        let private = SimulatedBackend::new(AnchorConfig::private(0));
        for len in [0, 10, 10_000] {
            let r = req(&sb(0, &"x".repeat(len)), Some(20));
            assert_eq!(public.fee_for(&r), 335_000);
            assert_eq!(private.fee_for(&r), 0);
        }
    }

    #[test]
    fn receipts_survive_restart() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("receipts.seg");
        let block = sb(0, "persist");
        {
            let b = SimulatedBackend::with_receipt_log(AnchorConfig::private(0), &path, Durability::Buffered).unwrap();
            b.submit(req(&block, None)).unwrap().wait().unwrap();
        }
        let b = SimulatedBackend::with_receipt_log(AnchorConfig::private(0), &path, Durability::Buffered).unwrap();
        assert!(b.verify_anchor(&block));
        let r = b.submit(req(&sb(1, "next"), None)).unwrap().wait().unwrap();
        assert_eq!(r.backend_block_number, 2);
        let mut out = Vec::new();
        b.export_jsonl(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().lines().count(), 2);
    }

    #[test]
    fn higher_tier_is_never_slower_on_average() {
        let n = 1000;
        let mean = |gas| {
            let m = LatencyModel::from_config(&AnchorConfig::public(0, None));
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            (0..n).map(|_| m.sample(&mut rng, Some(gas), 0.002, 10.0).seconds).sum::<f64>() / n as f64
        };
        let (m6, m9, m20) = (mean(6), mean(9), mean(20));
        assert!(m6 >= m9 && m9 >= m20, "{m6} {m9} {m20}");
    }

    #[test]
    fn time_scale_delays_resolution() {
        let cfg = AnchorConfig { time_scale: 0.01, ..AnchorConfig::private(0) };
        let b = SimulatedBackend::new(cfg);
        let started = std::time::Instant::now();
        let r = b.submit(req(&sb(0, "slow"), None)).unwrap().wait().unwrap();
        assert!(started.elapsed().as_secs_f64() >= r.latency * 0.01 * 0.9);
    }
}
