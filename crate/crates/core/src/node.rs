//! A ledger wired to an anchoring backend: appends mine blocks, sealed super
//! blocks are submitted for anchoring, and block timings are collected.

use std::collections::{HashSet, VecDeque};
use std::ops::Range;
use std::path::Path;
use std::sync::Arc;

use parking_lot::{Mutex, RwLock, RwLockReadGuard};
use serde::{Deserialize, Serialize};

use crate::anchor::{AnchorBackend, AnchorError, AnchorReceipt, AnchorRequest};
use crate::block::{Block, BlockKind};
use crate::ledger::{
    AppendOutcome, ChainCheck, Creation, Ledger, LedgerConfig, LedgerError, SuperReport, VerificationReport,
};
use crate::store::{Durability, JsonLog, OpenMode, StorePaths};

#[derive(Debug, thiserror::Error)]
pub enum NodeError {
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Anchor(#[from] AnchorError),
}

/// Block kinds as reported in timing tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TimingKind {
    #[serde(rename = "AGB")]
    Agb,
    #[serde(rename = "DB")]
    Db,
    #[serde(rename = "RGB")]
    Rgb,
    #[serde(rename = "TB")]
    Tb,
    /// Anchoring latency of a super block.
    #[serde(rename = "SB")]
    Sb,
}

impl TimingKind {
    pub const ALL: [TimingKind; 5] = [TimingKind::Agb, TimingKind::Db, TimingKind::Rgb, TimingKind::Tb, TimingKind::Sb];

    pub fn as_str(&self) -> &'static str {
        match self {
            TimingKind::Agb => "AGB",
            TimingKind::Db => "DB",
            TimingKind::Rgb => "RGB",
            TimingKind::Tb => "TB",
            TimingKind::Sb => "SB",
        }
    }

    pub fn is_internal(&self) -> bool {
        !matches!(self, TimingKind::Sb)
    }

    fn of_block(kind: BlockKind) -> Option<Self> {
        match kind {
            BlockKind::Agb => Some(TimingKind::Agb),
            BlockKind::Data => Some(TimingKind::Db),
            BlockKind::Rgb => Some(TimingKind::Rgb),
            BlockKind::Terminal => Some(TimingKind::Tb),
            BlockKind::Super => None,
        }
    }
}

impl std::fmt::Display for TimingKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TimingKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TimingKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| format!("unknown block kind {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub kind: TimingKind,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeStats {
    pub blocks: u64,
    pub super_blocks: u64,
    pub sealed: usize,
    pub anchored: usize,
    /// Sealed super blocks not yet handed to the backend.
    pub awaiting_submission: usize,
}

#[derive(Clone, Debug)]
pub struct TbReport {
    pub valid: bool,
    pub aggr_match: bool,
    pub anchored: bool,
    pub terminal_index: u64,
    pub super_block: Option<Block>,
    pub receipt: Option<AnchorReceipt>,
}

/// Outcome of a full offline verification.
#[derive(Clone, Debug, Serialize)]
pub struct LedgerAudit {
    pub blocks: u64,
    pub super_blocks: u64,
    pub chain: VerificationReport,
    pub circled: Vec<ChainCheck>,
    pub super_chain: SuperReport,
    /// Super-block indices without a matching receipt.
    pub unanchored: Vec<u64>,
    /// Byte offset of a torn tail record in any segment.
    pub torn_tail: Option<u64>,
}

impl LedgerAudit {
    pub fn integrity_ok(&self) -> bool {
        self.chain.ok()
            && self.circled.iter().all(ChainCheck::ok)
            && self.super_chain.ok()
            && self.torn_tail.is_none()
            && self.circled.len() as u64 == self.super_blocks
    }

    pub fn anchoring_ok(&self) -> bool {
        self.unanchored.is_empty()
    }

    /// First lower-level index, or chain/super ordinal, that failed.
    pub fn first_bad_index(&self) -> Option<u64> {
        self.chain
            .first_failure()
            .map(|c| c.index)
            .or_else(|| self.circled.iter().find(|c| !c.ok()).map(|c| c.terminal_index))
    }

    pub fn first_bad_super(&self) -> Option<u64> {
        self.super_chain.checks.iter().find(|c| !c.ok()).map(|c| c.index)
    }
}

/// Runs every offline check on `ledger` against a set of receipts. Block
/// checks cover `range` (default: all blocks); chain, super-chain and
/// anchoring checks always cover the whole ledger.
pub fn audit(ledger: &Ledger, receipts: &[AnchorReceipt], range: Option<Range<u64>>) -> Result<LedgerAudit, NodeError> {
    let len = ledger.len();
    let chain = ledger.verify_chain(range.unwrap_or(0..len))?;
    let circled = ledger.verify_all_circled();
    let super_chain = ledger.verify_super_chain();
    let anchored: HashSet<&str> = receipts.iter().map(|r| r.content_hash.as_str()).collect();
    let unanchored = (0..ledger.super_len())
        .filter(|&k| match ledger.super_block(k) {
            Ok(sb) => !anchored.contains(sb.content_hash().as_str()),
            Err(_) => true,
        })
        .collect();
    let torn_tail = [ledger.blocks(), ledger.supers()].iter().find_map(|s| s.segment().torn_tail().map(|t| t.offset));
    Ok(LedgerAudit {
        blocks: len,
        super_blocks: ledger.super_len(),
        chain,
        circled,
        super_chain,
        unanchored,
        torn_tail,
    })
}

/// Receipts persisted in a ledger directory; empty if none were written.
pub fn load_receipts(dir: impl AsRef<Path>) -> Result<Vec<AnchorReceipt>, NodeError> {
    let path = StorePaths::new(dir.as_ref()).receipts();
    if !path.exists() {
        return Ok(Vec::new());
    }
    let log = JsonLog::open(path, OpenMode::ReadOnly, Durability::Buffered).map_err(LedgerError::from)?;
    Ok(log.load().map_err(LedgerError::from)?)
}

/// Read-only audit of a ledger directory using its persisted receipts.
pub fn audit_dir(dir: impl AsRef<Path>, range: Option<Range<u64>>) -> Result<LedgerAudit, NodeError> {
    let ledger = Ledger::open_read_only(dir.as_ref())?;
    audit(&ledger, &load_receipts(dir)?, range)
}

/// The ledger engine used by the service.
pub struct Logchain {
    ledger: RwLock<Ledger>,
    backend: Arc<dyn AnchorBackend>,
    sender: String,
    gas_price: Option<u64>,
    awaiting: Mutex<VecDeque<Block>>,
    timings: Mutex<Vec<TimingRecord>>,
}

impl Logchain {
    /// Wraps a ledger; super blocks without a receipt are queued for submission.
    pub fn new(
        mut ledger: Ledger,
        backend: Arc<dyn AnchorBackend>,
        sender: impl Into<String>,
        gas_price: Option<u64>,
    ) -> Result<Self, NodeError> {
        let mut awaiting: VecDeque<Block> = VecDeque::new();
        let queued: HashSet<u64> = ledger.take_pending_anchors().into_iter().map(|sb| sb.index).collect();
        if !ledger.is_read_only() {
            let supers = ledger.verify_super_chain();
            for k in 0..ledger.super_len() {
                let Ok(sb) = ledger.super_block(k) else {
                    tracing::error!(super_index = k, "unreadable super block; not anchoring");
                    continue;
                };
                if !queued.contains(&k) && backend.verify_anchor(&sb) {
                    continue;
                }
                // Anchoring a tampered super block would launder it.
                let sound =
                    supers.checks.get(k as usize).is_some_and(|c| c.ok()) && ledger.verify_circled(k as usize).super_ok;
                if sound {
                    awaiting.push_back(sb);
                } else {
                    tracing::error!(super_index = k, "super block fails verification; not anchoring");
                }
            }
        }
        let node = Self {
            ledger: RwLock::new(ledger),
            backend,
            sender: sender.into(),
            gas_price,
            awaiting: Mutex::new(awaiting),
            timings: Mutex::new(Vec::new()),
        };
        node.flush_anchors();
        Ok(node)
    }

    pub fn open(
        dir: impl AsRef<Path>,
        config: LedgerConfig,
        durability: Durability,
        backend: Arc<dyn AnchorBackend>,
        sender: impl Into<String>,
        gas_price: Option<u64>,
    ) -> Result<Self, NodeError> {
        let ledger = Ledger::open(dir, config, durability)?;
        Self::new(ledger, backend, sender, gas_price)
    }

    pub fn backend(&self) -> &Arc<dyn AnchorBackend> {
        &self.backend
    }

    /// Shared read access to the ledger.
    pub fn read(&self) -> RwLockReadGuard<'_, Ledger> {
        self.ledger.read()
    }

    pub fn append(&self, payload: &str) -> Result<AppendOutcome, NodeError> {
        let mut ledger = self.ledger.write();
        let out = ledger.append_log(payload)?;
        let sealed = ledger.take_pending_anchors();
        drop(ledger);
        self.after_append(&out, sealed);
        Ok(out)
    }

    /// Like [`append`](Self::append) but fails with `LedgerLocked` instead of
    /// waiting for another writer.
    pub fn try_append(&self, payload: &str) -> Result<AppendOutcome, NodeError> {
        let mut ledger = self.ledger.try_write().ok_or(LedgerError::LedgerLocked)?;
        let out = ledger.append_log(payload)?;
        let sealed = ledger.take_pending_anchors();
        drop(ledger);
        self.after_append(&out, sealed);
        Ok(out)
    }

    fn after_append(&self, out: &AppendOutcome, sealed: Vec<Block>) {
        self.record(&out.created);
        if !sealed.is_empty() {
            self.awaiting.lock().extend(sealed);
        }
        self.flush_anchors();
    }

    fn record(&self, created: &[Creation]) {
        let mut t = self.timings.lock();
        for c in created {
            if let Some(kind) = TimingKind::of_block(c.kind) {
                t.push(TimingRecord { kind, seconds: c.elapsed.as_secs_f64() });
            }
        }
    }

    /// Submits queued super blocks in order; stops at the first refusal and
    /// keeps the rest for the next attempt. Returns how many were submitted.
    pub fn flush_anchors(&self) -> usize {
        let mut awaiting = self.awaiting.lock();
        let mut submitted = 0;
        while let Some(sb) = awaiting.front() {
            let request =
                AnchorRequest { super_block: sb.clone(), sender: self.sender.clone(), gas_price: self.gas_price };
            match self.backend.submit(request) {
                Ok(_) => {
                    awaiting.pop_front();
                    submitted += 1;
                }
                Err(e) => {
                    tracing::warn!(super_index = sb.index, error = %e, "anchoring deferred");
                    break;
                }
            }
        }
        submitted
    }

    /// Flushes the submission queue and waits for all outstanding receipts.
    pub fn drain(&self) {
        self.flush_anchors();
        self.backend.drain();
    }

    pub fn lookup_payload(&self, key: &str) -> Result<Vec<u64>, NodeError> {
        Ok(self.ledger.read().lookup_payload(key)?)
    }

    pub fn verify_tb(&self, submitted: &Block) -> Result<TbReport, NodeError> {
        let v = self.ledger.read().verify_tb(submitted)?;
        let receipt = v.super_block.as_ref().and_then(|sb| self.backend.receipt_for(sb));
        Ok(TbReport {
            valid: v.valid,
            aggr_match: v.aggr_match,
            anchored: receipt.is_some(),
            terminal_index: v.terminal_index,
            super_block: v.super_block,
            receipt,
        })
    }

    /// Internal block creation times plus anchoring latency of this ledger's
    /// super blocks, in creation order.
    pub fn timings(&self) -> Vec<TimingRecord> {
        let mut all = self.timings.lock().clone();
        let ledger = self.ledger.read();
        for k in 0..ledger.super_len() {
            if let Some(r) = ledger.super_block(k).ok().and_then(|sb| self.backend.receipt_for(&sb)) {
                all.push(TimingRecord { kind: TimingKind::Sb, seconds: r.latency });
            }
        }
        all
    }

    pub fn stats(&self) -> NodeStats {
        let ledger = self.ledger.read();
        let anchored = (0..ledger.super_len())
            .filter(|&k| ledger.super_block(k).is_ok_and(|sb| self.backend.verify_anchor(&sb)))
            .count();
        NodeStats {
            blocks: ledger.len(),
            super_blocks: ledger.super_len(),
            sealed: ledger.sealed_count(),
            anchored,
            awaiting_submission: self.awaiting.lock().len(),
        }
    }

    pub fn audit(&self) -> LedgerAudit {
        audit(&self.ledger.read(), &self.backend.receipts(), None).expect("full range is in bounds")
    }
}
