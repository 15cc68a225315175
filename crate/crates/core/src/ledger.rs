//! The two-level ledger: circled chains sealed by terminal blocks, and the
//! super chain that embeds every terminal block.
//!
//! Lower level, flattened with ledger-wide indices (capacities `n_j`):
//!
//! ```text
//! CB 0:  AGB(0)      DATA(1) .. DATA(n_0)             TB(alpha_0 = n_0 + 1)
//! CB j:  RGB(beta_j) DATA(beta_j + 1) .. DATA(beta_j + n_j) TB(alpha_j)
//!        beta_j  = alpha_{j-1} + 1
//!        alpha_j = alpha_{j-1} + n_j + 2
//! ```
//!
//! Every block binds to its predecessor in the flattened order, so an RGB
//! binds to the previous terminal block. Super block `j` carries the full JSON
//! of terminal block `j` and binds to super block `j - 1`.
//!
//! The capacity schedule is a list whose last entry repeats for all later
//! chains. Positions of genesis and terminal blocks are derived from it, never
//! from block contents, so a tampered `kind` or `index` cannot move them.

use std::collections::VecDeque;
use std::ops::Range;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::block::{Block, BlockError, BlockKind, Difficulty, Timestamp};
use crate::hash::{is_hex64, sha256_hex, ZERO_HASH};
use crate::store::{payload_key, BlockStore, Durability, OpenMode, StoreError, StorePaths};

#[derive(Debug, thiserror::Error)]
pub enum LedgerError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Block(#[from] BlockError),
    #[error("ledger is locked by a seal in progress")]
    LedgerLocked,
    #[error("circled chain holds {have} of {need} data blocks")]
    NotFull { have: u64, need: u64 },
    #[error("circled chain {0} is not sealed")]
    NotSealed(usize),
    #[error("range {start}..{end} outside ledger of {len} blocks")]
    RangeOutOfBounds { start: u64, end: u64, len: u64 },
    #[error("circled chain capacities must be non-empty and >= 1")]
    InvalidCapacity,
    #[error("stored ledger config {stored} does not match requested {requested}")]
    ConfigMismatch { stored: String, requested: String },
    #[error("ledger opened read-only")]
    ReadOnly,
    #[error("integrity failure at block {index}: {reason}")]
    Integrity { index: u64, reason: String },
    #[error("ledger metadata: {0}")]
    Meta(String),
    #[error("block not found")]
    NotFound,
}

pub type Result<T, E = LedgerError> = std::result::Result<T, E>;

/// Index of the terminal block of circled chain `j`.
///
/// # Panics
/// If `n` has fewer than `j + 1` entries.
pub fn alpha_index(j: usize, n: &[u32]) -> u64 {
    assert!(n.len() > j, "need capacities for chains 0..={j}");
    let mut alpha = n[0] as u64 + 1;
    for &n_i in &n[1..=j] {
        alpha += n_i as u64 + 2;
    }
    alpha
}

/// Index of the genesis (AGB or RGB) block of circled chain `j`.
pub fn beta_index(j: usize, n: &[u32]) -> u64 {
    if j == 0 {
        0
    } else {
        alpha_index(j - 1, n) + 1
    }
}

/// Capacity schedule; the last entry repeats.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct Capacities(Vec<u32>);

impl Capacities {
    pub fn new(caps: Vec<u32>) -> Result<Self> {
        if caps.is_empty() || caps.contains(&0) {
            return Err(LedgerError::InvalidCapacity);
        }
        Ok(Self(caps))
    }

    pub fn fixed(n: u32) -> Result<Self> {
        Self::new(vec![n])
    }

    pub fn get(&self, j: usize) -> u32 {
        self.0[j.min(self.0.len() - 1)]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    /// Capacities for chains `0..=j`, expanded.
    pub fn expand(&self, j: usize) -> Vec<u32> {
        (0..=j).map(|i| self.get(i)).collect()
    }

    fn bounds(&self, j: usize) -> (u64, u64) {
        let caps = self.expand(j);
        (beta_index(j, &caps), alpha_index(j, &caps))
    }
}

impl TryFrom<Vec<u32>> for Capacities {
    type Error = LedgerError;
    fn try_from(v: Vec<u32>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Capacities> for Vec<u32> {
    fn from(c: Capacities) -> Self {
        c.0
    }
}

/// Role of a ledger position by construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Position {
    pub chain: usize,
    pub kind: BlockKind,
}

/// Walks ledger positions in order, tracking chain bounds incrementally.
#[derive(Clone, Debug)]
struct LayoutCursor<'a> {
    caps: &'a Capacities,
    chain: usize,
    beta: u64,
    alpha: u64,
}

impl<'a> LayoutCursor<'a> {
    fn new(caps: &'a Capacities) -> Self {
        Self { caps, chain: 0, beta: 0, alpha: caps.get(0) as u64 + 1 }
    }

    fn at(&mut self, i: u64) -> Position {
        while i > self.alpha {
            self.chain += 1;
            self.beta = self.alpha + 1;
            self.alpha = self.beta + self.caps.get(self.chain) as u64 + 1;
        }
        let kind = if i == self.beta {
            if self.chain == 0 {
                BlockKind::Agb
            } else {
                BlockKind::Rgb
            }
        } else if i == self.alpha {
            BlockKind::Terminal
        } else {
            BlockKind::Data
        };
        Position { chain: self.chain, kind }
    }
}

/// Role of global index `i` under `caps`.
pub fn position_of(i: u64, caps: &Capacities) -> Position {
    LayoutCursor::new(caps).at(i)
}

/// JSON body of a terminal block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TerminalPayload {
    pub aggr_hash: String,
    pub timestamp_from: Timestamp,
    pub timestamp_to: Timestamp,
    pub block_index_from: u64,
    pub block_index_to: u64,
}

impl TerminalPayload {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("payload serialization is infallible")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// SHA-256 over the concatenated lowercase hex hashes.
pub fn aggregate_hash<'a>(hashes: impl IntoIterator<Item = &'a str>) -> String {
    let mut joined = String::new();
    for h in hashes {
        joined.push_str(h);
    }
    sha256_hex(joined)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ChainState {
    Open,
    Sealed,
}

/// One circled chain as read back from storage.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CircledChain {
    pub ordinal: usize,
    pub capacity: u32,
    pub blocks: Vec<Block>,
    pub state: ChainState,
}

impl CircledChain {
    pub fn terminal(&self) -> Option<&Block> {
        match self.state {
            ChainState::Sealed => self.blocks.last(),
            ChainState::Open => None,
        }
    }

    /// Genesis and data blocks, i.e. everything the aggregate hash covers.
    pub fn covered(&self) -> &[Block] {
        match self.state {
            ChainState::Sealed => &self.blocks[..self.blocks.len() - 1],
            ChainState::Open => &self.blocks,
        }
    }

    /// Aggregate over the stored `current_hash` values of the covered blocks.
    pub fn recompute_aggr(&self) -> Result<String> {
        if self.state != ChainState::Sealed {
            return Err(LedgerError::NotSealed(self.ordinal));
        }
        Ok(aggregate_hash(self.covered().iter().map(|b| b.current_hash.as_str())))
    }

    /// Aggregate over hashes recomputed from block contents. `kind` is not
    /// hashed, so each covered block must also carry its layout role.
    pub fn rederive_aggr(&self) -> Result<String> {
        if self.state != ChainState::Sealed {
            return Err(LedgerError::NotSealed(self.ordinal));
        }
        let genesis = if self.ordinal == 0 { BlockKind::Agb } else { BlockKind::Rgb };
        for (i, b) in self.covered().iter().enumerate() {
            let expected = if i == 0 { genesis } else { BlockKind::Data };
            if b.kind != expected {
                return Err(LedgerError::Integrity {
                    index: b.index,
                    reason: format!("kind {} where {expected} belongs", b.kind),
                });
            }
        }
        let hashes: Vec<String> = self.covered().iter().map(Block::recompute_hash).collect();
        Ok(aggregate_hash(hashes.iter().map(String::as_str)))
    }

    pub fn payload(&self) -> Option<TerminalPayload> {
        self.terminal().and_then(|tb| TerminalPayload::from_json(&tb.data).ok())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerConfig {
    pub difficulty: Difficulty,
    pub capacities: Capacities,
}

impl LedgerConfig {
    pub fn new(difficulty: Difficulty, capacities: Capacities) -> Self {
        Self { difficulty, capacities }
    }

    pub fn fixed(difficulty: &str, n: u32) -> Result<Self> {
        Ok(Self { difficulty: Difficulty::new(difficulty)?, capacities: Capacities::fixed(n)? })
    }
}

/// Wall time spent creating one block.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Creation {
    pub kind: BlockKind,
    pub index: u64,
    pub elapsed: Duration,
}

#[derive(Clone, Debug)]
pub struct Sealed {
    pub terminal: Block,
    pub super_block: Block,
}

#[derive(Clone, Debug)]
pub struct AppendOutcome {
    /// The data block carrying the payload.
    pub block: Block,
    /// Present when this append filled the chain.
    pub sealed: Option<Sealed>,
    /// Every block created by this call, in creation order.
    pub created: Vec<Creation>,
}

#[derive(Debug, Default)]
struct OpenChain {
    ordinal: usize,
    /// Hashes of genesis and data blocks written so far.
    hashes: Vec<String>,
    ts_from: Option<Timestamp>,
    ts_to: Option<Timestamp>,
}

#[derive(Debug, Clone)]
struct Tip {
    hash: String,
    timestamp: Timestamp,
}

/// Per-block verification outcome.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BlockCheck {
    pub index: u64,
    pub expected_kind: BlockKind,
    pub readable: bool,
    /// `index` field equals position and kind (plus genesis shape) matches the layout.
    pub structure_ok: bool,
    /// `previous_hash` equals the predecessor's recomputed hash.
    pub binding_ok: bool,
    pub pow_ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl BlockCheck {
    pub fn ok(&self) -> bool {
        self.readable && self.structure_ok && self.binding_ok && self.pow_ok
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<BlockCheck>,
}

impl VerificationReport {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(BlockCheck::ok)
    }

    pub fn first_failure(&self) -> Option<&BlockCheck> {
        self.checks.iter().find(|c| !c.ok())
    }

    pub fn failures(&self) -> impl Iterator<Item = &BlockCheck> {
        self.checks.iter().filter(|c| !c.ok())
    }
}

/// Consistency of one sealed chain against its terminal and super block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ChainCheck {
    pub ordinal: usize,
    pub terminal_index: u64,
    pub readable: bool,
    pub payload_ok: bool,
    /// Stored-hash aggregate equals the payload's `aggr_hash`.
    pub aggr_ok: bool,
    /// Content-derived aggregate equals the payload's `aggr_hash`.
    pub rederived_ok: bool,
    /// Range metadata matches positions and block timestamps.
    pub range_ok: bool,
    /// Super block `ordinal` embeds exactly the stored terminal block.
    pub super_ok: bool,
}

impl ChainCheck {
    pub fn ok(&self) -> bool {
        self.readable && self.payload_ok && self.aggr_ok && self.rederived_ok && self.range_ok && self.super_ok
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SuperCheck {
    pub index: u64,
    pub readable: bool,
    pub index_ok: bool,
    pub binding_ok: bool,
    pub pow_ok: bool,
    pub embeds_terminal: bool,
}

impl SuperCheck {
    pub fn ok(&self) -> bool {
        self.readable && self.index_ok && self.binding_ok && self.pow_ok && self.embeds_terminal
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SuperReport {
    pub checks: Vec<SuperCheck>,
}

impl SuperReport {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(SuperCheck::ok)
    }
}

/// Answer to a terminal-block verification request.
#[derive(Clone, Debug)]
pub struct TbVerification {
    pub ordinal: usize,
    pub terminal_index: u64,
    /// The submitted block equals the stored one and its whole chain checks out.
    pub valid: bool,
    /// Both aggregates over the stored chain equal the submitted `aggr_hash`.
    pub aggr_match: bool,
    pub super_block: Option<Block>,
}

pub struct Ledger {
    config: LedgerConfig,
    blocks: BlockStore,
    supers: BlockStore,
    open: OpenChain,
    tip: Option<Tip>,
    super_tip: Option<Tip>,
    sealed: usize,
    pending_anchor: VecDeque<Block>,
    read_only: bool,
}

fn pow_shape_ok(block: &Block, recomputed: &str, difficulty: &Difficulty) -> bool {
    is_hex64(&block.current_hash)
        && is_hex64(&block.previous_hash)
        && block.nonce >= 1
        && difficulty.accepts(&block.current_hash)
        && recomputed == block.current_hash
}

impl Ledger {
    /// Fresh ledger with in-memory storage.
    pub fn in_memory(config: LedgerConfig) -> Result<Self> {
        Self::from_stores(config, BlockStore::in_memory(), BlockStore::in_memory(), false)
    }

    /// Opens (or creates) a ledger directory for writing.
    pub fn open(dir: impl AsRef<Path>, config: LedgerConfig, durability: Durability) -> Result<Self> {
        let paths = StorePaths::new(dir.as_ref());
        std::fs::create_dir_all(&paths.root).map_err(StoreError::from)?;
        match read_meta(&paths)? {
            Some(stored) if stored != config => {
                return Err(LedgerError::ConfigMismatch {
                    stored: serde_json::to_string(&stored).unwrap_or_default(),
                    requested: serde_json::to_string(&config).unwrap_or_default(),
                })
            }
            Some(_) => {}
            None => {
                let json = serde_json::to_vec_pretty(&config).map_err(|e| LedgerError::Meta(e.to_string()))?;
                std::fs::write(paths.meta(), json).map_err(StoreError::from)?;
            }
        }
        let blocks = BlockStore::open(paths.blocks(), OpenMode::ReadWrite, durability)?;
        let supers = BlockStore::open(paths.supers(), OpenMode::ReadWrite, durability)?;
        Self::from_stores(config, blocks, supers, false)
    }

    /// Opens an existing ledger directory without modifying anything.
    pub fn open_read_only(dir: impl AsRef<Path>) -> Result<Self> {
        let paths = StorePaths::new(dir.as_ref());
        let config = read_meta(&paths)?.ok_or_else(|| LedgerError::Meta("missing meta.json".into()))?;
        let blocks = BlockStore::open(paths.blocks(), OpenMode::ReadOnly, Durability::Buffered)?;
        let supers = BlockStore::open(paths.supers(), OpenMode::ReadOnly, Durability::Buffered)?;
        Self::from_stores(config, blocks, supers, true)
    }

    /// Rebuilds writer state from stores. Writable ledgers also finish a seal
    /// that was interrupted between the last data block and its super block.
    pub fn from_stores(config: LedgerConfig, blocks: BlockStore, supers: BlockStore, read_only: bool) -> Result<Self> {
        let mut ledger = Self {
            config,
            blocks,
            supers,
            open: OpenChain::default(),
            tip: None,
            super_tip: None,
            sealed: 0,
            pending_anchor: VecDeque::new(),
            read_only,
        };
        ledger.recover()?;
        Ok(ledger)
    }

    fn read_hash(&self, store: &BlockStore, i: u64) -> Result<Tip> {
        match store.get(i) {
            Ok(b) => Ok(Tip { hash: b.current_hash, timestamp: b.timestamp }),
            Err(e) if self.read_only => {
                tracing::debug!(index = i, error = %e, "unreadable block during read-only open");
                Ok(Tip { hash: String::new(), timestamp: Timestamp::epoch() })
            }
            Err(e) => Err(e.into()),
        }
    }

    fn recover(&mut self) -> Result<()> {
        let len = self.blocks.len();
        let mut j = 0;
        loop {
            let (beta, alpha) = self.config.capacities.bounds(j);
            if len > alpha {
                j += 1;
                continue;
            }
            self.sealed = j;
            self.open = OpenChain { ordinal: j, ..Default::default() };
            for i in beta..len {
                let t = self.read_hash(&self.blocks, i)?;
                self.open.ts_from.get_or_insert(t.timestamp);
                self.open.ts_to = Some(t.timestamp);
                self.open.hashes.push(t.hash);
            }
            break;
        }
        if len > 0 {
            self.tip = Some(self.read_hash(&self.blocks, len - 1)?);
        }
        if !self.supers.is_empty() {
            self.super_tip = Some(self.read_hash(&self.supers, self.supers.len() - 1)?);
        }
        if self.read_only {
            return Ok(());
        }
        if self.supers.len() > self.sealed as u64 {
            return Err(LedgerError::Integrity {
                index: self.supers.len() - 1,
                reason: format!("{} super blocks for {} sealed chains", self.supers.len(), self.sealed),
            });
        }
        // Terminal written but super block missing.
        while (self.supers.len() as usize) < self.sealed {
            let k = self.supers.len() as usize;
            let (_, alpha) = self.config.capacities.bounds(k);
            let tb = self.blocks.get(alpha)?;
            let (sb, _) = self.mine_super(&tb)?;
            tracing::info!(chain = k, "recovered missing super block");
            self.pending_anchor.push_back(sb);
        }
        // Chain full but terminal missing.
        if self.data_count() == self.capacity() as u64 {
            self.seal_current()?;
        }
        Ok(())
    }

    pub fn config(&self) -> &LedgerConfig {
        &self.config
    }

    pub fn difficulty(&self) -> &Difficulty {
        &self.config.difficulty
    }

    /// Number of lower-level blocks.
    pub fn len(&self) -> u64 {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn super_len(&self) -> u64 {
        self.supers.len()
    }

    pub fn sealed_count(&self) -> usize {
        self.sealed
    }

    pub fn current_ordinal(&self) -> usize {
        self.open.ordinal
    }

    pub fn is_read_only(&self) -> bool {
        self.read_only
    }

    fn capacity(&self) -> u32 {
        self.config.capacities.get(self.open.ordinal)
    }

    fn data_count(&self) -> u64 {
        self.open.hashes.len().saturating_sub(1) as u64
    }

    pub fn blocks(&self) -> &BlockStore {
        &self.blocks
    }

    pub fn supers(&self) -> &BlockStore {
        &self.supers
    }

    pub fn block(&self, i: u64) -> Result<Block> {
        Ok(self.blocks.get(i)?)
    }

    pub fn super_block(&self, k: u64) -> Result<Block> {
        Ok(self.supers.get(k)?)
    }

    /// Super blocks sealed since the last call, oldest first.
    pub fn take_pending_anchors(&mut self) -> Vec<Block> {
        self.pending_anchor.drain(..).collect()
    }

    fn next_timestamp(&self, tip: Option<&Tip>) -> Timestamp {
        let now = Timestamp::now();
        match tip {
            Some(t) if t.timestamp > now => t.timestamp,
            _ => now,
        }
    }

    fn push_block(&mut self, kind: BlockKind, data: String) -> Result<(Block, Duration)> {
        let index = self.blocks.len();
        let prev = self.tip.as_ref().map_or(ZERO_HASH.to_string(), |t| t.hash.clone());
        let ts = self.next_timestamp(self.tip.as_ref());
        let (block, elapsed) = Block::mine_timed(kind, index, ts, data, prev, &self.config.difficulty)?;
        self.blocks.put(&block)?;
        self.tip = Some(Tip { hash: block.current_hash.clone(), timestamp: block.timestamp });
        Ok((block, elapsed))
    }

    fn mine_super(&mut self, terminal: &Block) -> Result<(Block, Duration)> {
        let index = self.supers.len();
        let prev = self.super_tip.as_ref().map_or(ZERO_HASH.to_string(), |t| t.hash.clone());
        let ts = self.next_timestamp(self.super_tip.as_ref());
        let (sb, elapsed) =
            Block::mine_timed(BlockKind::Super, index, ts, terminal.to_json(), prev, &self.config.difficulty)?;
        self.supers.put(&sb)?;
        self.super_tip = Some(Tip { hash: sb.current_hash.clone(), timestamp: sb.timestamp });
        Ok((sb, elapsed))
    }

    fn open_genesis(&mut self) -> Result<Creation> {
        let kind = if self.blocks.is_empty() { BlockKind::Agb } else { BlockKind::Rgb };
        let (g, elapsed) = self.push_block(kind, String::new())?;
        self.open.ts_from = Some(g.timestamp);
        self.open.ts_to = Some(g.timestamp);
        self.open.hashes.push(g.current_hash.clone());
        Ok(Creation { kind, index: g.index, elapsed })
    }

    /// Mines `payload` into a data block of the open chain, opening and sealing
    /// chains as needed.
    pub fn append_log(&mut self, payload: &str) -> Result<AppendOutcome> {
        if self.read_only {
            return Err(LedgerError::ReadOnly);
        }
        let mut created = Vec::with_capacity(4);
        if self.open.hashes.is_empty() {
            created.push(self.open_genesis()?);
        }
        let (block, elapsed) = self.push_block(BlockKind::Data, payload.to_string())?;
        created.push(Creation { kind: BlockKind::Data, index: block.index, elapsed });
        self.open.ts_to = Some(block.timestamp);
        self.open.hashes.push(block.current_hash.clone());

        let sealed = if self.data_count() == self.capacity() as u64 {
            let (sealed, mut timings) = self.seal_timed()?;
            created.append(&mut timings);
            Some(sealed)
        } else {
            None
        };
        Ok(AppendOutcome { block, sealed, created })
    }

    /// Closes the open chain with a terminal block and lifts it into the super chain.
    pub fn seal_current(&mut self) -> Result<(Block, Block)> {
        let (s, _) = self.seal_timed()?;
        Ok((s.terminal, s.super_block))
    }

    fn seal_timed(&mut self) -> Result<(Sealed, Vec<Creation>)> {
        if self.read_only {
            return Err(LedgerError::ReadOnly);
        }
        let need = self.capacity() as u64;
        let have = self.data_count();
        if self.open.hashes.is_empty() || have < need {
            return Err(LedgerError::NotFull { have, need });
        }
        let caps = self.config.capacities.expand(self.open.ordinal);
        let beta = beta_index(self.open.ordinal, &caps);
        let payload = TerminalPayload {
            aggr_hash: aggregate_hash(self.open.hashes.iter().map(String::as_str)),
            timestamp_from: self.open.ts_from.expect("open chain has a genesis"),
            timestamp_to: self.open.ts_to.expect("open chain has a genesis"),
            block_index_from: beta,
            block_index_to: beta + need,
        };
        let (terminal, tb_elapsed) = self.push_block(BlockKind::Terminal, payload.to_json())?;
        debug_assert_eq!(terminal.index, alpha_index(self.open.ordinal, &caps));
        let (super_block, sb_elapsed) = self.mine_super(&terminal)?;

        self.sealed += 1;
        self.open = OpenChain { ordinal: self.open.ordinal + 1, ..Default::default() };
        self.pending_anchor.push_back(super_block.clone());
        let timings = vec![
            Creation { kind: BlockKind::Terminal, index: terminal.index, elapsed: tb_elapsed },
            Creation { kind: BlockKind::Super, index: super_block.index, elapsed: sb_elapsed },
        ];
        Ok((Sealed { terminal, super_block }, timings))
    }

    /// Reads circled chain `j` back from storage.
    pub fn circled_chain(&self, j: usize) -> Result<CircledChain> {
        let (beta, alpha) = self.config.capacities.bounds(j);
        let len = self.blocks.len();
        if beta >= len {
            return Err(LedgerError::RangeOutOfBounds { start: beta, end: alpha + 1, len });
        }
        let end = (alpha + 1).min(len);
        let blocks = self.blocks.scan(beta..end).collect::<Result<Vec<_>, _>>()?;
        let state = if end == alpha + 1 { ChainState::Sealed } else { ChainState::Open };
        Ok(CircledChain { ordinal: j, capacity: self.config.capacities.get(j), blocks, state })
    }

    /// Recomputes the aggregate hash of sealed chain `j` from stored hashes.
    pub fn recompute_aggr(&self, j: usize) -> Result<String> {
        if j >= self.sealed_count_hint() {
            return Err(LedgerError::NotSealed(j));
        }
        self.circled_chain(j)?.recompute_aggr()
    }

    /// Sealed chains as implied by the stored block count.
    fn sealed_count_hint(&self) -> usize {
        if self.read_only {
            let len = self.blocks.len();
            let mut j = 0;
            while self.config.capacities.bounds(j).1 < len {
                j += 1;
            }
            j
        } else {
            self.sealed
        }
    }

    /// Verifies PoW, hash binding and layout for lower-level blocks in `range`.
    pub fn verify_chain(&self, range: Range<u64>) -> Result<VerificationReport> {
        let len = self.blocks.len();
        if range.start > range.end || range.end > len {
            return Err(LedgerError::RangeOutOfBounds { start: range.start, end: range.end, len });
        }
        let difficulty = &self.config.difficulty;
        let mut layout = LayoutCursor::new(&self.config.capacities);
        let mut prev_recomputed: Option<String> = match range.start {
            0 => Some(ZERO_HASH.to_string()),
            s => self.blocks.get(s - 1).ok().map(|b| b.recompute_hash()),
        };
        let mut report = VerificationReport::default();
        for i in range {
            let pos = layout.at(i);
            let check = match self.blocks.get(i) {
                Ok(block) => {
                    let recomputed = block.recompute_hash();
                    let pow_ok = pow_shape_ok(&block, &recomputed, difficulty);
                    let binding_ok = prev_recomputed.as_deref() == Some(block.previous_hash.as_str());
                    let genesis_shape = pos.kind != BlockKind::Agb || block.data.is_empty();
                    let structure_ok = block.index == i && block.kind == pos.kind && genesis_shape;
                    let mut detail = Vec::new();
                    if !structure_ok {
                        detail.push(format!("expected {} at {i}, found {} at {}", pos.kind, block.kind, block.index));
                    }
                    if !pow_ok {
                        detail.push("proof of work does not match contents".to_string());
                    }
                    if !binding_ok {
                        detail.push("previous_hash does not bind to predecessor".to_string());
                    }
                    prev_recomputed = Some(recomputed);
                    BlockCheck {
                        index: i,
                        expected_kind: pos.kind,
                        readable: true,
                        structure_ok,
                        binding_ok,
                        pow_ok,
                        detail: (!detail.is_empty()).then(|| detail.join("; ")),
                    }
                }
                Err(e) => {
                    prev_recomputed = None;
                    BlockCheck {
                        index: i,
                        expected_kind: pos.kind,
                        readable: false,
                        structure_ok: false,
                        binding_ok: false,
                        pow_ok: false,
                        detail: Some(e.to_string()),
                    }
                }
            };
            report.checks.push(check);
        }
        Ok(report)
    }

    /// Checks sealed chain `j` against its terminal payload and super block.
    pub fn verify_circled(&self, j: usize) -> ChainCheck {
        let (beta, alpha) = self.config.capacities.bounds(j);
        let mut check = ChainCheck {
            ordinal: j,
            terminal_index: alpha,
            readable: false,
            payload_ok: false,
            aggr_ok: false,
            rederived_ok: false,
            range_ok: false,
            super_ok: false,
        };
        let Ok(cb) = self.circled_chain(j) else { return check };
        if cb.state != ChainState::Sealed {
            return check;
        }
        check.readable = true;
        let tb = cb.terminal().expect("sealed");
        let Some(payload) = cb.payload() else { return check };
        check.payload_ok = true;
        check.aggr_ok = cb.recompute_aggr().is_ok_and(|a| a == payload.aggr_hash);
        check.rederived_ok = cb.rederive_aggr().is_ok_and(|a| a == payload.aggr_hash);
        let covered = cb.covered();
        check.range_ok = payload.block_index_from == beta
            && payload.block_index_to == alpha - 1
            && payload.timestamp_from == covered[0].timestamp
            && payload.timestamp_to == covered[covered.len() - 1].timestamp
            && payload.timestamp_from <= payload.timestamp_to;
        check.super_ok = self
            .supers
            .get(j as u64)
            .ok()
            .and_then(|sb| Block::from_json(&sb.data).ok())
            .is_some_and(|embedded| &embedded == tb);
        check
    }

    /// All sealed chains implied by the stored block count.
    pub fn verify_all_circled(&self) -> Vec<ChainCheck> {
        (0..self.sealed_count_hint()).map(|j| self.verify_circled(j)).collect()
    }

    /// Verifies only the super chain: one PoW recomputation per super block.
    pub fn verify_super_chain(&self) -> SuperReport {
        let difficulty = &self.config.difficulty;
        let mut prev = Some(ZERO_HASH.to_string());
        let mut report = SuperReport::default();
        for k in 0..self.supers.len() {
            let check = match self.supers.get(k) {
                Ok(sb) => {
                    let recomputed = sb.recompute_hash();
                    let c = SuperCheck {
                        index: k,
                        readable: true,
                        index_ok: sb.index == k && sb.kind == BlockKind::Super,
                        binding_ok: prev.as_deref() == Some(sb.previous_hash.as_str()),
                        pow_ok: pow_shape_ok(&sb, &recomputed, difficulty),
                        embeds_terminal: Block::from_json(&sb.data).is_ok_and(|tb| tb.kind == BlockKind::Terminal),
                    };
                    prev = Some(recomputed);
                    c
                }
                Err(_) => {
                    prev = None;
                    SuperCheck {
                        index: k,
                        readable: false,
                        index_ok: false,
                        binding_ok: false,
                        pow_ok: false,
                        embeds_terminal: false,
                    }
                }
            };
            report.checks.push(check);
        }
        report
    }

    /// Data-block lookup by payload hash, re-verifying each hit's PoW.
    pub fn lookup_payload(&self, key: &str) -> Result<Vec<u64>> {
        let hits = self.blocks.find_by_payload(key);
        for &i in &hits {
            let b = self.blocks.get(i).map_err(|e| LedgerError::Integrity { index: i, reason: e.to_string() })?;
            if payload_key(&b.data) != key || !crate::block::verify_pow(&b, &self.config.difficulty) {
                return Err(LedgerError::Integrity { index: i, reason: "stored block fails verification".into() });
            }
        }
        Ok(hits)
    }

    /// Locates a terminal block by hash (falling back to its claimed index)
    /// and checks it against storage.
    pub fn verify_tb(&self, submitted: &Block) -> Result<TbVerification> {
        let caps = &self.config.capacities;
        let is_terminal = |i: u64| position_of(i, caps).kind == BlockKind::Terminal && i < self.blocks.len();
        let index = self
            .blocks
            .find_by_hash(&submitted.current_hash)
            .filter(|&i| is_terminal(i))
            .or_else(|| Some(submitted.index).filter(|&i| is_terminal(i)))
            .ok_or(LedgerError::NotFound)?;
        let ordinal = position_of(index, caps).chain;
        let super_block = self.supers.get(ordinal as u64).ok();

        let Ok(cb) = self.circled_chain(ordinal) else {
            return Ok(TbVerification { ordinal, terminal_index: index, valid: false, aggr_match: false, super_block });
        };
        let submitted_aggr = TerminalPayload::from_json(&submitted.data).ok().map(|p| p.aggr_hash);
        let aggr_match = match (&submitted_aggr, cb.recompute_aggr(), cb.rederive_aggr()) {
            (Some(claimed), Ok(stored), Ok(derived)) => *claimed == stored && *claimed == derived,
            _ => false,
        };
        let (beta, alpha) = caps.bounds(ordinal);
        let chain_ok = self.verify_chain(beta..alpha + 1).map(|r| r.ok()).unwrap_or(false);
        let valid = chain_ok && cb.terminal() == Some(submitted) && self.verify_circled(ordinal).ok();
        Ok(TbVerification { ordinal, terminal_index: index, valid, aggr_match, super_block })
    }
}

fn read_meta(paths: &StorePaths) -> Result<Option<LedgerConfig>> {
    match std::fs::read(paths.meta()) {
        Ok(bytes) => serde_json::from_slice(&bytes).map(Some).map_err(|e| LedgerError::Meta(e.to_string())),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(StoreError::from(e).into()),
    }
}
