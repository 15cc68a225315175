//! Append-only segment storage for blocks and receipts.
//!
//! A segment is a flat sequence of records:
//!
//! ```text
//! [u32 len LE][u32 crc32(body) LE][body]
//! ```
//!
//! For block segments the body is the canonical block JSON. Record `i` of a
//! block segment is the block with global index `i`. Indexes by payload hash
//! and by `current_hash` live in memory and are rebuilt on every open.
//!
//! A short tail (a record whose header or body runs past end of file) is the
//! footprint of an interrupted append. Read-write opens truncate it; read-only
//! opens leave the file alone and report it through [`SegmentFile::torn_tail`].

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};

use parking_lot::Mutex;

use crate::block::Block;
use crate::hash::sha256_hex;

pub const HEADER_LEN: usize = 8;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("index gap: expected block {expected}, got {got}")]
    IndexGap { expected: u64, got: u64 },
    #[error("record {0} not found")]
    NotFound(u64),
    #[error("record {index} is corrupt: {reason}")]
    Corrupt { index: u64, reason: String },
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Durability {
    /// `fdatasync` after every append.
    #[default]
    Fsync,
    /// Flush to the OS only.
    Buffered,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpenMode {
    ReadWrite,
    ReadOnly,
}

#[derive(Clone, Copy, Debug)]
struct Slot {
    offset: u64,
    len: u32,
}

enum Backing {
    File { writer: Option<File>, reader: Mutex<File>, durability: Durability },
    Memory(Vec<u8>),
}

/// Unrecovered bytes at the end of a segment opened read-only.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TornTail {
    pub offset: u64,
    pub len: u64,
}

pub struct SegmentFile {
    backing: Backing,
    slots: Vec<Slot>,
    end: u64,
    torn_tail: Option<TornTail>,
    path: Option<PathBuf>,
}

pub fn encode_record(body: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + body.len());
    out.extend_from_slice(&(body.len() as u32).to_le_bytes());
    out.extend_from_slice(&crc32fast::hash(body).to_le_bytes());
    out.extend_from_slice(body);
    out
}

/// Splits raw segment bytes into record slots. Returns the slots and the end
/// offset of the last complete record.
fn parse_slots(bytes: &[u8]) -> (Vec<Slot>, u64) {
    let mut slots = Vec::new();
    let mut off = 0usize;
    while bytes.len() - off >= HEADER_LEN {
        let len = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
        if bytes.len() - off - HEADER_LEN < len as usize {
            break;
        }
        slots.push(Slot { offset: off as u64, len });
        off += HEADER_LEN + len as usize;
    }
    (slots, off as u64)
}

fn check_record(index: u64, raw: &[u8]) -> Result<Vec<u8>> {
    let crc = u32::from_le_bytes(raw[4..8].try_into().unwrap());
    let body = &raw[HEADER_LEN..];
    if crc32fast::hash(body) != crc {
        return Err(StoreError::Corrupt { index, reason: "checksum mismatch".into() });
    }
    Ok(body.to_vec())
}

impl SegmentFile {
    pub fn in_memory() -> Self {
        Self { backing: Backing::Memory(Vec::new()), slots: Vec::new(), end: 0, torn_tail: None, path: None }
    }

    /// Builds an in-memory segment from raw bytes, e.g. a truncated copy of a file.
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        let (slots, end) = parse_slots(&bytes);
        let torn_tail = (end < bytes.len() as u64).then(|| TornTail { offset: end, len: bytes.len() as u64 - end });
        let mut bytes = bytes;
        bytes.truncate(end as usize);
        Self { backing: Backing::Memory(bytes), slots, end, torn_tail, path: None }
    }

    pub fn open(path: impl AsRef<Path>, mode: OpenMode, durability: Durability) -> Result<Self> {
        let path = path.as_ref();
        let mut file = match mode {
            OpenMode::ReadWrite => OpenOptions::new().read(true).write(true).create(true).truncate(false).open(path)?,
            OpenMode::ReadOnly => File::open(path)?,
        };
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;
        let (slots, end) = parse_slots(&bytes);
        let mut torn_tail = None;
        if end < bytes.len() as u64 {
            let tail = TornTail { offset: end, len: bytes.len() as u64 - end };
            match mode {
                OpenMode::ReadWrite => {
                    tracing::warn!(path = %path.display(), offset = end, len = tail.len, "truncating torn tail");
                    file.set_len(end)?;
                    file.sync_all()?;
                }
                OpenMode::ReadOnly => torn_tail = Some(tail),
            }
        }
        let writer = match mode {
            OpenMode::ReadWrite => {
                let mut w = OpenOptions::new().append(true).open(path)?;
                w.seek(SeekFrom::End(0))?;
                Some(w)
            }
            OpenMode::ReadOnly => None,
        };
        Ok(Self {
            backing: Backing::File { writer, reader: Mutex::new(file), durability },
            slots,
            end,
            torn_tail,
            path: Some(path.to_path_buf()),
        })
    }

    pub fn len(&self) -> u64 {
        self.slots.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn torn_tail(&self) -> Option<TornTail> {
        self.torn_tail
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Appends one record and returns its ordinal.
    pub fn append(&mut self, body: &[u8]) -> Result<u64> {
        let record = encode_record(body);
        match &mut self.backing {
            Backing::Memory(buf) => buf.extend_from_slice(&record),
            Backing::File { writer, durability, .. } => {
                let w = writer
                    .as_mut()
                    .ok_or_else(|| io::Error::new(io::ErrorKind::PermissionDenied, "segment opened read-only"))?;
                w.write_all(&record)?;
                match durability {
                    Durability::Fsync => w.sync_data()?,
                    Durability::Buffered => w.flush()?,
                }
            }
        }
        self.slots.push(Slot { offset: self.end, len: body.len() as u32 });
        self.end += record.len() as u64;
        Ok(self.len() - 1)
    }

    /// Reads a record body back from the backing storage, re-checking its CRC.
    pub fn read(&self, index: u64) -> Result<Vec<u8>> {
        let slot = *self.slots.get(index as usize).ok_or(StoreError::NotFound(index))?;
        let total = HEADER_LEN + slot.len as usize;
        let raw = match &self.backing {
            Backing::Memory(buf) => buf[slot.offset as usize..slot.offset as usize + total].to_vec(),
            Backing::File { reader, .. } => {
                let mut f = reader.lock();
                f.seek(SeekFrom::Start(slot.offset))?;
                let mut raw = vec![0u8; total];
                f.read_exact(&mut raw).map_err(|e| match e.kind() {
                    io::ErrorKind::UnexpectedEof => {
                        StoreError::Corrupt { index, reason: "record truncated on disk".into() }
                    }
                    _ => StoreError::Io(e),
                })?;
                raw
            }
        };
        if u32::from_le_bytes(raw[..4].try_into().unwrap()) != slot.len {
            return Err(StoreError::Corrupt { index, reason: "length header changed".into() });
        }
        check_record(index, &raw)
    }

    /// Raw bytes of the whole segment (test and tooling helper).
    pub fn raw_bytes(&self) -> Result<Vec<u8>> {
        match &self.backing {
            Backing::Memory(buf) => Ok(buf.clone()),
            Backing::File { reader, .. } => {
                let mut f = reader.lock();
                f.seek(SeekFrom::Start(0))?;
                let mut out = Vec::new();
                f.read_to_end(&mut out)?;
                Ok(out)
            }
        }
    }
}

/// Block segment plus lookup indexes.
pub struct BlockStore {
    seg: SegmentFile,
    by_payload: HashMap<String, Vec<u64>>,
    by_hash: HashMap<String, u64>,
    unreadable: Vec<u64>,
}

/// Lookup key for a payload: SHA-256 hex of the block's `data` field.
pub fn payload_key(data: &str) -> String {
    sha256_hex(data)
}

impl BlockStore {
    pub fn in_memory() -> Self {
        Self::from_segment(SegmentFile::in_memory())
    }

    pub fn open(path: impl AsRef<Path>, mode: OpenMode, durability: Durability) -> Result<Self> {
        Ok(Self::from_segment(SegmentFile::open(path, mode, durability)?))
    }

    /// Rebuilds the in-memory indexes from an existing segment. Records that
    /// fail their checksum or do not parse are remembered as unreadable.
    pub fn from_segment(seg: SegmentFile) -> Self {
        let mut store = Self { seg, by_payload: HashMap::new(), by_hash: HashMap::new(), unreadable: Vec::new() };
        for i in 0..store.seg.len() {
            match store.get(i) {
                Ok(b) => store.index_block(i, &b),
                Err(e) => {
                    tracing::warn!(index = i, error = %e, "unreadable block record");
                    store.unreadable.push(i);
                }
            }
        }
        store
    }

    fn index_block(&mut self, i: u64, b: &Block) {
        self.by_payload.entry(payload_key(&b.data)).or_default().push(i);
        self.by_hash.entry(b.current_hash.clone()).or_insert(i);
    }

    pub fn len(&self) -> u64 {
        self.seg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seg.is_empty()
    }

    pub fn segment(&self) -> &SegmentFile {
        &self.seg
    }

    /// Ordinals of records that could not be decoded at open time.
    pub fn unreadable(&self) -> &[u64] {
        &self.unreadable
    }

    /// Appends a block; `block.index` must be the next ordinal.
    pub fn put(&mut self, block: &Block) -> Result<u64> {
        let expected = self.len();
        if block.index != expected {
            return Err(StoreError::IndexGap { expected, got: block.index });
        }
        let i = self.seg.append(block.to_json().as_bytes())?;
        self.index_block(i, block);
        Ok(i)
    }

    pub fn get(&self, index: u64) -> Result<Block> {
        let body = self.seg.read(index)?;
        let text = std::str::from_utf8(&body)
            .map_err(|e| StoreError::Corrupt { index, reason: format!("invalid utf-8: {e}") })?;
        Block::from_json(text).map_err(|e| StoreError::Corrupt { index, reason: e.to_string() })
    }

    pub fn get_raw(&self, index: u64) -> Result<Vec<u8>> {
        self.seg.read(index)
    }

    /// Indices of all blocks whose payload hashes to `key`, ascending.
    pub fn find_by_payload(&self, key: &str) -> Vec<u64> {
        self.by_payload.get(key).cloned().unwrap_or_default()
    }

    pub fn find_by_hash(&self, current_hash: &str) -> Option<u64> {
        self.by_hash.get(current_hash).copied()
    }

    pub fn scan(&self, range: Range<u64>) -> impl Iterator<Item = Result<Block>> + '_ {
        let end = range.end.min(self.len());
        (range.start..end).map(move |i| self.get(i))
    }
}

/// Segment of JSON documents (anchor receipts).
pub struct JsonLog {
    seg: SegmentFile,
}

impl JsonLog {
    pub fn in_memory() -> Self {
        Self { seg: SegmentFile::in_memory() }
    }

    pub fn open(path: impl AsRef<Path>, mode: OpenMode, durability: Durability) -> Result<Self> {
        Ok(Self { seg: SegmentFile::open(path, mode, durability)? })
    }

    pub fn append<T: serde::Serialize>(&mut self, value: &T) -> Result<u64> {
        let body = serde_json::to_vec(value).map_err(io::Error::other)?;
        self.seg.append(&body)
    }

    pub fn load<T: serde::de::DeserializeOwned>(&self) -> Result<Vec<T>> {
        (0..self.seg.len())
            .map(|i| {
                let body = self.seg.read(i)?;
                serde_json::from_slice(&body).map_err(|e| StoreError::Corrupt { index: i, reason: e.to_string() })
            })
            .collect()
    }

    pub fn segment(&self) -> &SegmentFile {
        &self.seg
    }
}

/// File names inside a ledger directory.
#[derive(Clone, Debug)]
pub struct StorePaths {
    pub root: PathBuf,
}

impl StorePaths {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn blocks(&self) -> PathBuf {
        self.root.join("blocks.seg")
    }

    pub fn supers(&self) -> PathBuf {
        self.root.join("super.seg")
    }

    pub fn receipts(&self) -> PathBuf {
        self.root.join("receipts.seg")
    }

    pub fn meta(&self) -> PathBuf {
        self.root.join("meta.json")
    }
}
