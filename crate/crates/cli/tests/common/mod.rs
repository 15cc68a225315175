#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;

use logchain_core::anchor::{AnchorConfig, SimulatedBackend};
use logchain_core::hash::sha256_hex;
use logchain_core::store::{encode_record, Durability, StorePaths};
use logchain_core::{Block, LedgerConfig, Logchain};
use serde_json::Value;

pub const BIN: &str = env!("CARGO_BIN_EXE_logchain");

/// Builds an on-disk ledger of `digests` data blocks with persisted receipts.
/// When `down_from` is set, the backend goes down after that many appends so
/// later super blocks stay unanchored.
pub fn build_ledger(dir: &Path, difficulty: &str, n: u32, digests: usize, down_from: Option<usize>) -> Vec<Block> {
    std::fs::create_dir_all(dir).unwrap();
    let backend = Arc::new(
        SimulatedBackend::with_receipt_log(
            AnchorConfig::private(7),
            StorePaths::new(dir).receipts(),
            Durability::Buffered,
        )
        .unwrap(),
    );
    let config = LedgerConfig::fixed(difficulty, n).unwrap();
    let node = Logchain::open(dir, config, Durability::Buffered, backend.clone(), "logchain", None).unwrap();
    for i in 0..digests {
        if down_from == Some(i) {
            node.drain();
            backend.set_down(true);
        }
        node.append(&sha256_hex(format!("file-{i}"))).unwrap();
    }
    node.drain();
    let ledger = node.read();
    (0..ledger.sealed_count()).map(|j| ledger.circled_chain(j).unwrap().terminal().unwrap().clone()).collect()
}

/// Splits a segment file into record bodies.
pub fn records(path: &Path) -> Vec<Vec<u8>> {
    let bytes = std::fs::read(path).unwrap();
    let mut out = Vec::new();
    let mut pos = 0;
    while pos + 8 <= bytes.len() {
        let len = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
        out.push(bytes[pos + 8..pos + 8 + len].to_vec());
        pos += 8 + len;
    }
    out
}

/// Replaces record `index` with `body`, writing a fresh checksum.
pub fn replace_record(path: &Path, index: usize, body: &[u8]) {
    let mut out = Vec::new();
    for (i, r) in records(path).into_iter().enumerate() {
        out.extend(encode_record(if i == index { body } else { &r }));
    }
    std::fs::write(path, out).unwrap();
}

/// Rewrites record `index` as JSON through `edit`.
pub fn rewrite_record(path: &Path, index: usize, edit: impl FnOnce(&mut Value)) {
    let mut v: Value = serde_json::from_slice(&records(path)[index]).unwrap();
    edit(&mut v);
    replace_record(path, index, v.to_string().as_bytes());
}

pub fn logchain(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("LOGCHAIN_CONFIG").env_remove("LOGCHAIN_PORT").output().unwrap()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}
