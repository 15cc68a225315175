//! SHA-256 helpers shared by every layer of the ledger.
//!
//! All hashing funnels through [`sha256_hex`] / [`sha256`] so that each thread
//! keeps an exact count of digest invocations. Verification code uses the
//! counter to prove how much work a check performed.

use std::cell::Cell;

use sha2::{Digest, Sha256};

/// Lowercase hex length of a SHA-256 digest.
pub const HEX_LEN: usize = 64;

/// `previous_hash` of the absolute genesis block and of super block 0.
pub const ZERO_HASH: &str = "0000000000000000000000000000000000000000000000000000000000000000";

thread_local! {
    static CALLS: Cell<u64> = const { Cell::new(0) };
}

#[inline]
fn bump() {
    CALLS.with(|c| c.set(c.get() + 1));
}

pub(crate) fn add_calls(n: u64) {
    CALLS.with(|c| c.set(c.get() + n));
}

/// Number of SHA-256 invocations made by the current thread so far.
pub fn hash_calls() -> u64 {
    CALLS.with(Cell::get)
}

/// Raw SHA-256 digest.
pub fn sha256(bytes: impl AsRef<[u8]>) -> [u8; 32] {
    bump();
    Sha256::digest(bytes.as_ref()).into()
}

/// SHA-256 digest rendered as 64 lowercase hex characters.
pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    hex::encode(sha256(bytes))
}

/// True for exactly 64 lowercase hex characters.
pub fn is_hex64(s: &str) -> bool {
    s.len() == HEX_LEN && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}
