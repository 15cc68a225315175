//! Tamper-evident hierarchical log storage.
//!
//! Logs are mined into proof-of-work blocks ([`block`]), grouped into
//! fixed-capacity circled chains sealed by terminal blocks ([`ledger`]), and
//! each terminal block is lifted into a super block that is anchored to an
//! external chain ([`anchor`]). Everything is persisted in append-only
//! segment files ([`store`]). [`node::Logchain`] wires these together for the
//! service. [`costmodel`] compares the cost of the two anchoring strategies.

pub mod anchor;
pub mod block;
pub mod costmodel;
pub mod hash;
pub mod ledger;
pub mod node;
pub mod store;

pub use block::{verify_pow, Block, BlockKind, Difficulty, Timestamp};
pub use ledger::{alpha_index, beta_index, Capacities, Ledger, LedgerConfig, TerminalPayload};
pub use node::{Logchain, TimingKind, TimingRecord};
