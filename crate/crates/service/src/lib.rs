//! HTTP API over a logchain ledger.
//!
//! | method | path             | body                    |
//! |--------|------------------|-------------------------|
//! | POST   | `/submit_raw`    | `{"data": "..."}`       |
//! | POST   | `/submit_digest` | `{"digest": "<hex64>"}` |
//! | POST   | `/verify_raw`    | `{"data": "..."}`       |
//! | POST   | `/verify_digest` | `{"digest": "<hex64>"}` |
//! | POST   | `/verify_tb`     | `{"terminal_block": {..}}` |
//! | GET    | `/timings`, `/stats`, `/receipts/{tx_hash}`, `/healthz` | |
//!
//! Every call except `/healthz` needs an `x-api-key` header.

pub mod api;
pub mod auth;
pub mod config;

pub use api::{digest_of, ApiError, RunningService, Service, ServiceError, API_KEY_HEADER, NO_MATCH};
pub use auth::{ApiKey, ApiKeys, Plan};
pub use config::{ConfigError, DurabilityMode, ServiceConfig};
