use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};

use logchain_core::anchor::AnchorConfig;
use logchain_core::ledger::LedgerError;
use logchain_core::store::Durability;
use logchain_core::{Capacities, Difficulty, LedgerConfig};
use serde::{Deserialize, Serialize};

pub const ENV_CONFIG: &str = "LOGCHAIN_CONFIG";
pub const ENV_PORT: &str = "LOGCHAIN_PORT";

pub const DEFAULT_QUEUE_DEPTH: usize = 10_000;
pub const DEFAULT_MAX_DATA_BYTES: usize = 1 << 20;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("invalid {key}: {reason}")]
    Invalid { key: &'static str, reason: String },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DurabilityMode {
    #[default]
    Fsync,
    Buffered,
}

impl From<DurabilityMode> for Durability {
    fn from(m: DurabilityMode) -> Self {
        match m {
            DurabilityMode::Fsync => Durability::Fsync,
            DurabilityMode::Buffered => Durability::Buffered,
        }
    }
}

/// Service configuration, read from TOML.
///
/// ```toml
/// difficulty = "000"
/// cb_capacity = 10
/// store_path = "/var/lib/logchain"
/// api_keys_file = "keys.toml"
/// port = 8080
///
/// [backend]
/// kind = "public"
/// seed = 42
/// gas_price = 20
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub difficulty: String,
    /// Data blocks per circled chain.
    pub cb_capacity: u32,
    /// Per-chain capacity schedule; overrides `cb_capacity` when set.
    pub capacities: Option<Vec<u32>>,
    /// Ledger directory; in-memory when absent.
    pub store_path: Option<PathBuf>,
    pub durability: DurabilityMode,
    /// Serve verification only, opening the store without writing to it.
    pub read_only: bool,
    pub api_keys_file: Option<PathBuf>,
    pub bind: IpAddr,
    pub port: u16,
    pub queue_depth: usize,
    pub max_data_bytes: usize,
    pub backend: AnchorConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            difficulty: "000".into(),
            cb_capacity: 10,
            capacities: None,
            store_path: None,
            durability: DurabilityMode::Fsync,
            read_only: false,
            api_keys_file: None,
            bind: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: 8080,
            queue_depth: DEFAULT_QUEUE_DEPTH,
            max_data_bytes: DEFAULT_MAX_DATA_BYTES,
            backend: AnchorConfig::default(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let mut cfg = Self::from_toml(&text).map_err(|source| ConfigError::Parse { path: path.into(), source })?;
        // Relative paths inside the file are relative to the file.
        if let Some(dir) = path.parent() {
            for p in [&mut cfg.store_path, &mut cfg.api_keys_file].into_iter().flatten() {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    /// Loads the file named by `LOGCHAIN_CONFIG` (or defaults) and applies
    /// `LOGCHAIN_PORT`.
    pub fn from_env() -> Result<Self, ConfigError> {
        let mut cfg = match std::env::var_os(ENV_CONFIG) {
            Some(path) => Self::load(PathBuf::from(path))?,
            None => Self::default(),
        };
        cfg.apply_env()?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self) -> Result<(), ConfigError> {
        if let Ok(port) = std::env::var(ENV_PORT) {
            self.port = port
                .parse()
                .map_err(|e: std::num::ParseIntError| ConfigError::Invalid { key: ENV_PORT, reason: e.to_string() })?;
        }
        Ok(())
    }

    pub fn addr(&self) -> SocketAddr {
        SocketAddr::new(self.bind, self.port)
    }

    pub fn ledger_config(&self) -> Result<LedgerConfig, ConfigError> {
        let difficulty = Difficulty::new(self.difficulty.clone())
            .map_err(|e| ConfigError::Invalid { key: "difficulty", reason: e.to_string() })?;
        let caps = self.capacities.clone().unwrap_or_else(|| vec![self.cb_capacity]);
        let capacities = Capacities::new(caps)
            .map_err(|e: LedgerError| ConfigError::Invalid { key: "capacities", reason: e.to_string() })?;
        Ok(LedgerConfig::new(difficulty, capacities))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.ledger_config()?;
        if self.queue_depth == 0 {
            return Err(ConfigError::Invalid { key: "queue_depth", reason: "must be at least 1".into() });
        }
        if self.read_only && self.store_path.is_none() {
            return Err(ConfigError::Invalid { key: "read_only", reason: "needs store_path".into() });
        }
        if self.max_data_bytes == 0 {
            return Err(ConfigError::Invalid { key: "max_data_bytes", reason: "must be at least 1".into() });
        }
        Ok(())
    }
}
