//! API keys, stored as SHA-256 digests.
//!
//! ```toml
//! [[keys]]
//! id = "ops"
//! sha256 = "5e884898da28047151d0e56f8dc6292773603d0d6aabbdd62a11ef721d1542d8"
//! plan = "PREMIUM"
//! ```

use std::collections::HashMap;
use std::path::Path;

use logchain_core::hash::{is_hex64, sha256_hex};
use serde::{Deserialize, Serialize};

use crate::config::ConfigError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Plan {
    Basic,
    Premium,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApiKey {
    pub id: String,
    /// Hex SHA-256 of the secret presented in `x-api-key`.
    pub sha256: String,
    pub plan: Plan,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KeysFile {
    #[serde(default)]
    keys: Vec<ApiKey>,
}

#[derive(Clone, Debug, Default)]
pub struct ApiKeys {
    by_digest: HashMap<String, ApiKey>,
}

impl ApiKeys {
    pub fn new(keys: impl IntoIterator<Item = ApiKey>) -> Result<Self, ConfigError> {
        let mut by_digest = HashMap::new();
        for key in keys {
            let digest = key.sha256.to_ascii_lowercase();
            if !is_hex64(&digest) {
                return Err(ConfigError::Invalid {
                    key: "keys.sha256",
                    reason: format!("key {:?} is not hex SHA-256", key.id),
                });
            }
            by_digest.insert(digest, key);
        }
        Ok(Self { by_digest })
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let file: KeysFile =
            toml::from_str(text).map_err(|e| ConfigError::Invalid { key: "api_keys_file", reason: e.to_string() })?;
        Self::new(file.keys)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::from_toml(&text)
    }

    /// Builds an entry from a plaintext secret.
    pub fn entry(id: impl Into<String>, secret: &str, plan: Plan) -> ApiKey {
        ApiKey { id: id.into(), sha256: sha256_hex(secret), plan }
    }

    pub fn authenticate(&self, secret: &str) -> Option<&ApiKey> {
        self.by_digest.get(&sha256_hex(secret))
    }

    pub fn len(&self) -> usize {
        self.by_digest.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_digest.is_empty()
    }

    pub fn to_toml(keys: &[ApiKey]) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            keys: &'a [ApiKey],
        }
        toml::to_string(&Out { keys }).expect("keys serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashed_lookup() {
        let keys =
            ApiKeys::new([ApiKeys::entry("a", "s3cret", Plan::Basic), ApiKeys::entry("b", "gold", Plan::Premium)])
                .unwrap();
        assert_eq!(keys.authenticate("s3cret").unwrap().plan, Plan::Basic);
        assert_eq!(keys.authenticate("gold").unwrap().id, "b");
        assert!(keys.authenticate("nope").is_none());
        assert!(keys.authenticate(&sha256_hex("gold")).is_none());
    }

    #[test]
    fn toml_round_trip() {
        let entries = vec![ApiKeys::entry("ops", "password", Plan::Premium)];
        let text = ApiKeys::to_toml(&entries);
        assert!(text.contains("5e884898da28047151d0e56f8dc6292773603d0d6aabbdd62a11ef721d1542d8"));
        assert!(text.contains("PREMIUM"));
        let keys = ApiKeys::from_toml(&text).unwrap();
        assert_eq!(keys.authenticate("password").unwrap().id, "ops");
        assert!(ApiKeys::from_toml("[[keys]]\nid=\"x\"\nsha256=\"abc\"\nplan=\"BASIC\"\n").is_err());
    }
}
