use logchain_core::anchor::{AnchorConfig, BackendKind};
use logchain_core::hash::sha256_hex;
use logchain_service::ServiceConfig;
use serde::{Deserialize, Serialize};

pub const TPS_LEVELS: [f64; 4] = [0.1, 1.0, 10.0, 100.0];
pub const N_LEVELS: [u32; 3] = [1, 10, 100];
pub const GAS_TIERS: [u64; 3] = [6, 9, 20];
pub const PAYLOAD_BYTES: usize = 64;
pub const DIFFICULTY: &str = "000";

/// Files submitted per scenario: 200, or 1000 at the largest capacity.
pub fn default_file_count(n: u32) -> u32 {
    if n <= 10 {
        200
    } else {
        1000
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub tps: f64,
    pub n: u32,
    /// Gas price for the public backend; `None` selects the private backend.
    pub gas_tier: Option<u64>,
    pub file_count: u32,
    pub payload_bytes: usize,
    pub difficulty: String,
    pub seed: u64,
}

impl Scenario {
    pub fn new(tps: f64, n: u32, gas_tier: Option<u64>) -> Self {
        Self {
            tps,
            n,
            gas_tier,
            file_count: default_file_count(n),
            payload_bytes: PAYLOAD_BYTES,
            difficulty: DIFFICULTY.into(),
            seed: 0,
        }
    }

    pub fn backend_kind(&self) -> BackendKind {
        if self.gas_tier.is_some() {
            BackendKind::Public
        } else {
            BackendKind::Private
        }
    }

    pub fn expected_supers(&self) -> u32 {
        self.file_count / self.n
    }

    /// Content of synthetic file `i`: `payload_bytes` of deterministic text.
    pub fn file(&self, i: u32) -> Vec<u8> {
        let stem = format!("{:016x}{:08x}|", self.seed, i);
        stem.bytes().cycle().take(self.payload_bytes).collect()
    }

    pub fn digest(&self, i: u32) -> String {
        sha256_hex(self.file(i))
    }

    /// Service configuration matching this scenario, on top of `base`.
    pub fn service_config(&self, base: &ServiceConfig) -> ServiceConfig {
        let mut backend = match self.gas_tier {
            Some(g) => AnchorConfig::public(self.seed, Some(g)),
            None => AnchorConfig::private(self.seed),
        };
        backend.time_scale = base.backend.time_scale;
        ServiceConfig {
            difficulty: self.difficulty.clone(),
            cb_capacity: self.n,
            capacities: None,
            store_path: None,
            backend,
            ..base.clone()
        }
    }
}

/// Full experiment grid for one backend kind: tps x n x gas tier.
pub fn grid_scenarios(kind: BackendKind) -> Vec<Scenario> {
    let tiers: Vec<Option<u64>> = match kind {
        BackendKind::Public => GAS_TIERS.iter().copied().map(Some).collect(),
        BackendKind::Private => vec![None],
    };
    let mut out = Vec::new();
    for &tps in &TPS_LEVELS {
        for &n in &N_LEVELS {
            for &g in &tiers {
                out.push(Scenario::new(tps, n, g));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        assert_eq!(grid_scenarios(BackendKind::Public).len(), 36);
        assert_eq!(grid_scenarios(BackendKind::Private).len(), 12);
        assert!(grid_scenarios(BackendKind::Private).iter().all(|s| s.gas_tier.is_none()));
    }

    #[test]
    fn file_counts_and_supers() {
        assert_eq!(Scenario::new(1.0, 10, None).expected_supers(), 20);
        let big = Scenario::new(1.0, 100, Some(6));
        assert_eq!((big.file_count, big.expected_supers()), (1000, 10));
        assert_eq!(Scenario::new(1.0, 1, None).file_count, 200);
    }

    #[test]
    fn synthetic_files() {
        let s = Scenario::new(1.0, 1, None);
        assert_eq!(s.file(0).len(), 64);
        assert_ne!(s.digest(0), s.digest(1));
        assert_eq!(s.digest(5), sha256_hex(s.file(5)));
    }

    #[test]
    fn service_config_follows_scenario() {
        let c = Scenario::new(10.0, 100, Some(9)).service_config(&ServiceConfig::default());
        assert_eq!(c.cb_capacity, 100);
        assert_eq!(c.difficulty, "000");
        assert_eq!(c.backend.kind, BackendKind::Public);
        assert_eq!(c.backend.gas_price, Some(9));
    }
}
