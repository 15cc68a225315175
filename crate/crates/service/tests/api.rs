use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use logchain_core::anchor::{AnchorConfig, SimulatedBackend};
use logchain_core::hash::sha256_hex;
use logchain_core::node::Logchain;
use logchain_core::store::{encode_record, StorePaths};
use logchain_core::{Block, Ledger, LedgerConfig};
use logchain_service::{ApiKeys, DurabilityMode, Plan, Service, ServiceConfig, NO_MATCH};
use proptest::prelude::*;
use serde_json::{json, Value};
use tower::ServiceExt;

const BASIC: &str = "basic-secret";
const PREMIUM: &str = "premium-secret";

fn keys() -> ApiKeys {
    ApiKeys::new([ApiKeys::entry("basic", BASIC, Plan::Basic), ApiKeys::entry("premium", PREMIUM, Plan::Premium)])
        .unwrap()
}

fn service(difficulty: &str, n: u32, queue_depth: usize) -> Service {
    let backend = Arc::new(SimulatedBackend::new(AnchorConfig::private(3)));
    let ledger = Ledger::in_memory(LedgerConfig::fixed(difficulty, n).unwrap()).unwrap();
    let node = Logchain::new(ledger, backend, "logchain", None).unwrap();
    Service::new(Arc::new(node), keys(), queue_depth, 1 << 20)
}

async fn call(app: &Router, method: &str, path: &str, key: Option<&str>, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(path).header("content-type", "application/json");
    if let Some(k) = key {
        req = req.header("x-api-key", k);
    }
    let body = body.map_or(Body::empty(), |b| Body::from(b.to_string()));
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value)
}

async fn post(app: &Router, path: &str, body: Value) -> (StatusCode, Value) {
    call(app, "POST", path, Some(BASIC), Some(body)).await
}

#[tokio::test]
async fn submit_raw_contract() {
    let svc = service("0", 10, 16);
    let app = svc.router();
    let payload = "x".repeat(64);
    let (status, body) = post(&app, "/submit_raw", json!({ "data": payload })).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "success");
    assert!(body["block_index"].as_u64().unwrap() >= 1);
    assert_eq!(body["current_hash"].as_str().unwrap().len(), 64);
    assert!(body["timestamp"].as_str().unwrap().ends_with('Z'));

    let (status, body) = post(&app, "/submit_raw", json!({ "data": "" })).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["status"], "failed");
    assert_eq!(body["error"]["code"], "empty_payload");

    let (status, body) = call(&app, "POST", "/submit_raw", Some("wrong"), Some(json!({ "data": "a" }))).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    assert_eq!(body["error"]["code"], "unauthorized");
    let (status, _) = call(&app, "POST", "/submit_raw", None, Some(json!({ "data": "a" }))).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);

    let (status, body) = post(&app, "/submit_raw", json!({ "data": "y".repeat((1 << 20) + 1) })).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
    assert_eq!(body["error"]["code"], "payload_too_large");
    let (status, _) = post(&app, "/submit_raw", json!({ "data": "y".repeat(1 << 20) })).await;
    assert_eq!(status, StatusCode::OK);

    let (status, _) = post(&app, "/submit_raw", json!({ "payload": "a" })).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn submit_digest_contract() {
    let svc = service("0", 10, 16);
    let app = svc.router();
    // printf hello | sha256sum
    let hello = "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824";
    assert_eq!(sha256_hex("hello"), hello);
    let (status, body) = post(&app, "/submit_digest", json!({ "digest": hello })).await;
    assert_eq!(status, StatusCode::OK, "{body}");

    for bad in [&hello[..63], &hello.to_uppercase(), &format!("{}g", &hello[..63]), ""] {
        let (status, body) = post(&app, "/submit_digest", json!({ "digest": bad })).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{bad}");
        assert_eq!(body["error"]["code"], "malformed_digest");
    }
}

#[tokio::test]
async fn verification_round_trip_and_no_mutation() {
    let svc = service("0", 3, 16);
    let app = svc.router();
    let digest = sha256_hex("file-1");
    let (_, created) = post(&app, "/submit_digest", json!({ "digest": digest })).await;
    let index = created["block_index"].as_u64().unwrap();
    post(&app, "/submit_raw", json!({ "data": "raw log line" })).await;
    let len_before = svc.node().stats().blocks;

    let (status, body) = post(&app, "/verify_digest", json!({ "digest": digest })).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["matches"], json!([index]));
    assert_eq!(body["count"], 1);

    let (_, body) = post(&app, "/verify_raw", json!({ "data": "raw log line" })).await;
    assert_eq!(body["count"], 1);

    let (status, body) = post(&app, "/verify_digest", json!({ "digest": sha256_hex("unseen") })).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "success");
    assert_eq!(body["matches"], json!([]));
    assert_eq!(body["message"], NO_MATCH);

    // Submitting a digest twice yields two blocks, both found.
    let (_, again) = post(&app, "/submit_digest", json!({ "digest": digest })).await;
    let (_, body) = post(&app, "/verify_digest", json!({ "digest": digest })).await;
    assert_eq!(body["matches"], json!([index, again["block_index"].as_u64().unwrap()]));

    let before = svc.node().stats().blocks;
    for _ in 0..3 {
        post(&app, "/verify_raw", json!({ "data": "raw log line" })).await;
        post(&app, "/verify_digest", json!({ "digest": digest })).await;
    }
    assert_eq!(svc.node().stats().blocks, before);
    assert!(before > len_before);
}

#[tokio::test]
async fn verify_tb_and_premium_gating() {
    let svc = service("0", 2, 16);
    let app = svc.router();
    post(&app, "/submit_raw", json!({ "data": "a" })).await;
    post(&app, "/submit_raw", json!({ "data": "b" })).await;
    svc.node().drain();
    let tb: Block = svc.node().read().block(3).unwrap();

    let (status, body) = post(&app, "/verify_tb", json!({ "terminal_block": tb })).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        (body["valid"].clone(), body["aggr_match"].clone(), body["anchored"].clone()),
        (json!(true), json!(true), json!(true))
    );
    assert!(body.get("receipt").is_none(), "basic plan sees no receipt details");

    let (_, body) = call(&app, "POST", "/verify_tb", Some(PREMIUM), Some(json!({ "terminal_block": tb }))).await;
    let tx = body["receipt"]["tx_hash"].as_str().unwrap().to_string();
    assert_eq!(body["receipt"]["fee_units"], 0);

    let (status, body) = call(&app, "GET", &format!("/receipts/{tx}"), Some(PREMIUM), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["receipt"]["tx_hash"], tx);
    let (status, _) = call(&app, "GET", &format!("/receipts/{tx}"), Some(BASIC), None).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    let (status, _) = call(&app, "GET", &format!("/receipts/{}", "0".repeat(64)), Some(PREMIUM), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let mut forged = tb.clone();
    let mut payload: Value = serde_json::from_str(&forged.data).unwrap();
    payload["aggr_hash"] = json!("1".repeat(64));
    forged.data = payload.to_string();
    let (status, body) = post(&app, "/verify_tb", json!({ "terminal_block": forged })).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["aggr_match"], false);
    assert_eq!(body["valid"], false);

    let mut unknown = tb.clone();
    unknown.current_hash = "e".repeat(64);
    unknown.index = 1;
    let (status, body) = post(&app, "/verify_tb", json!({ "terminal_block": unknown })).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"]["code"], "not_found");

    let (status, _) = post(&app, "/verify_tb", json!({ "terminal_block": "nope" })).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn stats_timings_health() {
    let svc = service("0", 1, 16);
    let app = svc.router();
    for i in 0..3 {
        post(&app, "/submit_digest", json!({ "digest": sha256_hex(i.to_string()) })).await;
    }
    svc.node().drain();
    let (status, stats) = call(&app, "GET", "/stats", Some(BASIC), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(stats["accepted"], 3);
    assert_eq!(stats["rejected"], 0);
    assert_eq!(stats["anchored"], 3);
    assert_eq!(stats["queue_depth"], 16);

    let (_, t) = call(&app, "GET", "/timings", Some(BASIC), None).await;
    let kinds: Vec<&str> = t["timings"].as_array().unwrap().iter().map(|r| r["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds.iter().filter(|k| **k == "SB").count(), 3);
    assert_eq!(kinds.iter().filter(|k| **k == "DB").count(), 3);
    assert_eq!(kinds.iter().filter(|k| **k == "RGB").count(), 2);

    let (status, body) = call(&app, "GET", "/healthz", None, None).await;
    assert_eq!((status, body["status"].clone()), (StatusCode::OK, json!("success")));
    let (status, _) = call(&app, "GET", "/stats", None, None).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    let (status, _) = call(&app, "GET", "/nope", None, None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn queue_overflow_returns_429() {
    let svc = service("0000", 100, 1);
    let app = svc.router();
    let tasks: Vec<_> = (0..16)
        .map(|i| {
            let app = app.clone();
            tokio::spawn(
                async move { post(&app, "/submit_digest", json!({ "digest": sha256_hex(i.to_string()) })).await },
            )
        })
        .collect();
    let mut statuses = Vec::new();
    for t in tasks {
        statuses.push(t.await.unwrap().0);
    }
    let ok = statuses.iter().filter(|s| **s == StatusCode::OK).count();
    let busy = statuses.iter().filter(|s| **s == StatusCode::TOO_MANY_REQUESTS).count();
    assert_eq!(ok + busy, 16, "{statuses:?}");
    assert!(busy >= 1 && ok >= 1, "{statuses:?}");
    let (_, stats) = call(&app, "GET", "/stats", Some(BASIC), None).await;
    assert_eq!(stats["rejected"], busy as u64);
}

/// Rewrites record `index` of a segment file through `edit`, with a fresh checksum.
fn rewrite_record(path: &std::path::Path, index: usize, edit: impl FnOnce(&mut Value)) {
    let mut edit = Some(edit);
    let bytes = std::fs::read(path).unwrap();
    let mut out = Vec::new();
    let (mut pos, mut i) = (0, 0);
    while pos < bytes.len() {
        let len = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
        let body = &bytes[pos + 8..pos + 8 + len];
        if i == index {
            let mut v: Value = serde_json::from_slice(body).unwrap();
            (edit.take().unwrap())(&mut v);
            out.extend(encode_record(v.to_string().as_bytes()));
        } else {
            out.extend(&bytes[pos..pos + 8 + len]);
        }
        pos += 8 + len;
        i += 1;
    }
    std::fs::write(path, out).unwrap();
}

#[tokio::test]
async fn tampered_store_reports_integrity_failure() {
    let dir = tempfile::tempdir().unwrap();
    let keys_path = dir.path().join("keys.toml");
    std::fs::write(&keys_path, ApiKeys::to_toml(&[ApiKeys::entry("basic", BASIC, Plan::Basic)])).unwrap();
    let config = ServiceConfig {
        difficulty: "0".into(),
        cb_capacity: 5,
        store_path: Some(dir.path().join("ledger")),
        durability: DurabilityMode::Buffered,
        api_keys_file: Some(keys_path),
        ..ServiceConfig::default()
    };
    {
        let svc = Service::from_config(&config).unwrap();
        let app = svc.router();
        post(&app, "/submit_raw", json!({ "data": "evidence" })).await;
    }
    rewrite_record(&StorePaths::new(dir.path().join("ledger")).blocks(), 1, |v| {
        v["nonce"] = json!(v["nonce"].as_u64().unwrap() + 1);
    });
    let svc = Service::from_config(&config).unwrap();
    let app = svc.router();
    let (status, body) = post(&app, "/verify_raw", json!({ "data": "evidence" })).await;
    assert_eq!(status, StatusCode::INTERNAL_SERVER_ERROR);
    assert_eq!(body["error"]["code"], "integrity_failure");
}

#[tokio::test]
async fn persisted_ledger_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let keys_path = dir.path().join("keys.toml");
    std::fs::write(&keys_path, ApiKeys::to_toml(&[ApiKeys::entry("basic", BASIC, Plan::Basic)])).unwrap();
    let config = ServiceConfig {
        difficulty: "0".into(),
        cb_capacity: 2,
        store_path: Some(dir.path().join("ledger")),
        durability: DurabilityMode::Buffered,
        api_keys_file: Some(keys_path),
        ..ServiceConfig::default()
    };
    {
        let svc = Service::from_config(&config).unwrap();
        let app = svc.router();
        for d in ["a", "b", "c"] {
            post(&app, "/submit_raw", json!({ "data": d })).await;
        }
        svc.node().drain();
    }
    let svc = Service::from_config(&config).unwrap();
    let app = svc.router();
    let (_, body) = post(&app, "/verify_raw", json!({ "data": "b" })).await;
    assert_eq!(body["matches"], json!([2]));
    let tb = svc.node().read().block(3).unwrap();
    let (_, body) = post(&app, "/verify_tb", json!({ "terminal_block": tb })).await;
    assert_eq!(body["anchored"], true, "receipts reload from disk");
}

#[tokio::test]
async fn read_only_mode_verifies_tampered_tail() {
    let dir = tempfile::tempdir().unwrap();
    let config = ServiceConfig {
        difficulty: "0".into(),
        cb_capacity: 2,
        store_path: Some(dir.path().join("ledger")),
        durability: DurabilityMode::Buffered,
        ..ServiceConfig::default()
    };
    let tb = {
        let svc = Service::with_keys(&config, keys()).unwrap();
        let app = svc.router();
        for d in ["a", "b"] {
            post(&app, "/submit_raw", json!({ "data": d })).await;
        }
        svc.node().drain();
        let tb = svc.node().read().block(3).unwrap();
        tb
    };
    // Corrupt the last data block; the store can no longer be opened for writing.
    rewrite_record(&StorePaths::new(dir.path().join("ledger")).blocks(), 2, |v| {
        v["data"] = json!("forged");
    });
    let ro = ServiceConfig { read_only: true, ..config.clone() };
    let svc = Service::with_keys(&ro, keys()).unwrap();
    let app = svc.router();
    let (status, body) = post(&app, "/verify_tb", json!({ "terminal_block": tb })).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["aggr_match"], false);
    assert_eq!(body["anchored"], true);
    let (status, body) = post(&app, "/submit_raw", json!({ "data": "c" })).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(body["error"]["code"], "read_only");
    assert_eq!(svc.node().stats().awaiting_submission, 0);

    let bad = ServiceConfig { read_only: true, store_path: None, ..config };
    assert!(Service::with_keys(&bad, keys()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn any_payload_round_trips(payloads in proptest::collection::vec("\\PC{1,80}", 1..6)) {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        rt.block_on(async {
            let svc = service("0", 2, 16);
            let app = svc.router();
            for p in &payloads {
                let (status, created) = post(&app, "/submit_raw", json!({ "data": p })).await;
                prop_assert_eq!(status, StatusCode::OK);
                let index = created["block_index"].as_u64().unwrap();
                let (_, found) = post(&app, "/verify_raw", json!({ "data": p })).await;
                let matches: Vec<u64> = serde_json::from_value(found["matches"].clone()).unwrap();
                prop_assert!(matches.contains(&index));
            }
            Ok(())
        })?;
    }
}
