use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use chordcorr_service::{app, ServiceConfig};

struct Client {
    app: Router,
}

struct Reply {
    status: StatusCode,
    cache: Option<String>,
    body: Value,
}

impl Client {
    fn new() -> Self {
        Self { app: app(ServiceConfig::default()) }
    }

    async fn send(&self, method: &str, uri: &str, body: Option<Value>) -> Reply {
        let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
        let req = req.body(body.map_or(Body::empty(), |b| Body::from(b.to_string()))).unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let cache = resp.headers().get("x-cache").map(|v| v.to_str().unwrap().to_string());
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let body = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
        Reply { status, cache, body }
    }

    async fn get(&self, uri: &str) -> Reply {
        self.send("GET", uri, None).await
    }

    async fn post(&self, uri: &str, body: Value) -> Reply {
        self.send("POST", uri, Some(body)).await
    }

    /// Polls a job to a terminal state, checking progress never drops.
    async fn wait(&self, job: &str) -> Value {
        let start = Instant::now();
        let mut last = 0.0;
        loop {
            let r = self.get(&format!("/jobs/{job}")).await;
            assert_eq!(r.status, StatusCode::OK);
            let p = r.body["progress"].as_f64().unwrap();
            assert!(p >= last, "progress went from {last} to {p}");
            last = p;
            match r.body["status"].as_str().unwrap() {
                "done" | "failed" => return r.body,
                _ => {}
            }
            assert!(start.elapsed() < Duration::from_secs(120), "job {job} did not finish");
            tokio::time::sleep(Duration::from_millis(10)).await;
        }
    }

    async fn dataset(&self, spec: Value) -> String {
        let r = self.post("/datasets", json!({ "synthetic": spec })).await;
        assert_eq!(r.status, StatusCode::CREATED, "{}", r.body);
        r.body["id"].as_str().unwrap().to_string()
    }

    async fn session(&self, dataset: &str, config: Value) -> String {
        let r = self.post("/sessions", json!({ "dataset": dataset, "config": config })).await;
        assert_eq!(r.status, StatusCode::CREATED, "{}", r.body);
        r.body["id"].as_str().unwrap().to_string()
    }

    /// Runs a compute request and returns the finished diagram.
    async fn compute(&self, uri: &str, body: Value) -> Value {
        let r = self.post(uri, body).await;
        assert!(r.status == StatusCode::ACCEPTED || r.status == StatusCode::OK, "{} {}", r.status, r.body);
        let job = self.wait(r.body["job"]["id"].as_str().unwrap()).await;
        assert_eq!(job["status"], "done", "{job}");
        let sid = uri.split('/').nth(2).unwrap();
        let d = self.get(&format!("/sessions/{sid}/diagram")).await;
        assert_eq!(d.status, StatusCode::OK, "{}", d.body);
        d.body
    }
}

fn small_spec() -> Value {
    json!({
        "dims": [16, 16, 8], "members": 24, "seed": 42,
        "cluster": [
            { "center": [4, 4, 4], "radius": 4.0, "core": 2.0, "signal": 0 },
            { "center": [12, 12, 4], "radius": 4.0, "core": 2.0, "signal": 0 }
        ]
    })
}

fn small_config() -> Value {
    json!({ "bricks": { "edge": 8 }, "focus_capacity": 8, "sampling": { "budget": 32 } })
}

#[tokio::test(flavor = "multi_thread")]
async fn dataset_metadata_and_errors() {
    let c = Client::new();
    let r = c.post("/datasets", json!({ "synthetic": small_spec() })).await;
    assert_eq!(r.status, StatusCode::CREATED);
    assert_eq!(r.body["dims"], json!([16, 16, 8]));
    assert_eq!(r.body["members"], 24);
    assert_eq!(r.body["aggregate_level"], 0);
    assert_eq!(r.body["fits_in_memory"], true);
    let id = r.body["id"].as_str().unwrap();
    assert_eq!(c.get(&format!("/datasets/{id}")).await.body, r.body);

    let small = c.post("/datasets", json!({ "synthetic": small_spec(), "memory_budget": 4096 })).await;
    assert_eq!(small.status, StatusCode::CREATED);
    assert_eq!(small.body["fits_in_memory"], false);
    assert!(small.body["aggregate_level"].as_u64().unwrap() > 0);

    let toml = "dims = [4, 4, 4]\nmembers = 8\n";
    let t = c.post("/datasets", json!({ "synthetic_toml": toml })).await;
    assert_eq!(t.status, StatusCode::CREATED);
    assert_eq!(t.body["dims"], json!([4, 4, 4]));

    assert_eq!(c.post("/datasets", json!({ "path": "/no/such/file.cens" })).await.status, StatusCode::NOT_FOUND);
    assert_eq!(c.post("/datasets", json!({ "synthetic": small_spec(), "memory_budget": 0 })).await.status, StatusCode::BAD_REQUEST);
    assert_eq!(c.post("/datasets", json!({ "synthetic_toml": "dims = [" })).await.status, StatusCode::BAD_REQUEST);
    assert_eq!(c.post("/datasets", json!({})).await.status, StatusCode::BAD_REQUEST);
    assert_eq!(c.get("/datasets/nope").await.status, StatusCode::NOT_FOUND);
    assert_eq!(c.get("/no/such/route").await.status, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread")]
async fn session_defaults_and_validation() {
    let c = Client::new();
    let ds = c.dataset(small_spec()).await;
    let r = c.post("/sessions", json!({ "dataset": ds })).await;
    assert_eq!(r.status, StatusCode::CREATED);
    assert_eq!(r.body["config"]["variables"], json!(["synth"]));
    assert_eq!(r.body["config"]["sampling"]["seed"], 42);
    assert_eq!(r.body["depth"], 0);
    let bad = c.post("/sessions", json!({ "dataset": ds, "config": { "variables": ["nope"] } })).await;
    assert_eq!(bad.status, StatusCode::BAD_REQUEST);
    let unknown = c.post("/sessions", json!({ "dataset": ds, "config": { "colour": 1 } })).await;
    assert_eq!(unknown.status, StatusCode::BAD_REQUEST);
    assert_eq!(c.post("/sessions", json!({ "dataset": "d999" })).await.status, StatusCode::NOT_FOUND);
    assert_eq!(c.get("/sessions/s999/diagram").await.status, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread")]
async fn context_is_cached_and_identical() {
    let c = Client::new();
    let ds = c.dataset(small_spec()).await;
    let s = c.session(&ds, small_config()).await;
    let d1 = c.compute(&format!("/sessions/{s}/context"), json!({})).await;
    assert_eq!(d1["mode"], "context");
    assert_eq!(d1["nodes"].as_array().unwrap().len(), 4);
    assert_eq!(d1["candidate_edges"], 6);
    let before = c.get("/stats").await.body["computations"].as_u64().unwrap();

    let again = c.post(&format!("/sessions/{s}/context"), json!({})).await;
    assert_eq!(again.status, StatusCode::OK);
    assert_eq!(again.body["job"]["cached"], true);
    assert_eq!(again.body["job"]["status"], "done");
    let d2 = c.get(&format!("/sessions/{s}/diagram")).await.body;
    assert_eq!(d1, d2);
    assert_eq!(c.get("/stats").await.body["computations"].as_u64().unwrap(), before);

    // A different seed is a different cache entry.
    let mut cfg = small_config();
    cfg["sampling"]["seed"] = json!(7);
    let s2 = c.session(&ds, cfg).await;
    let d3 = c.compute(&format!("/sessions/{s2}/context"), json!({})).await;
    assert_ne!(d3["key"], d1["key"]);
    assert_eq!(c.get("/stats").await.body["computations"].as_u64().unwrap(), before + 1);
}

#[tokio::test(flavor = "multi_thread")]
async fn identical_requests_coalesce() {
    let c = Client::new();
    let ds = c.dataset(small_spec()).await;
    let a = c.session(&ds, small_config()).await;
    let b = c.session(&ds, small_config()).await;
    let (ua, ub) = (format!("/sessions/{a}/context"), format!("/sessions/{b}/context"));
    let (ra, rb) = tokio::join!(c.post(&ua, json!({})), c.post(&ub, json!({})));
    let (ja, jb) = (&ra.body["job"], &rb.body["job"]);
    // Either the second request joined the running job or found the cache.
    assert!(ja["id"] == jb["id"] || jb["cached"] == true || ja["cached"] == true);
    c.wait(ja["id"].as_str().unwrap()).await;
    c.wait(jb["id"].as_str().unwrap()).await;
    assert_eq!(c.get("/stats").await.body["computations"], 1);
}

#[tokio::test(flavor = "multi_thread")]
async fn focus_navigation_and_back() {
    let c = Client::new();
    let ds = c.dataset(small_spec()).await;
    let s = c.session(&ds, small_config()).await;
    let ctx = c.compute(&format!("/sessions/{s}/context"), json!({})).await;
    let edge = ctx["edges"][0]["id"].as_str().unwrap().to_string();

    let f1 = c.compute(&format!("/sessions/{s}/focus"), json!({ "edge": edge })).await;
    assert_eq!(f1["mode"], "focus");
    let n = f1["nodes"].as_array().unwrap().len();
    assert_eq!(n, 16);
    assert_eq!(f1["candidate_edges"], 64);
    assert_eq!(c.get(&format!("/sessions/{s}")).await.body["depth"], 1);

    let f2 = c.compute(&format!("/sessions/{s}/focus"), json!({ "node": 0 })).await;
    let sel = &f2["selection"];
    assert_eq!(sel["first"], sel["second"]);
    assert_eq!(c.get(&format!("/sessions/{s}")).await.body["depth"], 2);

    let too_far = c.post(&format!("/sessions/{s}/back"), json!({ "k": 3 })).await;
    assert_eq!(too_far.status, StatusCode::BAD_REQUEST);
    assert_eq!(too_far.body["error"], "out_of_range");

    let computations = c.get("/stats").await.body["computations"].clone();
    let b1 = c.post(&format!("/sessions/{s}/back"), json!({ "k": 1 })).await;
    assert_eq!(b1.status, StatusCode::OK);
    assert_eq!(b1.cache.as_deref(), Some("hit"));
    assert_eq!(b1.body, f1);
    let b2 = c.post(&format!("/sessions/{s}/back"), json!({ "k": 1 })).await;
    assert_eq!(b2.body, ctx);
    assert_eq!(c.get("/stats").await.body["computations"], computations);

    // Reselecting the same edge reproduces the focus diagram from cache.
    let again = c.post(&format!("/sessions/{s}/focus"), json!({ "edge": edge })).await;
    assert_eq!(again.body["job"]["cached"], true);
    assert_eq!(again.body["session"]["depth"], 1);
    assert_eq!(c.get(&format!("/sessions/{s}/diagram")).await.body, f1);

    // back(2) from depth 2 lands on the context view.
    c.compute(&format!("/sessions/{s}/focus"), json!({ "node": 1 })).await;
    let b = c.post(&format!("/sessions/{s}/back"), json!({ "k": 2 })).await;
    assert_eq!(b.body, ctx);
    assert_eq!(c.post(&format!("/sessions/{s}/back"), json!({ "k": 1 })).await.status, StatusCode::BAD_REQUEST);
}

#[tokio::test(flavor = "multi_thread")]
async fn edge_detail_states() {
    let c = Client::new();
    let ds = c.dataset(small_spec()).await;
    let s = c.session(&ds, small_config()).await;
    let ctx = c.compute(&format!("/sessions/{s}/context"), json!({})).await;
    for e in ctx["edges"].as_array().unwrap() {
        let id = e["id"].as_str().unwrap();
        let d = c.get(&format!("/sessions/{s}/edges/{id}")).await;
        assert_eq!(d.status, StatusCode::OK);
        assert_eq!(d.body["status"], "computed");
        assert_eq!(d.body["value"], e["value"]);
        let arg = &d.body["argmax"];
        for side in 0..2 {
            let b = &d.body["bricks"][side];
            for a in 0..3 {
                let v = arg[side][a].as_u64().unwrap();
                assert!(b["lo"][a].as_u64().unwrap() <= v && v < b["hi"][a].as_u64().unwrap());
            }
        }
    }
    let first = ctx["edges"][0]["id"].as_str().unwrap().to_string();
    let unknown = format!("{}.9.9.0.0", ctx["key"].as_str().unwrap());
    assert_eq!(c.get(&format!("/sessions/{s}/edges/{unknown}")).await.status, StatusCode::NOT_FOUND);

    // Filtering hides edges; their ids are gone.
    let values: Vec<f64> = ctx["edges"].as_array().unwrap().iter().map(|e| e["strength"].as_f64().unwrap()).collect();
    let top = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let r = c.post(&format!("/sessions/{s}/filters"), json!({ "value_range": [top, 1.0] })).await;
    assert_eq!(r.status, StatusCode::OK);
    let filtered = c.get(&format!("/sessions/{s}/diagram")).await.body;
    let kept: Vec<&str> = filtered["edges"].as_array().unwrap().iter().map(|e| e["id"].as_str().unwrap()).collect();
    let hidden = ctx["edges"].as_array().unwrap().iter().map(|e| e["id"].as_str().unwrap()).find(|id| !kept.contains(id));
    let hidden = hidden.expect("some edge below the strongest");
    let g = c.get(&format!("/sessions/{s}/edges/{hidden}")).await;
    assert_eq!(g.status, StatusCode::GONE);
    let bad = c.post(&format!("/sessions/{s}/filters"), json!({ "value_range": [1.0, 0.0] })).await;
    assert_eq!(bad.status, StatusCode::BAD_REQUEST);
    c.post(&format!("/sessions/{s}/filters"), json!({})).await;

    // After refinement the context ids are stale.
    c.compute(&format!("/sessions/{s}/focus"), json!({ "edge": first })).await;
    assert_eq!(c.get(&format!("/sessions/{s}/edges/{first}")).await.status, StatusCode::GONE);
}

#[tokio::test(flavor = "multi_thread")]
async fn pending_edges_and_cancellation() {
    let c = Client::new();
    let ds = c
        .dataset(json!({ "dims": [32, 32, 16], "members": 200, "seed": 3 }))
        .await;
    // Thousands of KMI pairs: long enough to observe the pending state.
    let cfg = json!({ "measure": "kmi", "bricks": { "edge": 4 }, "sampling": { "budget": 200 } });
    let s = c.session(&ds, cfg).await;
    let r = c.post(&format!("/sessions/{s}/context"), json!({})).await;
    assert_eq!(r.status, StatusCode::ACCEPTED);
    let job = r.body["job"]["id"].as_str().unwrap().to_string();
    let key = r.body["session"]["stack"][0]["key"].as_str().unwrap().to_string();

    let d = c.get(&format!("/sessions/{s}/diagram")).await;
    assert_eq!(d.status, StatusCode::ACCEPTED);
    let e = c.get(&format!("/sessions/{s}/edges/{key}.0.1.0.0")).await;
    assert_eq!(e.status, StatusCode::OK);
    assert_eq!(e.body["status"], "pending");
    assert_eq!(e.body["job"], job.as_str());
    assert_eq!(c.post(&format!("/sessions/{s}/focus"), json!({ "node": 0 })).await.status, StatusCode::CONFLICT);

    let cancel = c.post(&format!("/jobs/{job}/cancel"), json!({})).await;
    assert_eq!(cancel.status, StatusCode::OK);
    let done = c.wait(&job).await;
    assert_eq!(done["status"], "failed");
    assert!(done["error"].as_str().unwrap().contains("cancel"));
    assert!(done["result"].is_null());
    assert_eq!(c.get(&format!("/sessions/{s}/diagram")).await.status, StatusCode::CONFLICT);
    assert_eq!(c.post("/jobs/j999/cancel", json!({})).await.status, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread")]
async fn finest_level_is_an_error() {
    let c = Client::new();
    let ds = c.dataset(small_spec()).await;
    let s = c.session(&ds, small_config()).await;
    let one = json!({ "lo": [0, 0, 0], "hi": [1, 1, 1] });
    let r = c.post(&format!("/sessions/{s}/focus"), json!({ "bricks": [one, one] })).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.body["error"], "finest_level");
    let outside = json!({ "lo": [0, 0, 0], "hi": [99, 1, 1] });
    let r = c.post(&format!("/sessions/{s}/focus"), json!({ "bricks": [outside, one] })).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    let r = c.post(&format!("/sessions/{s}/focus"), json!({ "node": 0, "edge": "x" })).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
}

#[tokio::test(flavor = "multi_thread")]
async fn matrix_mode() {
    let c = Client::new();
    let mut spec = small_spec();
    spec["variables"] = json!(["t", "q"]);
    let ds = c.dataset(spec).await;

    let single = c.session(&ds, small_config()).await;
    c.compute(&format!("/sessions/{single}/context"), json!({})).await;
    let r = c.post(&format!("/sessions/{single}/matrix"), json!({})).await;
    assert_eq!(r.status, StatusCode::OK);
    assert!(r.body["errors"][0].as_str().unwrap().contains("two variables"));
    assert_eq!(r.body["session"]["depth"], 0);
    assert_eq!(c.get(&format!("/sessions/{single}/diagram")).await.body["mode"], "context");

    let mut cfg = small_config();
    cfg["variables"] = json!(["t", "q"]);
    let s = c.session(&ds, cfg).await;
    let ctx = c.compute(&format!("/sessions/{s}/context"), json!({})).await;
    // Two variables: both intra-variable chords and both cross orientations.
    assert_eq!(ctx["candidate_edges"], 6 * 4);
    let m = c.compute(&format!("/sessions/{s}/matrix"), json!({})).await;
    assert_eq!(m["mode"], "matrix");
    let cells = m["matrix"]["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 4);
    assert!(cells.iter().all(|row| row.as_array().unwrap().len() == 4));
    let back = c.post(&format!("/sessions/{s}/back"), json!({ "k": 1 })).await;
    assert_eq!(back.body, ctx);
}

#[tokio::test(flavor = "multi_thread")]
async fn sessions_are_isolated() {
    let c = Client::new();
    let ds = c.dataset(small_spec()).await;
    let a = c.session(&ds, small_config()).await;
    let b = c.session(&ds, small_config()).await;
    let ctx = c.compute(&format!("/sessions/{a}/context"), json!({})).await;
    c.compute(&format!("/sessions/{b}/context"), json!({})).await;
    c.compute(&format!("/sessions/{a}/focus"), json!({ "node": 2 })).await;
    assert_eq!(c.get(&format!("/sessions/{a}")).await.body["depth"], 1);
    assert_eq!(c.get(&format!("/sessions/{b}")).await.body["depth"], 0);
    assert_eq!(c.get(&format!("/sessions/{b}/diagram")).await.body, ctx);
    c.post(&format!("/sessions/{b}/filters"), json!({ "value_range": [0.5, 1.0] })).await;
    assert_eq!(c.get(&format!("/sessions/{a}")).await.body["config"]["filters"]["value_range"], Value::Null);
}

#[tokio::test(flavor = "multi_thread")]
async fn benchmark_job() {
    let c = Client::new();
    let body = json!({ "brick": [4, 4, 4], "pairs": 3, "runs": 2, "budgets": [10, 20],
                       "strategies": ["uniform_random", "halton"], "sampling": { "acq_budget": 50 } });
    let r = c.post("/bench", body).await;
    assert_eq!(r.status, StatusCode::ACCEPTED);
    assert_eq!(r.body["kind"], "benchmark");
    let done = c.wait(r.body["id"].as_str().unwrap()).await;
    assert_eq!(done["status"], "done");
    let rows = done["output"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|s| s["samples"] == 6));
    assert_eq!(c.post("/bench", json!({ "pairs": 0 })).await.status, StatusCode::BAD_REQUEST);
}
