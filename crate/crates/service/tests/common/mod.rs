#![allow(dead_code)]

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use btties_service::{router, App, ServiceConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

pub fn open(dir: &std::path::Path, compact_every: usize) -> App {
    App::open(ServiceConfig {
        data_dir: dir.to_path_buf(),
        seed: Some(7),
        compact_every,
    })
    .unwrap()
}

pub async fn call(app: &App, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = call_raw(app, method, uri, body).await;
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

pub async fn call_raw(app: &App, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let router: Router = router(app.clone());
    let builder = Request::builder().method(method).uri(uri);
    let request = match body {
        Some(v) => builder
            .header("content-type", "application/json")
            .body(Body::from(serde_json::to_vec(&v).unwrap()))
            .unwrap(),
        None => builder.body(Body::empty()).unwrap(),
    };
    let response = router.oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = axum::body::to_bytes(response.into_body(), usize::MAX).await.unwrap();
    (status, bytes.to_vec())
}

/// Wards `A1..A{a}` in region North and `B1..B{b}` in South, on a path.
pub fn definition(a: usize, b: usize) -> Value {
    let mut wards = Vec::new();
    for k in 1..=a {
        wards.push(json!({ "label": format!("A{k}"), "region": "North" }));
    }
    for k in 1..=b {
        wards.push(json!({ "label": format!("B{k}"), "region": "South" }));
    }
    let labels: Vec<String> = wards.iter().map(|w| w["label"].as_str().unwrap().to_string()).collect();
    let adjacency: Vec<Value> = labels.windows(2).map(|p| json!([p[0], p[1]])).collect();
    json!({ "name": "test study", "wards": wards, "adjacency": adjacency })
}

pub async fn create(app: &App, def: Value) -> String {
    let (status, body) = call(app, "POST", "/studies", Some(def)).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["id"].as_str().unwrap().to_string()
}

pub async fn judge(app: &App, study: &str, regions: &[&str]) -> String {
    let (status, body) = call(
        app,
        "POST",
        &format!("/studies/{study}/judges"),
        Some(json!({ "familiar_regions": regions })),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["id"].as_str().unwrap().to_string()
}

pub async fn submit(app: &App, study: &str, judge: &str, i: &str, j: &str, outcome: &str) -> (StatusCode, Value) {
    call(
        app,
        "POST",
        &format!("/studies/{study}/judges/{judge}/judgements"),
        Some(json!({ "ward_i": i, "ward_j": j, "outcome": outcome })),
    )
    .await
}
