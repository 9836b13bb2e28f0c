mod common;

use std::sync::Arc;

use abkit_service::router;
use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use common::*;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let v = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap_or(Value::Null) };
    (status, v)
}

#[tokio::test]
async fn browsing_round_trip_over_http() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("classes.json"), r#"{"n02084071":"dog: a domesticated carnivore"}"#).unwrap();
    let store = store(dir.path(), false);
    store.register(browsing("A1", 1)).unwrap();
    let app = router(Arc::new(store));

    let (st, page) = call(&app, "GET", "/hit/A1/page/2", None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(page["interface"], "browsing");
    assert_eq!(page["slots"].as_array().unwrap().len(), 48);
    assert_eq!(page["class_description"], "dog: a domesticated carnivore");
    assert!(page["slots"][0].get("seed").is_none());

    let batch = json!({
        "worker_id": "W9",
        "events": [
            {"page_idx": 2, "t": 5, "type": "open"},
            {"page_idx": 2, "t": 10, "type": "trace", "slot": 4, "x": 0.5, "y": 0.5},
            {"page_idx": 2, "t": 30, "type": "click", "slot": 4, "x": 0.5, "y": 0.5}
        ]
    });
    let (st, ack) = call(&app, "POST", "/hit/A1/events", Some(batch.clone())).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(ack["high_water_mark"], 3);
    let (_, ack) = call(&app, "POST", "/hit/A1/events", Some(batch)).await;
    assert_eq!((ack["accepted"].as_u64(), ack["high_water_mark"].as_u64()), (Some(0), Some(3)));

    let (st, err) = call(&app, "GET", "/hit/A1/code", None).await;
    assert_eq!(st, StatusCode::CONFLICT);
    assert_eq!(err["error"], "NoSubmittedPages");

    let (st, sub) = call(&app, "POST", "/hit/A1/page/2/submit", Some(json!({"t": 100}))).await;
    assert_eq!(st, StatusCode::OK);
    let records = sub["records"].as_array().unwrap();
    assert_eq!(records.len(), 48);
    let picked: Vec<&Value> = records.iter().filter(|r| r["selected"] == true).collect();
    assert_eq!(picked.len(), 1);
    assert_eq!(picked[0]["selectedRecord"][0]["t"], 30);

    let (st, err) = call(&app, "POST", "/hit/A1/page/2/submit", Some(json!({"t": 200}))).await;
    assert_eq!(st, StatusCode::CONFLICT);
    assert_eq!(err["error"], "PageAlreadySubmitted");

    let late = json!({"worker_id": "W9", "events": [{"page_idx": 2, "t": 300, "type": "click", "slot": 1, "x": 0.1, "y": 0.1}]});
    let (st, err) = call(&app, "POST", "/hit/A1/events", Some(late)).await;
    assert_eq!(st, StatusCode::CONFLICT);
    assert_eq!(err["error"], "ClosedAssignment");

    let (st, code) = call(&app, "GET", "/hit/A1/code", None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(code["code"].as_str().unwrap().len(), 32);
}

#[tokio::test]
async fn error_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let store = store(dir.path(), false);
    store.register(tagging("T")).unwrap();
    let app = router(Arc::new(store));

    let (st, err) = call(&app, "GET", "/hit/missing/page/0", None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    assert_eq!(err["error"], "UnknownAssignment");

    let (st, _) = call(&app, "GET", "/hit/T00000/page/20", None).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);

    let (st, page) = call(&app, "GET", "/hit/T00000/page/0", None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(page["interface"], "tagging");

    let back = json!({"worker_id": "W", "events": [
        {"page_idx": 0, "t": 50, "type": "keyboard"},
        {"page_idx": 0, "t": 40, "type": "keyboard"}
    ]});
    let (st, err) = call(&app, "POST", "/hit/T00000/events", Some(back)).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["error"], "NonMonotoneTimestamp");

    let (st, _) = call(&app, "POST", "/hit/T00000/events", Some(json!({"events": "nope"}))).await;
    assert!(st.is_client_error());
}
