use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use meaning_cli::api::{router, AppState};
use meaning_cli::{repl, Engine};

fn app() -> Router {
    router(AppState::new(Engine::seed().unwrap()))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn create(app: &Router) -> u64 {
    let (status, v) = call(app, Method::POST, "/sessions", None).await;
    assert_eq!(status, StatusCode::OK);
    v["id"].as_u64().unwrap()
}

async fn say(app: &Router, id: u64, phrase: &str) -> Value {
    let (status, v) =
        call(app, Method::POST, &format!("/sessions/{id}/phrases"), Some(json!({ "phrase": phrase }))).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    v
}

#[tokio::test]
async fn drive_fast_carries_an_effector_command() {
    let app = app();
    let id = create(&app).await;
    let v = say(&app, id, "drive fast").await;
    assert_eq!(v["action"], "accepted");
    assert_eq!(v["effector"]["axis"], "quickness");
    let value = v["effector"]["value"].as_f64().unwrap();
    assert!((0.75..=1.0).contains(&value), "{value}");
    assert_eq!(v["effector_outcome"]["outcome"], "command");
    assert_eq!(v["score"], 1.0);
}

#[tokio::test]
async fn clarifications_list_the_candidates() {
    let app = app();
    let id = create(&app).await;
    let v = say(&app, id, "slow or fast").await;
    assert_eq!(v["action"], "clarification_requested");
    assert!(v["clarification"].as_str().unwrap().contains("vacuous"), "{v}");
    assert!(v["structure"].is_null());
    assert!(!v["candidates"].as_array().unwrap().is_empty());
    let v = say(&app, id, "stand still faster").await;
    assert!(v["clarification"].as_str().unwrap().contains("no_change"), "{v}");
}

#[tokio::test]
async fn unknown_sessions_are_not_found() {
    let app = app();
    let (s, v) = call(&app, Method::POST, "/sessions/99/phrases", Some(json!({ "phrase": "walk" }))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert!(v["error"].as_str().unwrap().contains("99"));
    for uri in ["/sessions/99/trace", "/sessions/99/config", "/sessions/99/regions/quickness"] {
        assert_eq!(call(&app, Method::GET, uri, None).await.0, StatusCode::NOT_FOUND, "{uri}");
    }
    let id = create(&app).await;
    let (s, _) = call(&app, Method::GET, &format!("/sessions/{id}/regions/nowhere"), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn malformed_bodies_name_the_field() {
    let app = app();
    let id = create(&app).await;
    let (s, v) = call(&app, Method::POST, &format!("/sessions/{id}/phrases"), Some(json!({ "phrase": 3 }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["path"], "phrase");
    let (s, v) = call(&app, Method::PUT, &format!("/sessions/{id}/config"), Some(json!({ "threshold": "high" }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["path"], "threshold");
    let (s, v) =
        call(&app, Method::POST, "/sessions", Some(json!({ "config": { "comprehension": { "vacuity_limit": [] } } })))
            .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["path"], "config.comprehension.vacuity_limit");
    let (s, v) = call(&app, Method::PUT, &format!("/sessions/{id}/config"), Some(json!({ "threshold": 2.0 }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["error"].as_str().unwrap().contains("threshold"));
}

#[tokio::test]
async fn heatmaps_and_versions() {
    let app = app();
    let id = create(&app).await;
    let (s, v) = call(&app, Method::GET, &format!("/sessions/{id}/regions/quickness"), None).await;
    assert_eq!(s, StatusCode::OK);
    let values = v["heatmap"]["values"].as_array().unwrap();
    assert_eq!(values.len(), 64);
    assert!(values.iter().all(|x| (0.0..=1.0).contains(&x.as_f64().unwrap())));
    assert_eq!(v["heatmap"]["axes"], json!(["quickness"]));
    assert_eq!(v["known"], false);
    let v0 = v["version"].as_u64().unwrap();

    let v1 = say(&app, id, "car is heavy").await["version"].as_u64().unwrap();
    assert!(v1 > v0);
    let (_, v) = call(&app, Method::GET, &format!("/sessions/{id}/regions/car"), None).await;
    assert_eq!(v["known"], true);
    assert_eq!((v["heatmap"]["width"].as_u64(), v["heatmap"]["height"].as_u64()), (Some(64), Some(64)));
    assert_eq!(v["version"].as_u64(), Some(v1));

    let (_, cfg) = call(&app, Method::GET, &format!("/sessions/{id}/config"), None).await;
    assert_eq!(cfg["comprehension"]["threshold"], 0.5);
    let mut comprehension = cfg["comprehension"].clone();
    comprehension["threshold"] = json!(0.4);
    let (s, cfg) = call(&app, Method::PUT, &format!("/sessions/{id}/config"), Some(comprehension)).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(cfg["comprehension"]["threshold"], 0.4);
    assert!(cfg["version"].as_u64().unwrap() > v1);

    let (_, t) = call(&app, Method::GET, &format!("/sessions/{id}/trace"), None).await;
    let history = t["history"].as_array().unwrap();
    assert_eq!(history.len(), 1);
    assert_eq!(history[0]["phrase"], "car is heavy");
    assert_eq!(t["active"], "car");
}

#[tokio::test]
async fn api_and_repl_agree() {
    let phrases = ["walk very fast", "faster", "car is fast but heavy", "go ne", "slow and fast", "blorp"];
    let engine = Engine::seed().unwrap();
    let mut session = engine.session();
    let app = router(AppState::new(engine.clone()));
    let id = create(&app).await;
    for p in phrases {
        let from_repl = repl::step(&engine, &mut session, p).unwrap();
        let from_api = say(&app, id, p).await;
        assert_eq!(from_repl.lines().next().unwrap(), from_api["summary"].as_str().unwrap(), "{p}");
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn submissions_to_one_session_are_serialized() {
    let state = AppState::new(Engine::seed().unwrap());
    let app = router(Arc::clone(&state));
    let id = create(&app).await;
    let tasks: Vec<_> = (0..8)
        .map(|i| {
            let app = app.clone();
            tokio::spawn(async move { say(&app, id, if i % 2 == 0 { "walk fast" } else { "car is heavy" }).await })
        })
        .collect();
    let mut versions = Vec::new();
    for t in tasks {
        versions.push(t.await.unwrap()["version"].as_u64().unwrap());
    }
    versions.sort();
    versions.dedup();
    assert_eq!(versions.len(), 8);
    let (_, t) = call(&app, Method::GET, &format!("/sessions/{id}/trace"), None).await;
    assert_eq!(t["history"].as_array().unwrap().len(), 8);
    let other = create(&app).await;
    assert_ne!(other, id);
}
