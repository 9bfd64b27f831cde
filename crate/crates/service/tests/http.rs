use std::collections::BTreeMap;
use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use gag_core::distribution::replay_distributed;
use gag_core::engine::{canonical_text, run_script, ScriptStep};
use gag_core::textio::{fixtures, parse_trace};
use gag_service::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const FLATTEN_SPLIT: &str = "partition outer = {root, toor}; partition tree = {bin};";

fn app() -> Router {
    router(AppState::new())
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header(header::CONTENT_TYPE, "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, Method::GET, uri, None).await
}

async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    call(app, Method::POST, uri, Some(body)).await
}

async fn create(app: &Router, body: Value) -> String {
    let (status, v) = post(app, "/sessions", body).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["id"].as_str().unwrap().to_string()
}

async fn seq(app: &Router, id: &str) -> u64 {
    get(app, &format!("/sessions/{id}")).await.1["seq"].as_u64().unwrap()
}

fn central_canonical(name: &str, script: &[ScriptStep]) -> String {
    let g = fixtures::by_name(name).unwrap();
    canonical_text(&run_script(&g, &fixtures::default_case(name).unwrap(), script).unwrap().0)
}

/// Location hosting the open node called `name`.
async fn host_of(app: &Router, id: &str, name: &str) -> String {
    let (_, locs) = get(app, &format!("/sessions/{id}/locations")).await;
    for l in locs.as_array().unwrap() {
        let l = l["name"].as_str().unwrap();
        let (_, cfg) = get(app, &format!("/sessions/{id}/locations/{l}/config")).await;
        let hosted = cfg["nodes"]
            .as_array()
            .unwrap()
            .iter()
            .any(|n| n["state"] == "open" && n["id"].as_str().unwrap().split('@').next() == Some(name));
        if hosted {
            return l.to_string();
        }
    }
    panic!("no location hosts open node {name}");
}

async fn deliver_all(app: &Router, id: &str) -> usize {
    let mut n = 0;
    loop {
        let (_, msgs) = get(app, &format!("/sessions/{id}/messages")).await;
        let Some(m) = msgs.as_array().unwrap().first() else { return n };
        let mid = m["id"].as_str().unwrap();
        let (status, v) = post(app, &format!("/sessions/{id}/messages/{mid}/deliver"), json!({})).await;
        assert_eq!(status, StatusCode::OK, "{v}");
        n += 1;
    }
}

/// Plays a central script over HTTP, locating each node first.
async fn play(app: &Router, id: &str, script: &[ScriptStep], manual: bool) {
    for step in script {
        let loc = host_of(app, id, &step.node.name).await;
        let bindings: BTreeMap<String, String> =
            step.bindings.iter().map(|(x, t)| (x.name.clone(), t.to_string())).collect();
        let body = json!({ "node": step.node.name, "production": step.production, "bindings": bindings });
        let (status, v) = post(app, &format!("/sessions/{id}/locations/{loc}/apply"), body).await;
        assert_eq!(status, StatusCode::OK, "{} at {}: {v}", step.production, step.node);
        if manual {
            deliver_all(app, id).await;
        }
    }
}

#[tokio::test]
async fn create_reports_violations() {
    let app = app();
    let id = create(&app, json!({ "fixture": "flatten", "partition": FLATTEN_SPLIT })).await;
    assert_eq!(id, "s1");
    let bad = "format 1\n\nsort A(inh=2, syn=1);\n\nprod P: A(x, x)<y>;\n\nservice S: A(Nil, Nil)<y>;\n";
    let (status, v) = post(&app, "/sessions", json!({ "grammar": bad })).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], "InvalidGrammar");
    assert!(!v["violations"].as_array().unwrap().is_empty(), "{v}");
    let (status, v) = post(&app, "/sessions", json!({ "grammar": "sort (" })).await;
    assert_eq!((status, v["code"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("ParseError")));
    let (status, v) =
        post(&app, "/sessions", json!({ "fixture": "flatten", "partition": "partition a = {root};" })).await;
    assert_eq!((status, v["code"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("BadPartition")), "{v}");
    let (_, list) = get(&app, "/sessions").await;
    assert_eq!(list.as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn root_step_reaches_the_first_flattening_configuration() {
    let app = app();
    let id = create(&app, json!({ "fixture": "flatten", "partition": FLATTEN_SPLIT })).await;
    let (_, enabled) = get(&app, &format!("/sessions/{id}/locations/outer/enabled")).await;
    assert_eq!(enabled[0]["production"], "Root");
    assert_eq!(enabled[0]["status"], "enabled");
    let (status, v) =
        post(&app, &format!("/sessions/{id}/locations/outer/apply"), json!({ "node": "X0", "production": "Root" }))
            .await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert!(!v["emitted"].as_array().unwrap().is_empty());
    let (status, m) = get(&app, &format!("/sessions/{id}/merged")).await;
    assert_eq!(status, StatusCode::OK);
    let gamma1 = &fixtures::flatten_gammas()[1];
    assert_eq!(m["canonical"], canonical_text(gamma1));
    assert!(m["config"].as_str().unwrap().contains("= bin(Nil)<"), "{m}");

    let (status, v) =
        post(&app, &format!("/sessions/{id}/locations/outer/apply"), json!({ "node": "X0", "production": "Root" }))
            .await;
    assert_eq!((status, v["code"].as_str()), (StatusCode::CONFLICT, Some("NodeClosed")), "{v}");
}

#[tokio::test]
async fn decision_binding_closes_the_decide_node() {
    let app = app();
    let id = create(&app, json!({ "fixture": "editorial" })).await;
    let (status, v) = post(
        &app,
        &format!("/sessions/{id}/locations/editor/apply"),
        json!({ "node": "X0", "production": "DecideSubmission" }),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{v}");
    let decide = v["created"][2].as_str().unwrap().to_string();
    let (status, v) = post(
        &app,
        &format!("/sessions/{id}/locations/editor/apply"),
        json!({ "node": decide, "production": "MakeDecision", "bindings": { "decision": "Accept()" } }),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{v}");
    let (_, cfg) = get(&app, &format!("/sessions/{id}/locations/editor/config")).await;
    let node = cfg["nodes"].as_array().unwrap().iter().find(|n| n["id"] == decide.as_str()).unwrap();
    assert_eq!(node["state"], "closed");
    assert_eq!(node["production"], "MakeDecision");
    let root = cfg["nodes"].as_array().unwrap().iter().find(|n| n["root"] == true).unwrap();
    assert_eq!(root["state"], "closed");

    for (reviewer, code) in [("r1(", "ParseError"), ("someone", "BadBinding")] {
        let (status, v) = post(
            &app,
            &format!("/sessions/{id}/locations/editor/apply"),
            json!({ "node": "X0_1", "production": "AskReview", "bindings": { "reviewer": reviewer } }),
        )
        .await;
        assert_eq!((status, v["code"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some(code)), "{v}");
    }
}

#[tokio::test]
async fn delivery_is_idempotent() {
    let app = app();
    let id = create(&app, json!({ "fixture": "flatten", "partition": FLATTEN_SPLIT })).await;
    let (_, v) =
        post(&app, &format!("/sessions/{id}/locations/outer/apply"), json!({ "node": "X0", "production": "Root" }))
            .await;
    let mid = v["emitted"][0]["id"].as_str().unwrap().to_string();
    let uri = format!("/sessions/{id}/messages/{mid}/deliver");
    let (status, first) = post(&app, &uri, json!({})).await;
    assert_eq!(status, StatusCode::OK, "{first}");
    assert_eq!(first["repeated"], false);
    let before = seq(&app, &id).await;
    let (status, again) = post(&app, &uri, json!({})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(again["repeated"], true);
    assert_eq!(again["emitted"], first["emitted"]);
    assert_eq!(seq(&app, &id).await, before);
    // No body at all is accepted too.
    let (status, _) = call(&app, Method::POST, &uri, None).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn unknown_ids_are_not_found() {
    let app = app();
    let id = create(&app, json!({ "fixture": "flatten" })).await;
    for uri in ["/sessions/s99/merged".to_string(), format!("/sessions/{id}/locations/nowhere/config")] {
        let (status, v) = get(&app, &uri).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
        assert!(v["code"].is_string());
    }
    let (status, v) = post(&app, &format!("/sessions/{id}/messages/m9_00/deliver"), json!({})).await;
    assert_eq!((status, v["code"].as_str()), (StatusCode::NOT_FOUND, Some("UnknownMessage")));
    let (status, v) =
        post(&app, &format!("/sessions/{id}/locations/local/apply"), json!({ "node": "X7", "production": "Root" }))
            .await;
    assert_eq!((status, v["code"].as_str()), (StatusCode::NOT_FOUND, Some("UnknownNode")), "{v}");
}

#[tokio::test]
async fn stale_and_racing_mutations_conflict() {
    let app = app();
    let id = create(&app, json!({ "fixture": "flatten", "partition": FLATTEN_SPLIT })).await;
    let s = seq(&app, &id).await;
    let uri = format!("/sessions/{id}/locations/outer/apply");
    let (status, v) = post(&app, &uri, json!({ "node": "X0", "production": "Root", "expect_seq": s + 5 })).await;
    assert_eq!((status, v["code"].as_str()), (StatusCode::CONFLICT, Some("Stale")));

    let racers: Vec<_> = (0..8)
        .map(|_| {
            let (app, uri) = (app.clone(), uri.clone());
            tokio::spawn(async move {
                post(&app, &uri, json!({ "node": "X0", "production": "Root", "expect_seq": s })).await
            })
        })
        .collect();
    let mut codes = Vec::new();
    for r in racers {
        codes.push(r.await.unwrap().0);
    }
    assert_eq!(codes.iter().filter(|c| **c == StatusCode::OK).count(), 1);
    assert_eq!(codes.iter().filter(|c| **c == StatusCode::CONFLICT).count(), 7);
    let (_, trace) = get(&app, &format!("/sessions/{id}/trace")).await;
    assert_eq!(trace["trace"]["events"].as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn auto_mode_drains_after_each_step() {
    let app = app();
    let id = create(&app, json!({ "fixture": "coroutines", "mode": "auto" })).await;
    play(&app, &id, &fixtures::coroutine_script(), false).await;
    let (_, msgs) = get(&app, &format!("/sessions/{id}/messages")).await;
    assert!(msgs.as_array().unwrap().is_empty());
    let (_, m) = get(&app, &format!("/sessions/{id}/merged")).await;
    assert_eq!(m["quiescent"], true);
    assert_eq!(m["progress"], "closed");
    assert_eq!(m["canonical"], central_canonical("coroutines", &fixtures::coroutine_script()));
}

#[tokio::test]
async fn scripted_session_merges_to_the_central_run_and_replays() {
    let app = app();
    let id = create(&app, json!({ "fixture": "editorial" })).await;
    let script = fixtures::editorial_script();
    play(&app, &id, &script, true).await;
    let (_, m) = get(&app, &format!("/sessions/{id}/merged")).await;
    assert_eq!(m["in_flight"], 0);
    assert_eq!(m["progress"], "closed");
    assert_eq!(m["canonical"], central_canonical("editorial", &script));

    let (_, t) = get(&app, &format!("/sessions/{id}/trace")).await;
    let g = fixtures::editorial();
    let trace = parse_trace(&g, t["text"].as_str().unwrap()).unwrap();
    let st = replay_distributed(&g, &trace).unwrap();
    assert_eq!(Value::from(canonical_text(&st.merge().unwrap())), m["canonical"]);
}

#[tokio::test]
async fn snapshot_restores_by_replay() {
    let app = app();
    let id = create(&app, json!({ "fixture": "editorial" })).await;
    play(&app, &id, &fixtures::editorial_script()[..5], true).await;
    // Leave one message in flight so the snapshot is mid-conversation.
    post(
        &app,
        &format!("/sessions/{id}/locations/editor/apply"),
        json!({ "node": "X0_3", "production": "MakeDecision", "bindings": { "decision": "Reject" } }),
    )
    .await;
    let (status, snap) = get(&app, &format!("/sessions/{id}/snapshot")).await;
    assert_eq!(status, StatusCode::OK);
    let (status, v) = post(&app, "/sessions/restore", snap.clone()).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    let copy = v["id"].as_str().unwrap();
    assert_ne!(copy, id);
    for suffix in ["merged", "messages", "trace", "locations", "locations/editor/config", "locations/reviewer/enabled"]
    {
        assert_eq!(
            get(&app, &format!("/sessions/{id}/{suffix}")).await.1,
            get(&app, &format!("/sessions/{copy}/{suffix}")).await.1,
            "{suffix}"
        );
    }
    assert_eq!(seq(&app, &id).await, seq(&app, copy).await);

    let mut broken = snap;
    broken["trace"] = Value::from(broken["trace"].as_str().unwrap().replace("MakeDecision", "CaseNo"));
    let (status, _) = post(&app, "/sessions/restore", broken).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn long_poll_wakes_on_the_next_mutation() {
    let app = app();
    let id = create(&app, json!({ "fixture": "flatten", "partition": FLATTEN_SPLIT })).await;
    let s = seq(&app, &id).await;
    let (_, now) = get(&app, &format!("/sessions/{id}/events?after=0")).await;
    assert_eq!(now["events"][0]["kind"], "created");
    assert_eq!(now["last_seq"], s);

    let waiter = {
        let (app, uri) = (app.clone(), format!("/sessions/{id}/events?after={s}&timeout_ms=10000"));
        tokio::spawn(async move { get(&app, &uri).await })
    };
    tokio::time::sleep(Duration::from_millis(50)).await;
    post(&app, &format!("/sessions/{id}/locations/outer/apply"), json!({ "node": "X0", "production": "Root" })).await;
    let (status, v) = tokio::time::timeout(Duration::from_secs(5), waiter).await.unwrap().unwrap();
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["events"][0]["seq"], s + 1);
    assert_eq!(v["events"][0]["kind"], "applied");
    assert_eq!(v["events"][0]["production"], "Root");
}

#[tokio::test]
async fn event_stream_pushes_ordered_notifications() {
    let app = app();
    let id = create(&app, json!({ "fixture": "flatten", "partition": FLATTEN_SPLIT })).await;
    let req = Request::get(format!("/sessions/{id}/events"))
        .header(header::ACCEPT, "text/event-stream")
        .body(Body::empty())
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let mut body = resp.into_body();
    post(&app, &format!("/sessions/{id}/locations/outer/apply"), json!({ "node": "X0", "production": "Root" })).await;
    deliver_all(&app, &id).await;
    let last = seq(&app, &id).await;

    let mut text = String::new();
    let mut seen = Vec::new();
    while seen.last() != Some(&last) {
        let frame = tokio::time::timeout(Duration::from_secs(5), body.frame()).await.unwrap().unwrap().unwrap();
        let Ok(data) = frame.into_data() else { continue };
        text.push_str(std::str::from_utf8(&data).unwrap());
        seen = text
            .lines()
            .filter_map(|l| l.strip_prefix("data: "))
            .map(|d| serde_json::from_str::<Value>(d).unwrap()["seq"].as_u64().unwrap())
            .collect();
    }
    assert_eq!(seen, (1..=last).collect::<Vec<_>>());
}
