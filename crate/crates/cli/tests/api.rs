use std::collections::BTreeSet;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use eicharvest::corpus::{CorpusIndex, Document, EntityMention};
use eicharvest::sim::{generate_workload, simulated_judge, synth_corpus, SynthParams, WorkloadCriteria};
use eicharvest::{Session, SessionOptions};
use eicharvest_cli::api::{router, ApiConfig, AppState, BusyPolicy, CreateResponse, DocumentPayload, StateResponse};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn doc(id: &str, text: &str, kps: &[&str]) -> Document {
    let mention = EntityMention {
        entity_id: "Jericho_(wrestler)".into(),
        mention: "Jericho".into(),
        offset: 0,
    };
    Document::new(
        id,
        text,
        Some(kps.iter().map(|k| (k.to_string(), 1)).collect()),
        vec![mention],
    )
    .unwrap()
}

fn jericho() -> Arc<CorpusIndex> {
    Arc::new(
        CorpusIndex::build(vec![
            doc("w1", "Jericho feuded with Edge over pro wrestling gold", &["edge", "pro wrestling", "gold"]),
            doc("w2", "Jericho and The Rock headlined a pro wrestling event", &["the rock", "pro wrestling"]),
            doc("w3", "Jericho wrote a memoir about Fozzy", &["memoir", "fozzy"]),
            doc("b1", "Jericho the band released an album on vinyl", &["album", "vinyl"]),
        ])
        .unwrap(),
    )
}

fn app_with(index: Arc<CorpusIndex>, config: ApiConfig) -> (Router, Arc<AppState>) {
    let state = AppState::new(index, config);
    (router(Arc::clone(&state)), state)
}

fn jericho_app() -> (Router, Arc<AppState>) {
    app_with(jericho(), ApiConfig::new("jericho"))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Option<Value>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let json = if bytes.is_empty() {
        None
    } else {
        Some(serde_json::from_slice(&bytes).unwrap())
    };
    (status, json)
}

async fn create(app: &Router, body: Value) -> CreateResponse {
    let (status, json) = call(app, Method::POST, "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{json:?}");
    serde_json::from_value(json.unwrap()).unwrap()
}

async fn state_of(app: &Router, id: &str) -> StateResponse {
    let (status, json) = call(app, Method::GET, &format!("/sessions/{id}/state"), None).await;
    assert_eq!(status, StatusCode::OK);
    serde_json::from_value(json.unwrap()).unwrap()
}

#[tokio::test]
async fn create_judge_and_inspect_state() {
    let (app, _) = jericho_app();
    let created = create(
        &app,
        json!({"names": ["Jericho"], "seed_keyphrases": ["pro wrestling"], "strategy": "Lm", "corpus": "jericho"}),
    )
    .await;
    assert_eq!(created.v, 1);
    let d = created.document.unwrap();
    assert_eq!(d.v, 1);
    assert!(!d.snippets.is_empty());
    assert!(d.snippets.iter().all(|s| s.mention == "Jericho"));
    let new_kp = d.keyphrases.iter().find(|k| *k != "pro wrestling").unwrap().clone();

    let (status, next) = call(
        &app,
        Method::POST,
        &format!("/sessions/{}/judgment", created.session_id),
        Some(json!({"doc_id": d.doc_id, "relevant": true, "accepted_keyphrases": [new_kp, new_kp]})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let next: DocumentPayload = serde_json::from_value(next.unwrap()).unwrap();
    assert_ne!(next.doc_id, d.doc_id);

    let st = state_of(&app, &created.session_id).await;
    assert_eq!(st.accepted.len(), 2);
    assert!(st.accepted.contains_key(&new_kp));
    assert_eq!(st.judged, 1);
    assert_eq!(st.consequential, vec![true]);
    assert_eq!(st.rejected_count, st.rejected.len());
    assert_eq!(st.current.as_deref(), Some(next.doc_id.as_str()));

    let (status, cur) = call(&app, Method::GET, &format!("/sessions/{}/current", created.session_id), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(serde_json::from_value::<DocumentPayload>(cur.unwrap()).unwrap(), next);
}

#[tokio::test]
async fn keyphrases_outside_the_document_are_rejected() {
    let (app, _) = jericho_app();
    let created = create(&app, json!({"names": ["Jericho"], "strategy": "Lm"})).await;
    let d = created.document.unwrap();
    let (status, body) = call(
        &app,
        Method::POST,
        &format!("/sessions/{}/judgment", created.session_id),
        Some(json!({"doc_id": d.doc_id, "relevant": true, "accepted_keyphrases": ["nonsense"]})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body.unwrap()["v"], 1);
    let st = state_of(&app, &created.session_id).await;
    assert_eq!(st.judged, 0);
    assert_eq!(st.current.as_deref(), Some(d.doc_id.as_str()));
}

#[tokio::test]
async fn finishing_right_away_returns_the_seeds() {
    let (app, _) = jericho_app();
    let created = create(&app, json!({"names": ["Jericho"], "seed_keyphrases": ["edge", "fozzy"]})).await;
    assert_eq!(created.strategy, "I(Lm,Div_Ent-Feedback)");
    let (status, rep) = call(&app, Method::POST, &format!("/sessions/{}/finish", created.session_id), None).await;
    assert_eq!(status, StatusCode::OK);
    let rep = rep.unwrap();
    assert_eq!(rep["v"], 1);
    assert_eq!(rep["keyphrases"], json!({"edge": 0.5, "fozzy": 0.5}));
    assert_eq!(rep["names"], json!(["jericho"]));
}

#[tokio::test]
async fn request_errors_map_to_status_codes() {
    let (app, _) = jericho_app();
    for body in [
        json!({"names": ["Jericho"], "strategy": "Bogus"}),
        json!({"names": ["Jericho"], "strategy": "Ideal"}),
        json!({"names": [], "strategy": "Lm"}),
        json!({"names": ["Jericho"], "corpus": "other"}),
        json!({"seed_keyphrases": ["edge"]}),
    ] {
        let (status, err) = call(&app, Method::POST, "/sessions", Some(body.clone())).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
        assert!(err.unwrap()["error"].is_string());
    }
    for uri in ["/sessions/nope/state", "/sessions/nope/current"] {
        assert_eq!(call(&app, Method::GET, uri, None).await.0, StatusCode::NOT_FOUND);
    }
    let judge = json!({"doc_id": "w1", "relevant": false});
    assert_eq!(
        call(&app, Method::POST, "/sessions/nope/judgment", Some(judge)).await.0,
        StatusCode::NOT_FOUND
    );

    let created = create(&app, json!({"names": ["Jericho"], "strategy": "Lm"})).await;
    let d = created.document.unwrap();
    let other = ["w1", "w2"].into_iter().find(|x| *x != d.doc_id).unwrap();
    let uri = format!("/sessions/{}/judgment", created.session_id);
    let out_of_order = json!({"doc_id": other, "relevant": false});
    assert_eq!(call(&app, Method::POST, &uri, Some(out_of_order)).await.0, StatusCode::CONFLICT);
    let malformed = json!({"relevant": "yes"});
    assert_eq!(call(&app, Method::POST, &uri, Some(malformed)).await.0, StatusCode::UNPROCESSABLE_ENTITY);

    let finish = format!("/sessions/{}/finish", created.session_id);
    assert_eq!(call(&app, Method::POST, &finish, None).await.0, StatusCode::OK);
    let late = json!({"doc_id": d.doc_id, "relevant": false});
    assert_eq!(call(&app, Method::POST, &uri, Some(late)).await.0, StatusCode::CONFLICT);
    assert!(state_of(&app, &created.session_id).await.finished);
}

#[tokio::test]
async fn exhaustion_answers_no_content() {
    let (app, _) = jericho_app();
    let created = create(&app, json!({"names": ["vinyl"], "strategy": "Div_Kp"})).await;
    let d = created.document.unwrap();
    assert_eq!(d.doc_id, "b1");
    // snippets come from name matches in the text, not from entity annotations
    assert_eq!(d.snippets.len(), 1);
    let (status, body) = call(
        &app,
        Method::POST,
        &format!("/sessions/{}/judgment", created.session_id),
        Some(json!({"doc_id": "b1", "relevant": false})),
    )
    .await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    assert!(body.is_none());
    let (status, _) = call(&app, Method::GET, &format!("/sessions/{}/current", created.session_id), None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    assert!(state_of(&app, &created.session_id).await.exhausted);

    let nothing = create(&app, json!({"names": ["nobody"], "strategy": "Lm"})).await;
    assert!(nothing.document.is_none());
}

#[tokio::test]
async fn cors_preflight_is_answered() {
    let (app, _) = jericho_app();
    let req = Request::builder()
        .method(Method::OPTIONS)
        .uri("/sessions")
        .header("origin", "http://localhost:5173")
        .header("access-control-request-method", "POST")
        .body(Body::empty())
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert!(resp.status().is_success());
    assert_eq!(resp.headers()["access-control-allow-origin"], "*");

    let mut config = ApiConfig::new("jericho");
    config.cors_origins = vec!["http://ui.example".into()];
    let (app, _) = app_with(jericho(), config);
    let req = Request::builder()
        .uri("/health")
        .header("origin", "http://ui.example")
        .body(Body::empty())
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert_eq!(resp.headers()["access-control-allow-origin"], "http://ui.example");
}

#[tokio::test]
async fn busy_sessions_queue_or_conflict_by_policy() {
    let mut config = ApiConfig::new("jericho");
    config.busy = BusyPolicy::Reject;
    let (app, state) = app_with(jericho(), config);
    let created = create(&app, json!({"names": ["Jericho"], "strategy": "Lm"})).await;
    let uri = format!("/sessions/{}/state", created.session_id);
    let handle = state.handle(&created.session_id).unwrap();
    {
        let _busy = handle.lock().await;
        assert_eq!(call(&app, Method::GET, &uri, None).await.0, StatusCode::CONFLICT);
    }
    assert_eq!(call(&app, Method::GET, &uri, None).await.0, StatusCode::OK);

    let (app, state) = jericho_app();
    let created = create(&app, json!({"names": ["Jericho"], "strategy": "Lm"})).await;
    let uri = format!("/sessions/{}/state", created.session_id);
    let handle = state.handle(&created.session_id).unwrap();
    let guard = handle.lock().await;
    let waiting = tokio::spawn({
        let app = app.clone();
        async move { call(&app, Method::GET, &uri, None).await.0 }
    });
    tokio::task::yield_now().await;
    assert!(!waiting.is_finished());
    drop(guard);
    assert_eq!(waiting.await.unwrap(), StatusCode::OK);
}

#[tokio::test]
async fn finished_sessions_are_snapshotted() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ApiConfig::new("jericho");
    config.snapshot_dir = Some(dir.path().join("snaps"));
    let (app, _) = app_with(jericho(), config);
    let created = create(&app, json!({"names": ["Jericho"], "seed_keyphrases": ["edge"], "strategy": "Lm"})).await;
    call(&app, Method::POST, &format!("/sessions/{}/finish", created.session_id), None).await;
    let raw = std::fs::read_to_string(dir.path().join("snaps").join(format!("{}.json", created.session_id))).unwrap();
    let snap: Value = serde_json::from_str(&raw).unwrap();
    assert_eq!(snap["v"], 1);
    assert_eq!(snap["representation"]["keyphrases"]["edge"], 1.0);
    assert_eq!(snap["strategy"], "Lm");
}

/// One recorded exchange: the document served and the judgment sent back.
#[derive(Debug, Clone)]
struct Step {
    doc_id: String,
    relevant: bool,
    accepted: Vec<String>,
}

/// Drives a session through the API with the simulated user.
async fn drive(
    app: &Router,
    index: &CorpusIndex,
    entry: &eicharvest::sim::WorkloadEntry,
    strategy: &str,
    steps: usize,
) -> (String, Vec<Step>) {
    let truth = entry.truth();
    let created = create(
        app,
        json!({"names": entry.names, "seed_keyphrases": entry.seed_keyphrases, "strategy": strategy}),
    )
    .await;
    let mut transcript = Vec::new();
    let mut doc = created.document;
    while let Some(d) = doc.take() {
        if transcript.len() == steps {
            break;
        }
        let (relevant, accepted) = simulated_judge(index.get(&d.doc_id).unwrap(), &truth);
        let accepted: Vec<String> = accepted.into_iter().collect();
        assert!(accepted.iter().all(|k| d.keyphrases.contains(k)));
        let (status, next) = call(
            app,
            Method::POST,
            &format!("/sessions/{}/judgment", created.session_id),
            Some(json!({"doc_id": d.doc_id, "relevant": relevant, "accepted_keyphrases": accepted})),
        )
        .await;
        assert!(status == StatusCode::OK || status == StatusCode::NO_CONTENT, "{status}");
        transcript.push(Step {
            doc_id: d.doc_id,
            relevant,
            accepted,
        });
        doc = next.map(|v| serde_json::from_value(v).unwrap());
    }
    (created.session_id, transcript)
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn parallel_sessions_match_in_process_replays() {
    let synth = synth_corpus(SynthParams {
        seed: 11,
        n_entities: 6,
        docs_per_entity: 15,
        kps_per_entity: 30,
        confusable_pairs: 3,
    })
    .unwrap();
    let index = Arc::new(synth.index().unwrap());
    let criteria = WorkloadCriteria {
        min_keyphrases: 10,
        ..WorkloadCriteria::default()
    };
    let workload = generate_workload(&index, &synth.catalog, &criteria);
    assert!(workload.len() >= 3);
    let (app, state) = app_with(Arc::clone(&index), ApiConfig::new("synth"));

    let strategies = ["Lm", "Div_Kp-Feedback", "I(Lm,Div_Ent-Feedback)", "I(Lm,Lm-Feedback)"];
    let mut tasks = Vec::new();
    for entry in &workload {
        for strategy in strategies {
            let (app, index, entry) = (app.clone(), Arc::clone(&index), entry.clone());
            tasks.push(tokio::spawn(async move {
                let (id, transcript) = drive(&app, &index, &entry, strategy, 12).await;
                (id, entry, strategy, transcript)
            }));
        }
    }
    let mut ids = BTreeSet::new();
    for task in tasks {
        let (id, entry, strategy, transcript) = task.await.unwrap();
        assert!(ids.insert(id.clone()));
        let api_state = state_of(&app, &id).await;

        let mut local = Session::start(
            Arc::clone(&index),
            &entry.names,
            &entry.seed_keyphrases,
            strategy.parse().unwrap(),
            SessionOptions::default(),
            None,
        )
        .unwrap();
        for step in &transcript {
            assert_eq!(local.next_document().unwrap().as_deref(), Some(step.doc_id.as_str()));
            local.apply_judgment(&step.doc_id, step.relevant, &step.accepted).unwrap();
        }
        let st = local.state();
        assert_eq!(api_state.accepted, st.accepted);
        assert_eq!(api_state.rejected, st.rejected.iter().cloned().collect::<Vec<_>>());
        let flags: Vec<bool> = st.judgments.iter().map(|j| j.consequential).collect();
        assert_eq!(api_state.consequential, flags);

        let handle = state.handle(&id).unwrap();
        let remote = handle.lock().await;
        assert_eq!(remote.session.state().judgments, st.judgments);
    }
    assert_eq!(state.session_count(), workload.len() * strategies.len());
}
