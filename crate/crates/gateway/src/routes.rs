use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use hal_core::kb::{iterative_search, DocInput, SearchConfig, SearchPurpose};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::{ApiError, CreateSession, Gateway};

type Shared = State<Arc<Gateway>>;
type Reply = Result<Json<Value>, ApiError>;

pub fn router(gateway: Arc<Gateway>) -> Router {
    Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}/input", post(post_input))
        .route("/api/sessions/{id}/events", get(get_events))
        .route("/api/sessions/{id}/state", get(get_state))
        .route("/api/sessions/{id}/steps/{n}/approve", post(approve))
        .route("/api/kb/docs", get(list_docs).post(add_doc))
        .route("/api/kb/search", post(search))
        .route("/api/datasets", get(dataset))
        .with_state(gateway)
}

fn body<T: for<'de> Deserialize<'de>>(raw: &str) -> Result<T, ApiError> {
    serde_json::from_str(raw).map_err(|e| ApiError::bad_request(format!("invalid body: {e}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(e.to_string()))
}

async fn create_session(State(gw): Shared, raw: String) -> Result<(StatusCode, Json<Value>), ApiError> {
    let req: CreateSession = body(&raw)?;
    let handle = blocking(move || gw.create_session(req)).await??;
    Ok((StatusCode::CREATED, Json(json!({"id": handle.id, "mode": handle.mode}))))
}

#[derive(Deserialize)]
struct InputBody {
    text: String,
}

async fn post_input(State(gw): Shared, Path(id): Path<String>, raw: String) -> Result<(StatusCode, Json<Value>), ApiError> {
    let session = gw.session(&id)?;
    let InputBody { text } = body(&raw)?;
    if text.trim().is_empty() {
        return Err(ApiError::bad_request("text must not be empty"));
    }
    session.post_input(text);
    Ok((StatusCode::ACCEPTED, Json(json!({"accepted": true}))))
}

#[derive(Deserialize)]
struct EventsQuery {
    #[serde(default)]
    since: u64,
    #[serde(default)]
    timeout_ms: u64,
}

async fn get_events(State(gw): Shared, Path(id): Path<String>, Query(q): Query<EventsQuery>) -> Reply {
    let session = gw.session(&id)?;
    let timeout = Duration::from_millis(q.timeout_ms).min(gw.config.max_poll);
    let events = if timeout.is_zero() {
        session.events.since(q.since)
    } else {
        let log = Arc::clone(&session.events);
        blocking(move || log.wait_since(q.since, timeout)).await?
    };
    let last_seq = events.last().map_or(q.since, |e| e.seq);
    Ok(Json(json!({"events": events, "last_seq": last_seq})))
}

async fn get_state(State(gw): Shared, Path(id): Path<String>) -> Reply {
    let snapshot = gw.session(&id)?.snapshot();
    Ok(Json(serde_json::to_value(snapshot).map_err(|e| ApiError::internal(e.to_string()))?))
}

async fn approve(State(gw): Shared, Path((id, n)): Path<(String, usize)>) -> Reply {
    let session = gw.session(&id)?;
    let record = blocking(move || session.approve(n)).await??;
    Ok(Json(serde_json::to_value(record).map_err(|e| ApiError::internal(e.to_string()))?))
}

async fn list_docs(State(gw): Shared) -> Reply {
    let docs: Vec<Value> = gw
        .config
        .kb
        .list()
        .into_iter()
        .map(|d| json!({"id": d.id, "title": d.title, "kind": d.kind, "body": d.body, "refs": d.refs}))
        .collect();
    Ok(Json(json!({"documents": docs})))
}

async fn add_doc(State(gw): Shared, raw: String) -> Result<(StatusCode, Json<Value>), ApiError> {
    let input: DocInput = body(&raw)?;
    let id = blocking(move || gw.config.kb.add(input)).await?.map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok((StatusCode::CREATED, Json(json!({"id": id}))))
}

#[derive(Deserialize)]
struct SearchBody {
    task: String,
    #[serde(default)]
    model: Option<String>,
}

async fn search(State(gw): Shared, raw: String) -> Reply {
    let SearchBody { task, model } = body(&raw)?;
    blocking(move || {
        let cfg = SearchConfig::default();
        match model.or_else(|| gw.config.default_model.clone()) {
            Some(reference) => {
                let model = gw.models.resolve(&reference).map_err(|e| ApiError::bad_request(e.to_string()))?;
                let out = iterative_search(&gw.config.kb, &task, model.as_ref(), SearchPurpose::Plan, cfg)
                    .map_err(|e| ApiError::internal(e.to_string()))?;
                let docs: Vec<Value> = out.documents.iter().map(|d| json!({"id": d.id, "title": d.title})).collect();
                Ok(Json(json!({
                    "documents": docs,
                    "queries": out.state.queries_done,
                    "iterations": out.state.iteration,
                })))
            }
            None => {
                let hits = gw.config.kb.search_text(&task, cfg.k).map_err(|e| ApiError::internal(e.to_string()))?;
                let docs: Vec<Value> = hits
                    .into_iter()
                    .filter(|(_, score)| *score > 0.0)
                    .map(|(id, score)| json!({"id": id, "score": score}))
                    .collect();
                Ok(Json(json!({"documents": docs, "queries": [task], "iterations": 0})))
            }
        }
    })
    .await?
}

#[derive(Deserialize)]
struct DatasetQuery {
    path: String,
}

async fn dataset(State(gw): Shared, Query(q): Query<DatasetQuery>) -> Reply {
    let ds = blocking(move || gw.storage().load(&q.path)).await??;
    Ok(Json(serde_json::to_value(ds).map_err(|e| ApiError::internal(e.to_string()))?))
}
