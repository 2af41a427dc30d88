//! Query endpoints.
//!
//! | method | path              | response                                   |
//! |--------|-------------------|--------------------------------------------|
//! | GET    | `/health`         | `{seq, timestamp, nodes}`                  |
//! | GET    | `/nodes`          | node summaries of the latest frame         |
//! | GET    | `/nodes/{name}`   | full `NodeTelemetry`, 404 when unknown     |
//! | GET    | `/frames`         | frames with `from <= t <= to`, 400 if from > to |
//! | GET    | `/frames/at?t=`   | frame at or before `t`, 404 before history |
//! | GET    | `/scene[?at=]`    | full-scene packet, live or historical      |
//! | GET    | `/alerts`         | alerts of the latest frame                 |
//! | GET    | `/stats`          | naive/instanced table; `format=json|jsonl` |
//! | POST   | `/focus`          | `{nodes, query}` for a focus query         |
//! | GET    | `/live`           | WebSocket packet stream                    |

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use twin_core::batch::{plan_batches, scene_stats, BatchSummary};
use twin_core::history::{focus, FocusFields, FocusQuery};
use twin_core::ingest::evaluate_alerts;
use twin_core::pipeline::SceneChange;
use twin_core::{NodeKind, NodeState, NodeTelemetry};

use crate::live::live;
use crate::packet::FramePacket;
use crate::state::AppState;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/nodes", get(nodes))
        .route("/nodes/{name}", get(node_detail))
        .route("/frames", get(frames))
        .route("/frames/at", get(frame_at))
        .route("/scene", get(scene))
        .route("/alerts", get(alerts))
        .route("/stats", get(stats))
        .route("/focus", post(focus_nodes))
        .route("/live", get(live))
        .with_state(state)
}

pub struct ApiError(StatusCode, String);

impl ApiError {
    fn bad_request(msg: impl ToString) -> Self {
        ApiError(StatusCode::BAD_REQUEST, msg.to_string())
    }

    fn not_found(msg: impl ToString) -> Self {
        ApiError(StatusCode::NOT_FOUND, msg.to_string())
    }

    fn internal(msg: impl ToString) -> Self {
        ApiError(StatusCode::INTERNAL_SERVER_ERROR, msg.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn health(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    let live = state.live();
    Json(json!({
        "seq": live.seq,
        "timestamp": live.timestamp,
        "nodes": live.frame.nodes.len(),
        "history_frames": state.history.read().expect("history lock").len(),
    }))
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct NodeSummary {
    pub name: String,
    pub kind: NodeKind,
    pub state: NodeState,
    pub alerts: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub user: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub job_id: Option<String>,
}

impl From<&NodeTelemetry> for NodeSummary {
    fn from(n: &NodeTelemetry) -> Self {
        Self {
            name: n.node_name.clone(),
            kind: n.kind,
            state: n.state,
            alerts: n.alerts.clone(),
            user: n.user.clone(),
            job_id: n.job_id.clone(),
        }
    }
}

async fn nodes(State(state): State<Arc<AppState>>) -> Json<Vec<NodeSummary>> {
    Json(state.live().frame.nodes.values().map(NodeSummary::from).collect())
}

async fn node_detail(State(state): State<Arc<AppState>>, Path(name): Path<String>) -> ApiResult<Json<NodeTelemetry>> {
    state
        .live()
        .frame
        .nodes
        .get(&name)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format!("unknown node `{name}`")))
}

#[derive(Debug, Deserialize)]
struct RangeParams {
    from: Option<i64>,
    to: Option<i64>,
}

async fn frames(State(state): State<Arc<AppState>>, Query(p): Query<RangeParams>) -> ApiResult<Response> {
    let history = state.history.read().expect("history lock");
    let frames = history
        .range(p.from.unwrap_or(i64::MIN), p.to.unwrap_or(i64::MAX))
        .map_err(ApiError::bad_request)?;
    let body: Vec<_> = frames.iter().map(|f| &**f).collect();
    Ok(Json(body).into_response())
}

#[derive(Debug, Deserialize)]
struct AtParams {
    t: i64,
}

async fn frame_at(State(state): State<Arc<AppState>>, Query(p): Query<AtParams>) -> ApiResult<Response> {
    let frame = state
        .history
        .read()
        .expect("history lock")
        .at(p.t)
        .map_err(|e| e.to_api())?;
    Ok(Json(&*frame).into_response())
}

#[derive(Debug, Deserialize)]
struct SceneParams {
    at: Option<i64>,
}

async fn scene(State(state): State<Arc<AppState>>, Query(p): Query<SceneParams>) -> ApiResult<Response> {
    let Some(t) = p.at else {
        let packet = state
            .full_packet()
            .ok_or_else(|| ApiError(StatusCode::SERVICE_UNAVAILABLE, "no frame committed yet".into()))?;
        return Ok(([(header::CONTENT_TYPE, "application/json")], packet.json.clone()).into_response());
    };
    let frame = state.history.read().expect("history lock").at(t).map_err(|e| e.to_api())?;
    let st = state.clone();
    let packet = tokio::task::spawn_blocking(move || -> Result<FramePacket, String> {
        let scene = st.builder.build(&frame).map_err(|e| e.to_string())?;
        let batches = plan_batches(&scene.item_list()).map_err(|e| e.to_string())?;
        let stats = scene_stats(&batches, &st.meshes).map_err(|e| e.to_string())?;
        Ok(FramePacket {
            seq: 0,
            timestamp: frame.timestamp,
            change: SceneChange::Full {
                scene: Arc::new(scene),
                batches: batches.iter().map(BatchSummary::from).collect(),
            },
            alerts: evaluate_alerts(&frame, &st.rules),
            stats,
        })
    })
    .await
    .map_err(ApiError::internal)?
    .map_err(ApiError::internal)?;
    Ok(Json(packet).into_response())
}

async fn alerts(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    let live = state.live();
    Json(json!({ "timestamp": live.timestamp, "alerts": &*live.alerts }))
}

#[derive(Debug, Deserialize)]
struct StatsParams {
    format: Option<String>,
}

async fn stats(State(state): State<Arc<AppState>>, Query(p): Query<StatsParams>) -> ApiResult<Response> {
    let report = state
        .live()
        .report
        .ok_or_else(|| ApiError(StatusCode::SERVICE_UNAVAILABLE, "no frame committed yet".into()))?;
    Ok(match p.format.as_deref().unwrap_or("text") {
        "text" => ([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], report.to_table()).into_response(),
        "jsonl" => ([(header::CONTENT_TYPE, "application/x-ndjson")], report.to_json_lines()).into_response(),
        "json" => Json(json!({
            "naive": report.naive,
            "instanced": report.instanced,
            "table": report.to_table(),
        }))
        .into_response(),
        other => return Err(ApiError::bad_request(format!("unknown format `{other}`"))),
    })
}

/// `{"query": "user=alice"}` or the field form `{"user": "alice"}`.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum FocusBody {
    Text { query: String },
    Fields(FocusFields),
}

async fn focus_nodes(State(state): State<Arc<AppState>>, body: Result<Json<FocusBody>, axum::extract::rejection::JsonRejection>) -> ApiResult<Json<serde_json::Value>> {
    let Json(body) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let query = match body {
        FocusBody::Text { query } => FocusQuery::parse(&query),
        FocusBody::Fields(f) => FocusQuery::try_from(f),
    }
    .map_err(ApiError::bad_request)?;
    let live = state.live();
    Ok(Json(json!({
        "timestamp": live.timestamp,
        "query": query.to_string(),
        "nodes": focus(&live.frame, &query),
    })))
}

trait ToApi {
    fn to_api(&self) -> ApiError;
}

impl ToApi for twin_core::error::HistoryError {
    fn to_api(&self) -> ApiError {
        use twin_core::error::HistoryError::*;
        match self {
            BadRange { .. } | NonMonotonic { .. } => ApiError::bad_request(self),
            OutOfRange { .. } | Empty => ApiError::not_found(self),
        }
    }
}
