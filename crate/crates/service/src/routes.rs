use std::convert::Infallible;
use std::fmt::Write;
use std::sync::atomic::Ordering;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use serde::Deserialize;
use serde_json::json;
use tokio::sync::broadcast::error::RecvError;

use crate::schema::{self, AlarmStatus, FeedbackRequest, Gap, SessionCommand};
use crate::{Service, ServiceError};

pub fn router(service: Service) -> Router {
    Router::new()
        .route("/status", get(status))
        .route("/session", post(session))
        .route("/events", get(events))
        .route("/alarms", get(alarms))
        .route("/alarms/{id}/feedback", post(feedback))
        .route("/model/version", get(model_version))
        .route("/metrics", get(metrics))
        .with_state(service)
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let code = match &self {
            ServiceError::State(_) | ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::BadRequest(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (code, Json(json!({ "schema": schema::ERROR, "error": self.to_string() }))).into_response()
    }
}

async fn status(State(svc): State<Service>) -> Json<serde_json::Value> {
    let alarms = svc.alarms();
    Json(json!({
        "schema": schema::STATUS,
        "session": svc.session(),
        "model": {
            "loaded": svc.model_loaded(),
            "version": svc.model_version(),
            "sections": svc.sections(),
        },
        "alarms": { "total": alarms.len(), "open": svc.open_alarms() },
        "events": { "last_seq": svc.last_seq() },
    }))
}

async fn session(State(svc): State<Service>, Json(cmd): Json<SessionCommand>) -> Result<Json<serde_json::Value>, ServiceError> {
    let view = svc.command(cmd)?;
    Ok(Json(json!({ "schema": schema::SESSION, "session": view })))
}

#[derive(Debug, Deserialize)]
struct AlarmFilter {
    status: Option<AlarmStatus>,
}

async fn alarms(State(svc): State<Service>, Query(filter): Query<AlarmFilter>) -> Json<serde_json::Value> {
    let list: Vec<_> = svc
        .alarms()
        .into_iter()
        .filter(|a| filter.status.map_or(true, |s| a.status == s))
        .collect();
    Json(json!({ "schema": schema::ALARMS, "alarms": list }))
}

async fn feedback(
    State(svc): State<Service>,
    Path(id): Path<u64>,
    Json(req): Json<FeedbackRequest>,
) -> Result<Json<schema::FeedbackResponse>, ServiceError> {
    // Tuning is CPU-bound; keep it off the async workers.
    let resp = tokio::task::spawn_blocking(move || svc.feedback(id, req))
        .await
        .map_err(|e| ServiceError::Engine(e.to_string()))??;
    Ok(Json(resp))
}

async fn model_version(State(svc): State<Service>) -> Json<serde_json::Value> {
    let adaptations = svc.adaptations();
    Json(json!({
        "schema": schema::MODEL_VERSION,
        "version": svc.model_version(),
        "adaptations": adaptations.len(),
        "last_adaptation": adaptations.last(),
    }))
}

async fn metrics(State(svc): State<Service>) -> impl IntoResponse {
    let c = svc.counters();
    let get = |a: &std::sync::atomic::AtomicU64| a.load(Ordering::Relaxed);
    let mut out = String::new();
    let mut metric = |name: &str, kind: &str, help: &str, value: String| {
        let _ = writeln!(out, "# HELP plantwatch_{name} {help}\n# TYPE plantwatch_{name} {kind}\nplantwatch_{name} {value}");
    };
    metric("records_processed_total", "counter", "Records pushed through the detector.", get(&c.records).to_string());
    metric("alarms_total", "counter", "Alarms opened.", get(&c.alarms).to_string());
    metric("alarms_open", "gauge", "Alarms awaiting a verdict.", svc.open_alarms().to_string());
    metric("feedback_false_alarm_total", "counter", "False-alarm verdicts applied.", get(&c.feedback_false).to_string());
    metric("feedback_true_anomaly_total", "counter", "True-anomaly verdicts recorded.", get(&c.feedback_true).to_string());
    metric(
        "adaptation_seconds_total",
        "counter",
        "Wall time spent tuning section heads.",
        format!("{:.6}", get(&c.adaptation_micros) as f64 / 1e6),
    );
    metric("model_version", "gauge", "Current model version.", svc.model_version().to_string());
    metric("events_published_total", "counter", "Stream events published.", get(&c.events).to_string());
    metric("subscriber_gaps_total", "counter", "Gap markers sent to lagging subscribers.", get(&c.gaps).to_string());
    metric("session_cursor", "gauge", "Next record index.", svc.session().cursor.to_string());
    ([(header::CONTENT_TYPE, "text/plain; version=0.0.4")], out)
}

fn gap_event(missed: u64) -> Event {
    let gap = Gap {
        schema: schema::GAP.into(),
        missed,
    };
    Event::default().event("gap").json_data(gap).expect("serializable")
}

fn envelope_event(env: &schema::Envelope) -> Event {
    Event::default()
        .id(env.seq.to_string())
        .event(env.body.kind())
        .json_data(env)
        .expect("serializable")
}

/// Live events. A `Last-Event-ID` header replays buffered events newer
/// than that id first, preceded by a gap marker when some were dropped.
async fn events(State(svc): State<Service>, headers: HeaderMap) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let after = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse::<u64>().ok());
    let (backlog, missed, rx) = svc.subscribe(after);
    let mut last = after.unwrap_or(0);
    let mut head: Vec<Event> = Vec::new();
    if missed {
        head.push(gap_event(backlog.first().map_or(0, |e| e.seq - last - 1)));
    }
    for env in &backlog {
        last = env.seq;
        head.push(envelope_event(env));
    }
    let live = stream::unfold((rx, svc, last), |(mut rx, svc, last)| async move {
        loop {
            match rx.recv().await {
                // Already sent from the backlog.
                Ok(env) if env.seq <= last => continue,
                Ok(env) => return Some((Ok(envelope_event(&env)), (rx, svc, env.seq))),
                Err(RecvError::Lagged(n)) => {
                    svc.counters().gaps.fetch_add(1, Ordering::Relaxed);
                    return Some((Ok(gap_event(n)), (rx, svc, last)));
                }
                Err(RecvError::Closed) => return None,
            }
        }
    });
    Sse::new(stream::iter(head.into_iter().map(Ok)).chain(live)).keep_alive(KeepAlive::default())
}
