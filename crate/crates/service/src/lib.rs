//! Replay service: streams a dataset through the detector at a chosen
//! speed, publishes telemetry and alarms over server-sent events and takes
//! technician verdicts that drive the few-time-steps adaptation.
//!
//! | Route | Body |
//! |---|---|
//! | `GET /status` | [`schema::STATUS`] |
//! | `POST /session` | [`schema::SessionCommand`] in, [`schema::SESSION`] out |
//! | `GET /events` | `text/event-stream` of [`schema::Envelope`] |
//! | `GET /alarms` | [`schema::ALARMS`] |
//! | `POST /alarms/{id}/feedback` | [`schema::FeedbackRequest`] in, [`schema::FeedbackResponse`] out |
//! | `GET /model/version` | [`schema::MODEL_VERSION`] |
//! | `GET /metrics` | Prometheus text |

mod alarms;
pub mod config;
mod routes;
pub mod schema;
mod service;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/service.md")]
mod book {}

pub use config::{bind_address, ServiceConfig, BIND_ENV, DEFAULT_BIND};
pub use routes::router;
pub use service::{Counters, Service, ServiceParts};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("{0}")]
    State(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("{0} not found")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("engine: {0}")]
    Engine(String),
}

/// Binds and serves until the process is interrupted.
pub async fn serve(service: Service, addr: &str) -> Result<(), ServiceError> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| ServiceError::Io(format!("bind {addr}: {e}")))?;
    tracing::info!("listening on {}", listener.local_addr().map_err(|e| ServiceError::Io(e.to_string()))?);
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| ServiceError::Io(e.to_string()))
}
