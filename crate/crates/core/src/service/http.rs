//! JSON over HTTP for the session manager.

use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use super::{Backend, ServiceError, SessionConfig, SessionManager, TranscriptEntry, TurnResponse};
use crate::dialog::DialogConfig;

#[derive(Debug, Clone, Deserialize)]
pub struct CreateSession {
    pub domain: String,
    #[serde(default = "default_backend")]
    pub backend: String,
    #[serde(default)]
    pub cgi_url: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub few_threshold: Option<usize>,
}

fn default_backend() -> String {
    "local".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
    pub greeting: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Utterance {
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub detail: String,
}

pub struct ApiError(StatusCode, ErrorBody);

impl ApiError {
    fn new(status: StatusCode, error: &str, detail: impl Into<String>) -> Self {
        ApiError(
            status,
            ErrorBody {
                error: error.to_string(),
                detail: detail.into(),
            },
        )
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let detail = e.to_string();
        match e {
            ServiceError::UnknownDomain(_) => ApiError::new(StatusCode::NOT_FOUND, "unknown_domain", detail),
            ServiceError::UnknownSession(_) => ApiError::new(StatusCode::NOT_FOUND, "unknown_session", detail),
            ServiceError::SessionClosed(_) => ApiError::new(StatusCode::CONFLICT, "session_closed", detail),
            ServiceError::Backend(_) => ApiError::new(StatusCode::BAD_GATEWAY, "backend", detail),
            _ => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", detail),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

type Shared = Arc<SessionManager>;

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ServiceError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(ApiError::from)
}

async fn create(State(m): State<Shared>, Json(req): Json<CreateSession>) -> Result<(StatusCode, Json<Created>), ApiError> {
    let backend = Backend::parse(&req.backend, req.cgi_url.clone())
        .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "bad_backend", format!("unknown backend `{}`", req.backend)))?;
    let mut config = SessionConfig::new(&req.domain, backend, req.seed);
    if let Some(k) = req.few_threshold {
        config.dialog = DialogConfig { few_threshold: k };
    }
    let (session_id, greeting) = blocking(move || m.create(config)).await?;
    Ok((StatusCode::CREATED, Json(Created { session_id, greeting })))
}

async fn utterance(
    State(m): State<Shared>,
    Path(id): Path<String>,
    Json(u): Json<Utterance>,
) -> Result<Json<TurnResponse>, ApiError> {
    Ok(Json(blocking(move || m.step(&id, &u.text)).await?))
}

async fn transcript(State(m): State<Shared>, Path(id): Path<String>) -> Result<Json<Vec<TranscriptEntry>>, ApiError> {
    Ok(Json(m.transcript(&id)?))
}

async fn domains(State(m): State<Shared>) -> Json<Vec<String>> {
    Json(m.domain_names())
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

pub fn router(manager: Shared) -> Router {
    Router::new()
        .route("/api/session", post(create))
        .route("/api/session/{id}/utterance", post(utterance))
        .route("/api/session/{id}/transcript", get(transcript))
        .route("/api/domains", get(domains))
        .fallback(not_found)
        .with_state(manager)
}

pub async fn serve(manager: Shared, port: u16) -> std::io::Result<()> {
    let gc = Arc::clone(&manager);
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(std::time::Duration::from_secs(60));
        loop {
            tick.tick().await;
            let dropped = gc.expire_idle();
            if dropped > 0 {
                tracing::info!(dropped, "expired idle sessions");
            }
        }
    });
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    tracing::info!(port, "dialogue service listening");
    axum::serve(listener, router(manager)).await
}
