//! HTTP routes over a swappable snapshot.

use std::future::Future;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::Serialize;
use tokio::net::TcpListener;

use crate::api::{handle_health, handle_related, parse_request, ApiError, HttpFetcher, PageFetcher};
use crate::snapshot::Snapshot;

/// Shared server state. Requests clone the current snapshot pointer once
/// and are served from it to completion, so a swap never mixes snapshots
/// within one response.
pub struct AppState {
    snapshot: RwLock<Option<Arc<Snapshot>>>,
    fetcher: Arc<dyn PageFetcher>,
    log_requests: bool,
}

impl AppState {
    pub fn new(snapshot: Option<Snapshot>) -> Self {
        Self {
            snapshot: RwLock::new(snapshot.map(Arc::new)),
            fetcher: Arc::new(HttpFetcher::default()),
            log_requests: false,
        }
    }

    pub fn with_fetcher(mut self, fetcher: Arc<dyn PageFetcher>) -> Self {
        self.fetcher = fetcher;
        self
    }

    /// Log request urls. Off by default.
    pub fn with_request_logging(mut self, on: bool) -> Self {
        self.log_requests = on;
        self
    }

    pub fn current(&self) -> Option<Arc<Snapshot>> {
        self.snapshot.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Publish a new snapshot; returns the one it replaced.
    pub fn swap(&self, next: Snapshot) -> Option<Arc<Snapshot>> {
        let mut slot = self.snapshot.write().unwrap_or_else(|e| e.into_inner());
        slot.replace(Arc::new(next))
    }
}

fn json_response<T: Serialize>(status: StatusCode, value: &T) -> Response {
    match serde_json::to_vec(value) {
        Ok(body) => (status, [(header::CONTENT_TYPE, "application/json")], body).into_response(),
        Err(e) => error_response(&ApiError::internal(e.to_string())),
    }
}

fn error_response(e: &ApiError) -> Response {
    let status = StatusCode::from_u16(e.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    let body = serde_json::json!({ "code": e.code, "message": e.message });
    (status, [(header::CONTENT_TYPE, "application/json")], body.to_string()).into_response()
}

async fn related(State(state): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> Response {
    if let Some(ct) = headers.get(header::CONTENT_TYPE) {
        let ok = ct
            .to_str()
            .map(|v| v.trim_start().to_ascii_lowercase().starts_with("application/json"))
            .unwrap_or(false);
        if !ok {
            return error_response(&ApiError::new(
                415,
                "unsupported_media_type",
                "send the request as application/json",
            ));
        }
    }
    let request = match parse_request(&body) {
        Ok(r) => r,
        Err(e) => return error_response(&e),
    };
    let Some(snapshot) = state.current() else {
        return error_response(&ApiError::not_ready());
    };
    let fetcher = state.fetcher.clone();
    let log_url = state.log_requests.then(|| request.url.clone()).flatten();
    let outcome =
        tokio::task::spawn_blocking(move || handle_related(&snapshot, &request, fetcher.as_ref())).await;
    match outcome {
        Ok(Ok(response)) => {
            match log_url {
                Some(url) => log::info!("related {url}: {} fact checks", response.fact_checks.len()),
                None => log::debug!("related: {} fact checks", response.fact_checks.len()),
            }
            json_response(StatusCode::OK, &response)
        }
        Ok(Err(e)) => {
            log::debug!("related: {e}");
            error_response(&e)
        }
        Err(join) => {
            log::error!("related handler failed: {join}");
            error_response(&ApiError::internal("the request could not be processed"))
        }
    }
}

async fn health(State(state): State<Arc<AppState>>) -> Response {
    let snapshot = state.current();
    let status = if snapshot.is_some() {
        StatusCode::OK
    } else {
        StatusCode::SERVICE_UNAVAILABLE
    };
    json_response(status, &handle_health(snapshot.as_deref()))
}

async fn not_found() -> Response {
    error_response(&ApiError::new(404, "not_found", "unknown route"))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/related", post(related))
        .route("/v1/health", get(health))
        .fallback(not_found)
        .with_state(state)
}

/// Serve until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    state: Arc<AppState>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}
