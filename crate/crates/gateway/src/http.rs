//! HTTP surface of the gateway.

use std::convert::Infallible;
use std::future::Future;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cascadeflow_core::calibration::{artifact, TradeoffCurve};
use futures::Stream;
use serde_json::json;
use tokio::net::TcpListener;

use crate::backend::BackendError;
use crate::config::parse_config_update;
use crate::error::GatewayError;
use crate::events::FeedItem;
use crate::service::{parse_infer_request, Gateway};

impl GatewayError {
    pub fn status(&self) -> StatusCode {
        match self {
            GatewayError::BadRequest(_) => StatusCode::BAD_REQUEST,
            GatewayError::Student(e) | GatewayError::Teacher(e) => match e {
                BackendError::NotFound(_) => StatusCode::NOT_FOUND,
                BackendError::Invalid(_) => StatusCode::BAD_REQUEST,
                BackendError::Timeout(_) => StatusCode::GATEWAY_TIMEOUT,
                BackendError::Unavailable(_)
                | BackendError::Malformed(_)
                | BackendError::Load(_) => StatusCode::BAD_GATEWAY,
            },
            GatewayError::Config(_) | GatewayError::InvalidConfig(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            GatewayError::NoCurve => StatusCode::NOT_FOUND,
            GatewayError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for GatewayError {
    fn into_response(self) -> Response {
        (self.status(), Json(json!({ "error": self.to_string() }))).into_response()
    }
}

type Shared = Arc<Gateway>;

pub fn router(gateway: Shared) -> Router {
    Router::new()
        .route("/v1/infer", post(infer))
        .route("/v1/config", get(get_config).put(put_config))
        .route("/v1/stats", get(get_stats))
        .route("/v1/stats/reset", post(reset_stats))
        .route("/v1/curve", get(get_curve).put(put_curve))
        .route("/v1/events", get(events))
        .with_state(gateway)
}

async fn infer(State(gw): State<Shared>, body: Bytes) -> Result<Response, GatewayError> {
    let request = parse_infer_request(&body)?;
    Ok(Json(gw.handle_infer(request).await?).into_response())
}

async fn get_config(State(gw): State<Shared>) -> Response {
    Json(gw.get_config()).into_response()
}

async fn put_config(State(gw): State<Shared>, body: Bytes) -> Result<Response, GatewayError> {
    let update = parse_config_update(&body)?;
    Ok(Json(gw.update_config(&update)?).into_response())
}

async fn get_stats(State(gw): State<Shared>) -> Response {
    Json(gw.get_stats()).into_response()
}

async fn reset_stats(State(gw): State<Shared>) -> Response {
    Json(gw.reset_stats()).into_response()
}

async fn get_curve(State(gw): State<Shared>) -> Result<Response, GatewayError> {
    let curve = gw.curve().ok_or(GatewayError::NoCurve)?;
    Ok(Json(&*curve).into_response())
}

async fn put_curve(State(gw): State<Shared>, body: Bytes) -> Result<Response, GatewayError> {
    let curve = parse_curve_body(&body)?;
    let points = curve.points.len();
    gw.set_curve(curve)?;
    Ok(Json(json!({ "points": points })).into_response())
}

/// Accepts a curve either as one JSON object or as the JSONL artifact.
pub fn parse_curve_body(body: &[u8]) -> Result<TradeoffCurve, GatewayError> {
    if let Ok(curve) = serde_json::from_slice::<TradeoffCurve>(body) {
        return Ok(curve);
    }
    let text = std::str::from_utf8(body).map_err(|e| GatewayError::BadRequest(e.to_string()))?;
    artifact::parse_curve(text).map_err(|e| GatewayError::BadRequest(e.to_string()))
}

async fn events(State(gw): State<Shared>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let feed = gw.subscribe();
    let stream = futures::stream::unfold(feed, |mut feed| async move {
        let event = match feed.next().await? {
            FeedItem::Event(e) => Event::default()
                .event("route")
                .id(e.seq.to_string())
                .json_data(&e)
                .unwrap_or_else(|_| Event::default().event("route")),
            FeedItem::Disconnected { dropped } => Event::default()
                .event("disconnect")
                .data(json!({ "reason": "lagged", "dropped": dropped }).to_string()),
        };
        Some((Ok(event), feed))
    });
    Sse::new(stream).keep_alive(KeepAlive::new().interval(Duration::from_secs(15)))
}

/// Serves until `shutdown` resolves, then drains in-flight requests.
pub async fn serve<F>(listener: TcpListener, gateway: Shared, shutdown: F) -> std::io::Result<()>
where
    F: Future<Output = ()> + Send + 'static,
{
    axum::serve(listener, router(gateway))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Resolves on Ctrl-C or, on Unix, SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
    tracing::info!("shutting down");
}

/// Uploads a curve to a running gateway at `base_url`.
pub async fn push_curve(base_url: &str, curve: &TradeoffCurve) -> Result<(), BackendError> {
    let url = format!("{}/v1/curve", base_url.trim_end_matches('/'));
    let response = reqwest::Client::new()
        .put(&url)
        .json(curve)
        .timeout(Duration::from_secs(10))
        .send()
        .await
        .map_err(|e| BackendError::Unavailable(e.to_string()))?;
    let status = response.status();
    if status.is_success() {
        Ok(())
    } else {
        let body = response.text().await.unwrap_or_default();
        Err(BackendError::Invalid(format!("{status}: {body}")))
    }
}
