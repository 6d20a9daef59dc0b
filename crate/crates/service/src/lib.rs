//! JSON-over-HTTP front end for a loaded artifact bundle.
//!
//! All endpoints live under `/api`. Every failure, including malformed
//! bodies and unknown routes, answers with an [`ApiError`] body.

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Query, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Serialize;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use pantry_core::api::{
    classify_raw, ingredients_by_prefix, recommend_raw, ApiError, ClassifyRequest, ErrorCode,
    HealthResponse, RecommendRequest,
};
use pantry_core::pipeline::Bundle;

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    /// Allowed CORS origin; `*` allows any. No CORS headers when unset.
    pub cors_origin: Option<String>,
}

/// Shared state. The bundle is set once at startup and read without locks
/// afterwards.
#[derive(Debug, Clone, Default)]
pub struct AppState {
    bundle: Arc<OnceLock<Arc<Bundle>>>,
}

impl AppState {
    pub fn loading() -> Self {
        Self::default()
    }

    pub fn ready(bundle: Bundle) -> Self {
        let s = Self::default();
        s.set_bundle(bundle);
        s
    }

    /// Returns false if a bundle was already installed.
    pub fn set_bundle(&self, bundle: Bundle) -> bool {
        self.bundle.set(Arc::new(bundle)).is_ok()
    }

    pub fn bundle(&self) -> Option<Arc<Bundle>> {
        self.bundle.get().cloned()
    }

    fn require(&self) -> Result<Arc<Bundle>, ErrorResponse> {
        self.bundle().ok_or_else(|| {
            ErrorResponse(ApiError::new(ErrorCode::NotReady, "artifacts are still loading"))
        })
    }
}

struct ErrorResponse(ApiError);

impl From<ApiError> for ErrorResponse {
    fn from(e: ApiError) -> Self {
        Self(e)
    }
}

impl IntoResponse for ErrorResponse {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.code.http_status())
            .unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.0)).into_response()
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ErrorResponse> {
    serde_json::from_slice(body).map_err(|e| {
        ErrorResponse(ApiError::bad_request(format!("invalid request body: {e}")))
    })
}

type ApiResult<T> = Result<Json<T>, ErrorResponse>;

async fn health(State(state): State<AppState>) -> Json<HealthResponse> {
    Json(match state.bundle() {
        Some(b) => HealthResponse::ready(&b),
        None => HealthResponse::loading(),
    })
}

async fn recommend(State(state): State<AppState>, body: Bytes) -> ApiResult<impl Serialize> {
    let bundle = state.require()?;
    let req: RecommendRequest = parse_body(&body)?;
    Ok(Json(recommend_raw(&bundle, &req)?))
}

async fn classify(State(state): State<AppState>, body: Bytes) -> ApiResult<impl Serialize> {
    let bundle = state.require()?;
    let req: ClassifyRequest = parse_body(&body)?;
    Ok(Json(classify_raw(&bundle, &req)?))
}

async fn ingredients(
    State(state): State<AppState>,
    query: Result<Query<BTreeMap<String, String>>, QueryRejection>,
) -> ApiResult<impl Serialize> {
    let bundle = state.require()?;
    let Query(params) = query
        .map_err(|e| ErrorResponse(ApiError::bad_request(format!("invalid query string: {e}"))))?;
    let prefix = params.get("prefix").map(String::as_str).unwrap_or("");
    Ok(Json(ingredients_by_prefix(&bundle, prefix)))
}

async fn not_found() -> ErrorResponse {
    ErrorResponse(ApiError::bad_request("no such endpoint"))
}

async fn wrong_method() -> ErrorResponse {
    ErrorResponse(ApiError::bad_request("method not allowed for this endpoint"))
}

pub fn router(state: AppState, config: &ServiceConfig) -> Router {
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/recommend", post(recommend))
        .route("/api/classify", post(classify))
        .route("/api/ingredients", get(ingredients))
        .fallback(not_found)
        .method_not_allowed_fallback(wrong_method)
        .with_state(state);
    match config.cors_origin.as_deref() {
        None => api,
        Some("*") => api.layer(CorsLayer::new().allow_origin(Any).allow_headers(Any).allow_methods(Any)),
        Some(origin) => match HeaderValue::from_str(origin) {
            Ok(v) => api.layer(
                CorsLayer::new()
                    .allow_origin(AllowOrigin::exact(v))
                    .allow_headers(Any)
                    .allow_methods(Any),
            ),
            Err(_) => {
                log::warn!("ignoring invalid CORS origin {origin:?}");
                api
            }
        },
    }
}

/// Serves until `shutdown` resolves.
pub async fn serve<F>(
    listener: tokio::net::TcpListener,
    state: AppState,
    config: &ServiceConfig,
    shutdown: F,
) -> std::io::Result<()>
where
    F: std::future::Future<Output = ()> + Send + 'static,
{
    axum::serve(listener, router(state, config))
        .with_graceful_shutdown(shutdown)
        .await
}
