//! HTTP interface.
//!
//! - `POST /v1/sessions`: 201 stored, 409 duplicate session id, 422 schema violation
//! - `GET /v1/sessions?policy=…`: retained session ids
//! - `GET /v1/export.csv?policy=…`: duration CSV of retained sessions

use std::future::Future;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Result, TelemetryError};
use crate::export::durations_csv;
use crate::policy::{apply_exclusions, ExclusionPolicy};
use crate::record::{validate_payload, FieldError, SessionRecord, ValidationErrors};
use crate::store::{Appended, Store, DEFAULT_SEGMENT_BYTES};

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_MAX_BODY_BYTES: usize = 1024 * 1024;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ServiceConfig {
    pub bind: IpAddr,
    pub port: u16,
    pub data_dir: PathBuf,
    pub max_body_bytes: usize,
    pub segment_bytes: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: DEFAULT_PORT,
            data_dir: PathBuf::from("teamtime-data"),
            max_body_bytes: DEFAULT_MAX_BODY_BYTES,
            segment_bytes: DEFAULT_SEGMENT_BYTES,
        }
    }
}

impl ServiceConfig {
    /// Defaults overridden by `TEAMTIME_BIND`, `TEAMTIME_PORT`, `TEAMTIME_DATA_DIR`,
    /// `TEAMTIME_MAX_BODY` and `TEAMTIME_SEGMENT_BYTES`.
    pub fn from_env() -> Result<Self> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self> {
        fn parse<T: std::str::FromStr>(key: &str, v: String) -> Result<T> {
            v.parse()
                .map_err(|_| TelemetryError::Config(format!("{key}=`{v}` is not a valid value")))
        }
        let mut c = Self::default();
        if let Some(v) = get("TEAMTIME_BIND") {
            c.bind = parse("TEAMTIME_BIND", v)?;
        }
        if let Some(v) = get("TEAMTIME_PORT") {
            c.port = parse("TEAMTIME_PORT", v)?;
        }
        if let Some(v) = get("TEAMTIME_DATA_DIR") {
            c.data_dir = PathBuf::from(v);
        }
        if let Some(v) = get("TEAMTIME_MAX_BODY") {
            c.max_body_bytes = parse("TEAMTIME_MAX_BODY", v)?;
        }
        if let Some(v) = get("TEAMTIME_SEGMENT_BYTES") {
            c.segment_bytes = parse("TEAMTIME_SEGMENT_BYTES", v)?;
        }
        Ok(c)
    }
}

/// Response body of an ingest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub session_id: String,
    pub stored: bool,
    pub duplicate: bool,
    pub complete: bool,
}

#[derive(Debug)]
pub enum IngestError {
    Invalid(ValidationErrors),
    Store(TelemetryError),
}

pub fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

/// Validates and appends one payload.
pub fn ingest_session(store: &Store, body: &Value, received_at_ms: u64) -> Result<Ack, IngestError> {
    let payload = validate_payload(body).map_err(IngestError::Invalid)?;
    let record = SessionRecord::new(payload, received_at_ms);
    let mut ack = Ack {
        session_id: record.session_id.clone(),
        stored: false,
        duplicate: false,
        complete: record.complete,
    };
    match store.append(record).map_err(IngestError::Store)? {
        Appended::Stored => ack.stored = true,
        Appended::Duplicate => {
            ack.duplicate = true;
            ack.complete = store.get(&ack.session_id).is_some_and(|r| r.complete);
        }
    }
    Ok(ack)
}

#[derive(Debug, Deserialize)]
struct PolicyQuery {
    policy: Option<String>,
}

#[derive(Serialize)]
struct ErrorBody {
    error: &'static str,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    fields: Vec<FieldError>,
    #[serde(skip_serializing_if = "Option::is_none")]
    message: Option<String>,
}

fn error(status: StatusCode, kind: &'static str, fields: Vec<FieldError>, message: Option<String>) -> Response {
    (status, Json(ErrorBody { error: kind, fields, message })).into_response()
}

#[allow(clippy::result_large_err)]
fn policy(q: &PolicyQuery) -> std::result::Result<ExclusionPolicy, Response> {
    match &q.policy {
        None => Ok(ExclusionPolicy::default()),
        Some(p) => p
            .parse()
            .map_err(|e: TelemetryError| error(StatusCode::BAD_REQUEST, "policy", vec![], Some(e.to_string()))),
    }
}

async fn post_session(State(store): State<Arc<Store>>, body: Bytes) -> Response {
    let value: Value = match serde_json::from_slice(&body) {
        Ok(v) => v,
        Err(e) => {
            let field = FieldError {
                field: "$".into(),
                message: format!("invalid JSON: {e}"),
            };
            return error(StatusCode::UNPROCESSABLE_ENTITY, "schema", vec![field], None);
        }
    };
    let received = now_ms();
    let result = tokio::task::spawn_blocking(move || ingest_session(&store, &value, received)).await;
    match result {
        Ok(Ok(ack)) if ack.stored => (StatusCode::CREATED, Json(ack)).into_response(),
        Ok(Ok(ack)) => (StatusCode::CONFLICT, Json(ack)).into_response(),
        Ok(Err(IngestError::Invalid(v))) => error(StatusCode::UNPROCESSABLE_ENTITY, "schema", v.fields, None),
        Ok(Err(IngestError::Store(e))) => {
            tracing::error!(error = %e, "append failed");
            error(StatusCode::INTERNAL_SERVER_ERROR, "storage", vec![], Some(e.to_string()))
        }
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "internal", vec![], Some(e.to_string())),
    }
}

#[derive(Serialize)]
struct Retained {
    policy: String,
    session_ids: Vec<String>,
}

async fn get_sessions(State(store): State<Arc<Store>>, Query(q): Query<PolicyQuery>) -> Response {
    let policy = match policy(&q) {
        Ok(p) => p,
        Err(r) => return r,
    };
    let session_ids = store.with_records(|rs| {
        apply_exclusions(rs, &policy)
            .into_iter()
            .map(|r| r.session_id.clone())
            .collect()
    });
    Json(Retained {
        policy: policy.to_string(),
        session_ids,
    })
    .into_response()
}

async fn get_export(State(store): State<Arc<Store>>, Query(q): Query<PolicyQuery>) -> Response {
    let policy = match policy(&q) {
        Ok(p) => p,
        Err(r) => return r,
    };
    let csv = store.with_records(|rs| durations_csv(apply_exclusions(rs, &policy)));
    ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response()
}

pub fn router(store: Arc<Store>, max_body_bytes: usize) -> Router {
    Router::new()
        .route("/v1/sessions", post(post_session).get(get_sessions))
        .route("/v1/export.csv", get(get_export))
        .layer(DefaultBodyLimit::max(max_body_bytes))
        .with_state(store)
}

/// Binds the configured address and returns the listener with its router.
pub async fn bind(config: &ServiceConfig) -> Result<(tokio::net::TcpListener, Router)> {
    let store = Arc::new(Store::open_with(&config.data_dir, config.segment_bytes)?);
    let r = store.recovery();
    tracing::info!(records = r.records, skipped = r.skipped_lines, truncated = r.truncated_bytes, "store opened");
    let addr = SocketAddr::new(config.bind, config.port);
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|source| TelemetryError::Io {
        path: PathBuf::from(addr.to_string()),
        source,
    })?;
    Ok((listener, router(store, config.max_body_bytes)))
}

/// Serves until `shutdown` resolves.
pub async fn serve(config: &ServiceConfig, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<()> {
    let (listener, app) = bind(config).await?;
    let addr = listener.local_addr().ok();
    tracing::info!(?addr, "telemetry service listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(|source| TelemetryError::Io {
            path: PathBuf::from("<server>"),
            source,
        })
}
