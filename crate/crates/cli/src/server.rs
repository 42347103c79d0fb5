//! HTTP front end of an annotation session.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use doorsense_core::annot::{AnnotError, AnnotationSession, Frame, Provenance};
use doorsense_core::dataset::from_json;
use doorsense_core::GroundTruthBox;

type Shared = Arc<AnnotationSession>;

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<AnnotError> for ApiError {
    fn from(e: AnnotError) -> Self {
        let status = match e {
            AnnotError::NotFound(_) => StatusCode::NOT_FOUND,
            AnnotError::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

#[derive(Serialize)]
struct SessionInfo<'a> {
    session_id: &'a str,
    image_dir: String,
    sample_period: f64,
    store: String,
    revision: u64,
    frames: &'a [Frame],
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnnotationsBody {
    pub image_id: String,
    pub provenance: Provenance,
    pub annotations: Vec<GroundTruthBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revision: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PutBody {
    annotations: Vec<GroundTruthBox>,
}

pub fn router(session: Shared) -> Router {
    Router::new()
        .route("/api/session", get(session_info))
        .route("/api/images/{id}/file", get(image_file))
        .route("/api/images/{id}/annotations", get(get_annotations).put(put_annotations))
        .route("/api/export", post(export))
        .with_state(session)
}

async fn session_info(State(s): State<Shared>) -> Response {
    Json(SessionInfo {
        session_id: s.session_id(),
        image_dir: s.image_dir().display().to_string(),
        sample_period: s.sample_period(),
        store: s.store_path().display().to_string(),
        revision: s.revision(),
        frames: s.frames(),
    })
    .into_response()
}

async fn image_file(State(s): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let path = s.image_path(&id)?;
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, format!("{}: {e}", path.display())))?;
    let mime = mime_guess::from_path(&path).first_or_octet_stream();
    Ok(([(header::CONTENT_TYPE, mime.to_string())], bytes).into_response())
}

async fn get_annotations(State(s): State<Shared>, Path(id): Path<String>) -> Result<Json<AnnotationsBody>, ApiError> {
    let (annotations, provenance) = s.get_annotations(&id)?;
    Ok(Json(AnnotationsBody { image_id: id, provenance, annotations, revision: None }))
}

async fn put_annotations(
    State(s): State<Shared>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<AnnotationsBody>, ApiError> {
    let text = std::str::from_utf8(&body).map_err(|_| ApiError(StatusCode::BAD_REQUEST, "body is not UTF-8".into()))?;
    let put: PutBody = from_json(text).map_err(|e| ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    // writes touch the disk and take the session's writer lock
    let ack = tokio::task::spawn_blocking(move || {
        let ack = s.put_annotations(&id, put.annotations)?;
        Ok::<_, AnnotError>((id, ack))
    })
    .await
    .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let (image_id, ack) = ack?;
    Ok(Json(AnnotationsBody {
        image_id,
        provenance: Provenance::Saved,
        annotations: ack.annotations,
        revision: Some(ack.revision),
    }))
}

async fn export(State(s): State<Shared>) -> Response {
    (
        [(header::CONTENT_TYPE, "application/json")],
        s.export_dataset().to_json(),
    )
        .into_response()
}

/// Binds `addr`, reports the bound address through `on_bound`, then serves forever.
pub async fn serve(
    session: AnnotationSession,
    addr: SocketAddr,
    on_bound: impl FnOnce(SocketAddr),
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    on_bound(listener.local_addr()?);
    axum::serve(listener, router(Arc::new(session))).await
}
