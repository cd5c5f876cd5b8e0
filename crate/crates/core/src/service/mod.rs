//! HTTP JSON API over a catalog of videos and their trained bundles.

mod catalog;
mod config;
mod jobs;

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, Path, RawQuery, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use catalog::{codes_file_name, Catalog, Lookup, Resolution, Trained, VideoSummary, FRAMES_DIR, MODEL_DIR};
pub use config::{ServiceConfig, ENV_CATALOG_ROOT, ENV_LISTEN};
pub use jobs::{JobSnapshot, JobStatus, Jobs};

use crate::editing::{make_texture, patch_edit_project, PatchEdit, PathSpec, Waypoint};
use crate::error::Error;
use crate::ingest::{decode_image_bytes, encode_png, Frame};
use crate::latentops::{
    average_codes, decode_average, interpolate, mediod, propagate_mask_with_progress, LabelMap,
    DEFAULT_SEARCH_RADIUS,
};
use crate::projection::spatial_superres;

pub const MEDIOD_HEADER: &str = "x-mediod-frame-id";
pub const MAX_ITERATIONS: usize = 100;
const MAX_BODY: usize = 64 << 20;

#[derive(Clone)]
pub struct AppState {
    pub catalog: Arc<Catalog>,
    pub jobs: Arc<Jobs>,
}

impl AppState {
    pub fn new(catalog: Catalog) -> Self {
        AppState {
            catalog: Arc::new(catalog),
            jobs: Arc::new(Jobs::default()),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: String,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code: code.into(),
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io(_) | Error::CorruptBundle(_) => StatusCode::INTERNAL_SERVER_ERROR,
            Error::Image(_) => StatusCode::UNSUPPORTED_MEDIA_TYPE,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl From<Lookup> for ApiError {
    fn from(l: Lookup) -> Self {
        match l {
            Lookup::UnknownVideo(id) => {
                ApiError::new(StatusCode::NOT_FOUND, "unknown_video", format!("no video named {id:?}"))
            }
            Lookup::Untrained(id) => ApiError::new(
                StatusCode::CONFLICT,
                "untrained",
                format!("video {id:?} has no trained model"),
            ),
            Lookup::Failed(e) => e.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

/// Result of an operation: either an image or a JSON document.
#[derive(Clone, Debug)]
pub enum Output {
    Png { bytes: Vec<u8>, mediod: Option<u32> },
    Json(serde_json::Value),
}

impl IntoResponse for Output {
    fn into_response(self) -> Response {
        match self {
            Output::Png { bytes, mediod } => {
                let mut r = ([(header::CONTENT_TYPE, "image/png")], bytes).into_response();
                if let Some(id) = mediod {
                    r.headers_mut().insert(MEDIOD_HEADER, HeaderValue::from(id));
                }
                r
            }
            Output::Json(v) => Json(v).into_response(),
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/videos", get(list_videos))
        .route("/videos/{id}/embedding", get(embedding))
        .route("/videos/{id}/average", post(average))
        .route("/videos/{id}/path", post(path))
        .route("/videos/{id}/edit", post(edit))
        .route("/videos/{id}/superres", post(superres))
        .route("/videos/{id}/propagate_mask", post(propagate))
        .route("/videos/{id}/interpolate", post(interpolate_frames))
        .route("/jobs/{job}", get(job_status))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint") })
        .method_not_allowed_fallback(|| async {
            ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "method_not_allowed", "method not allowed")
        })
        .layer(DefaultBodyLimit::max(MAX_BODY))
        .with_state(state)
}

/// Binds `config.listen` and serves until the process is stopped.
pub async fn serve(config: ServiceConfig) -> crate::Result<()> {
    let state = AppState::new(Catalog::new(&config.catalog_root, &config.frame_pattern));
    let listener = tokio::net::TcpListener::bind(&config.listen).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}

fn query_param<'a>(query: &'a Option<String>, key: &str) -> Option<&'a str> {
    query
        .as_deref()?
        .split('&')
        .filter_map(|kv| kv.split_once('=').or(Some((kv, ""))))
        .find(|(k, _)| *k == key)
        .map(|(_, v)| v)
}

fn wants_async(query: &Option<String>) -> ApiResult<bool> {
    match query_param(query, "async") {
        None | Some("false") | Some("0") => Ok(false),
        Some("true") | Some("1") | Some("") => Ok(true),
        Some(v) => Err(ApiError::bad_request(format!("async must be true or false, got {v:?}"))),
    }
}

fn parse_body<T: DeserializeOwned>(body: Result<Bytes, BytesRejection>) -> ApiResult<T> {
    let body = body.map_err(|e| ApiError::new(e.status(), "bad_request", e.body_text()))?;
    serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

fn check_iterations(n: usize) -> ApiResult<usize> {
    if n > MAX_ITERATIONS {
        return Err(ApiError::bad_request(format!("iterations must be at most {MAX_ITERATIONS}")));
    }
    Ok(n)
}

fn png(frame: &Frame) -> ApiResult<Vec<u8>> {
    encode_png(frame).map_err(ApiError::from)
}

fn png_b64(frame: &Frame) -> ApiResult<String> {
    Ok(B64.encode(png(frame)?))
}

/// Runs `work` off the async runtime, or as a pollable job when `detached`.
async fn run<F>(state: &AppState, detached: bool, work: F) -> ApiResult<Response>
where
    F: FnOnce(&dyn Fn(f64)) -> ApiResult<Output> + Send + 'static,
{
    if detached {
        let (id, progress) = state.jobs.create();
        let jobs = state.jobs.clone();
        tokio::task::spawn_blocking(move || {
            let report = |p: f64| progress.set(p);
            let result = work(&report);
            jobs.finish(id, result);
        });
        let body = serde_json::json!({ "job_id": id });
        return Ok((StatusCode::ACCEPTED, Json(body)).into_response());
    }
    let out = tokio::task::spawn_blocking(move || work(&|_| {}))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(out.into_response())
}

async fn list_videos(State(state): State<AppState>) -> ApiResult<Json<Vec<VideoSummary>>> {
    let catalog = state.catalog.clone();
    let list = tokio::task::spawn_blocking(move || catalog.list())
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(Json(list))
}

async fn trained(state: &AppState, id: String) -> ApiResult<Arc<Trained>> {
    let catalog = state.catalog.clone();
    let t = tokio::task::spawn_blocking(move || catalog.trained(&id))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(t)
}

async fn embedding(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let t = trained(&state, id).await?;
    run(&state, false, move |_| {
        let e = t.embedding()?;
        Ok(Output::Json(serde_json::to_value(&e.1).map_err(Error::from)?))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AverageRequest {
    frame_ids: Vec<u32>,
    #[serde(default)]
    iterations: usize,
}

async fn average(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult<Response> {
    let req: AverageRequest = parse_body(body)?;
    let iterations = check_iterations(req.iterations)?;
    if req.frame_ids.is_empty() {
        return Err(Error::EmptySelection.into());
    }
    let t = trained(&state, id).await?;
    run(&state, false, move |_| {
        let idx = req
            .frame_ids
            .iter()
            .map(|&f| t.frame_index(f))
            .collect::<crate::Result<Vec<_>>>()?;
        let codes: Vec<_> = idx.iter().map(|&i| &t.codes[i]).collect();
        let frame = decode_average(&t.model, &codes, iterations)?;
        let nearest = mediod(&codes, &average_codes(&codes)?)?;
        Ok(Output::Png {
            bytes: png(&frame)?,
            mediod: Some(req.frame_ids[nearest]),
        })
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PathRequest {
    path: PathSpec,
}

async fn path(
    State(state): State<AppState>,
    Path(id): Path<String>,
    RawQuery(query): RawQuery,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult<Response> {
    let detached = wants_async(&query)?;
    let req: PathRequest = parse_body(body)?;
    req.path.validate()?;
    let t = trained(&state, id).await?;
    run(&state, detached, move |progress| {
        let needs_embedding = req.path.waypoints.iter().any(|w| matches!(w, Waypoint::Point { .. }));
        let em = if needs_embedding { Some(t.embedding()?) } else { None };
        let seq = make_texture(&t.model, &t.codes, &req.path, em.as_ref().map(|e| &e.0))?;
        progress(0.5);
        let frames = seq.frames().iter().map(png_b64).collect::<ApiResult<Vec<_>>>()?;
        Ok(Output::Json(serde_json::json!({
            "frame_count": frames.len(),
            "frames": frames,
        })))
    })
    .await
}

fn default_edit_iterations() -> usize {
    5
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EditRequest {
    frame_id: u32,
    #[serde(default)]
    edits: Vec<PatchEdit>,
    #[serde(default = "default_edit_iterations")]
    iterations: usize,
}

async fn edit(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult<Response> {
    let req: EditRequest = parse_body(body)?;
    let iterations = check_iterations(req.iterations)?;
    let t = trained(&state, id).await?;
    run(&state, false, move |_| {
        let frame = &t.frames.frames()[t.frame_index(req.frame_id)?];
        let out = patch_edit_project(&t.model, frame, &req.edits, Some(&t.frames), iterations)?;
        Ok(Output::Png {
            bytes: png(&out)?,
            mediod: None,
        })
    })
    .await
}

async fn superres(
    State(state): State<AppState>,
    Path(id): Path<String>,
    RawQuery(query): RawQuery,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult<Response> {
    let n = match query_param(&query, "n") {
        None => default_edit_iterations(),
        Some(v) => v
            .parse()
            .map_err(|_| ApiError::bad_request(format!("n must be a non-negative integer, got {v:?}")))?,
    };
    let n = check_iterations(n)?;
    let body = body.map_err(|e| ApiError::new(e.status(), "bad_request", e.body_text()))?;
    let t = trained(&state, id).await?;
    run(&state, false, move |_| {
        let low = decode_image_bytes(&body).map_err(|e| match e {
            Error::Image(_) => e.into(),
            other => ApiError::new(StatusCode::UNSUPPORTED_MEDIA_TYPE, "image", other.to_string()),
        })?;
        let cfg = t.model.config();
        let out = spatial_superres(&t.model, &low, cfg.input_h, cfg.input_w, n)?;
        Ok(Output::Png {
            bytes: png(&out)?,
            mediod: None,
        })
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PropagateRequest {
    frame_id: u32,
    /// Base64 grayscale PNG of labels.
    mask: String,
    #[serde(default)]
    radius: Option<usize>,
}

async fn propagate(
    State(state): State<AppState>,
    Path(id): Path<String>,
    RawQuery(query): RawQuery,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult<Response> {
    let detached = wants_async(&query)?;
    let req: PropagateRequest = parse_body(body)?;
    let png_bytes = B64
        .decode(req.mask.as_bytes())
        .map_err(|e| ApiError::bad_request(format!("mask is not base64: {e}")))?;
    let mask = LabelMap::from_png(&png_bytes)
        .map_err(|e| ApiError::bad_request(format!("mask is not a PNG: {e}")))?;
    let radius = req.radius.unwrap_or(DEFAULT_SEARCH_RADIUS);
    let t = trained(&state, id).await?;
    let start = t.frame_index(req.frame_id)?;
    if t.frames.dims() != (mask.height, mask.width) {
        return Err(Error::shape(format!(
            "mask is {}x{}, frames are {:?}",
            mask.height,
            mask.width,
            t.frames.dims()
        ))
        .into());
    }
    run(&state, detached, move |progress| {
        let frames = &t.frames.frames()[start..];
        let masks = propagate_mask_with_progress(&t.model, frames, &mask, radius, |done, total| {
            progress(done as f64 / total as f64)
        })?;
        let encoded = masks
            .iter()
            .map(|m| Ok(B64.encode(m.to_png()?)))
            .collect::<crate::Result<Vec<_>>>()?;
        Ok(Output::Json(serde_json::json!({
            "frame_ids": &t.frames.frame_ids()[start..],
            "masks": encoded,
        })))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InterpolateRequest {
    frame_a: u32,
    frame_b: u32,
    steps: usize,
    #[serde(default)]
    include_endpoints: bool,
}

/// Blend weights of frame a: `1 − j/(steps+1)` for j in 1..=steps, optionally with 1 and 0 at the ends.
pub fn interpolation_alphas(steps: usize, include_endpoints: bool) -> Vec<f32> {
    let mut alphas: Vec<f32> = (1..=steps).map(|j| 1.0 - j as f32 / (steps + 1) as f32).collect();
    if include_endpoints {
        alphas.insert(0, 1.0);
        alphas.push(0.0);
    }
    alphas
}

const MAX_STEPS: usize = 1000;

async fn interpolate_frames(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult<Response> {
    let req: InterpolateRequest = parse_body(body)?;
    if req.steps == 0 || req.steps > MAX_STEPS {
        return Err(ApiError::bad_request(format!("steps must be in 1..={MAX_STEPS}")));
    }
    let t = trained(&state, id).await?;
    run(&state, false, move |_| {
        let a = &t.codes[t.frame_index(req.frame_a)?];
        let b = &t.codes[t.frame_index(req.frame_b)?];
        let alphas = interpolation_alphas(req.steps, req.include_endpoints);
        let frames = alphas
            .iter()
            .map(|&al| png_b64(&interpolate(&t.model, a, b, al)?))
            .collect::<ApiResult<Vec<_>>>()?;
        Ok(Output::Json(serde_json::json!({ "alphas": alphas, "frames": frames })))
    })
    .await
}

async fn job_status(State(state): State<AppState>, Path(job): Path<String>) -> ApiResult<Response> {
    let id: u64 = job
        .parse()
        .map_err(|_| ApiError::new(StatusCode::NOT_FOUND, "unknown_job", format!("no job {job:?}")))?;
    let snap = state
        .jobs
        .snapshot(id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_job", format!("no job {id}")))?;
    Ok(Json(snap).into_response())
}
