//! HTTP service: heatmaps, per-cell detail and what-if predictions over an
//! atomically swappable model snapshot.

use std::collections::{BTreeSet, HashMap};
use std::sync::atomic::{AtomicU8, Ordering};
use std::sync::Arc;

use arc_swap::ArcSwapOption;
use axum::body::Bytes;
use axum::extract::rejection::{BytesRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use geobehave::cohort::Label;
use geobehave::environment::{EnvAttributes, PoiIndex};
use geobehave::forest::ForestModel;
use geobehave::geocode::{cover_count, decode, CellBounds, GeohashId, MAX_LENGTH};
use geobehave::heatmap::{export_geojson, generate, score_cell, Provenance, GEOJSON_MEDIA_TYPE};
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;
use tower_http::trace::TraceLayer;

use crate::config::PipelineConfig;
use crate::pipeline::{load_model, load_pois, observed_cells, MODEL};

pub const BODY_LIMIT: usize = 64 * 1024;
/// Largest heatmap served over HTTP.
pub const MAX_HTTP_CELLS: u64 = 50_000;

/// Everything a request reads. Replaced whole on reload.
pub struct Snapshot {
    pub model: ForestModel,
    pub pois: PoiIndex,
    pub observed: BTreeSet<GeohashId>,
    /// Default heatmap length.
    pub length: usize,
}

impl Snapshot {
    pub fn load(cfg: &PipelineConfig) -> anyhow::Result<Snapshot> {
        Ok(Snapshot {
            model: load_model(&cfg.artifact(MODEL))?,
            pois: PoiIndex::new(&load_pois(&cfg.inputs)?),
            observed: observed_cells(cfg)?,
            length: cfg.length,
        })
    }
}

const LOADING: u8 = 0;
const READY: u8 = 1;
const UNAVAILABLE: u8 = 2;

pub struct AppState {
    snapshot: ArcSwapOption<Snapshot>,
    status: AtomicU8,
    source: Option<PipelineConfig>,
}

impl AppState {
    /// State that reloads from `cfg`; starts empty until [`AppState::reload`].
    pub fn from_config(cfg: PipelineConfig) -> Arc<AppState> {
        Arc::new(AppState { snapshot: ArcSwapOption::empty(), status: AtomicU8::new(LOADING), source: Some(cfg) })
    }

    /// Fixed state without a reload source.
    pub fn fixed(snapshot: Option<Snapshot>) -> Arc<AppState> {
        let status = if snapshot.is_some() { READY } else { LOADING };
        Arc::new(AppState {
            snapshot: ArcSwapOption::new(snapshot.map(Arc::new)),
            status: AtomicU8::new(status),
            source: None,
        })
    }

    pub fn install(&self, snapshot: Snapshot) {
        self.snapshot.store(Some(Arc::new(snapshot)));
        self.status.store(READY, Ordering::SeqCst);
    }

    pub fn current(&self) -> Option<Arc<Snapshot>> {
        self.snapshot.load_full()
    }

    /// Reload from the configured source. On failure the previous snapshot
    /// stays in service.
    pub fn reload(&self) -> anyhow::Result<String> {
        let cfg = self.source.as_ref().ok_or_else(|| anyhow::anyhow!("no reload source configured"))?;
        match Snapshot::load(cfg) {
            Ok(s) => {
                let fp = s.model.fingerprint.clone();
                self.install(s);
                Ok(fp)
            }
            Err(e) => {
                if self.current().is_none() {
                    self.status.store(UNAVAILABLE, Ordering::SeqCst);
                }
                Err(e)
            }
        }
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError { status, message: message.into() }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, message)
    }

    fn no_model() -> Self {
        ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "model not loaded")
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    status: u16,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody { error: &self.message, status: self.status.as_u16() };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn snapshot(state: &AppState) -> ApiResult<Arc<Snapshot>> {
    state.current().ok_or_else(ApiError::no_model)
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    model_fingerprint: Option<String>,
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Health> {
    let snap = state.current();
    let status = match (snap.is_some(), state.status.load(Ordering::SeqCst)) {
        (true, _) => "ok",
        (false, UNAVAILABLE) => "unavailable",
        _ => "loading",
    };
    Json(Health { status, model_fingerprint: snap.map(|s| s.model.fingerprint.clone()) })
}

fn number(params: &HashMap<String, String>, key: &str) -> ApiResult<f64> {
    let raw = params.get(key).ok_or_else(|| ApiError::bad_request(format!("missing query parameter {key}")))?;
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| ApiError::bad_request(format!("{key}={raw:?} is not a number")))
}

fn bbox_from_query(params: &HashMap<String, String>) -> ApiResult<CellBounds> {
    let (min_lat, min_lon) = (number(params, "min_lat")?, number(params, "min_lon")?);
    let (max_lat, max_lon) = (number(params, "max_lat")?, number(params, "max_lon")?);
    CellBounds::new(min_lat, min_lon, max_lat, max_lon).map_err(|e| ApiError::bad_request(e.to_string()))
}

async fn heatmap(
    State(state): State<Arc<AppState>>,
    query: Result<Query<HashMap<String, String>>, QueryRejection>,
) -> ApiResult<Response> {
    let Query(params) = query.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let bbox = bbox_from_query(&params)?;
    let snap = snapshot(&state)?;
    let length = match params.get("length") {
        None => snap.length,
        Some(raw) => raw
            .parse::<usize>()
            .ok()
            .filter(|l| (1..=MAX_LENGTH).contains(l))
            .ok_or_else(|| ApiError::bad_request(format!("length={raw:?} outside 1..={MAX_LENGTH}")))?,
    };
    let cells = cover_count(&bbox, length).map_err(|e| ApiError::bad_request(e.to_string()))?;
    if cells > MAX_HTTP_CELLS {
        return Err(ApiError::bad_request(format!("bbox covers {cells} cells, limit is {MAX_HTTP_CELLS}")));
    }
    let body = tokio::task::spawn_blocking(move || {
        generate(&bbox, length, &snap.model, &snap.pois, &snap.observed).map(|h| export_geojson(&h))
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
    .map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, GEOJSON_MEDIA_TYPE)], body).into_response())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDetail {
    pub geohash: GeohashId,
    pub bounds: CellBounds,
    pub env: EnvAttributes,
    pub predicted_class: Label,
    pub vote_fraction: f64,
    pub provenance: Provenance,
    pub model_fingerprint: String,
}

async fn cell(State(state): State<Arc<AppState>>, Path(code): Path<String>) -> ApiResult<Json<CellDetail>> {
    let g = GeohashId::parse(&code).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let snap = snapshot(&state)?;
    let c = score_cell(&g, &snap.model, &snap.pois, &snap.observed);
    Ok(Json(CellDetail {
        bounds: decode(&g),
        geohash: g,
        env: c.env,
        predicted_class: c.predicted,
        vote_fraction: c.vote_fraction,
        provenance: c.provenance,
        model_fingerprint: snap.model.fingerprint.clone(),
    }))
}

/// Counts are taken as signed integers so negative values get a clear
/// validation message instead of a type error.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnv {
    athletics: i64,
    fastfood: i64,
    parks: i64,
    cafes: i64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWhatIf {
    geohash: String,
    env_override: RawEnv,
}

fn count(name: &str, v: i64) -> ApiResult<u32> {
    if v < 0 {
        return Err(ApiError::bad_request(format!("env_override.{name} must be nonnegative, got {v}")));
    }
    u32::try_from(v).map_err(|_| ApiError::bad_request(format!("env_override.{name} is too large")))
}

fn parse_whatif(body: &[u8]) -> ApiResult<(GeohashId, EnvAttributes)> {
    let raw: RawWhatIf =
        serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))?;
    let g = GeohashId::parse(&raw.geohash).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let e = raw.env_override;
    let env = EnvAttributes::from_array([
        count("athletics", e.athletics)?,
        count("fastfood", e.fastfood)?,
        count("parks", e.parks)?,
        count("cafes", e.cafes)?,
    ]);
    Ok((g, env))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionView {
    pub predicted_class: Label,
    pub vote_fraction: f64,
    pub env: EnvAttributes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfResponse {
    pub geohash: GeohashId,
    pub baseline: PredictionView,
    pub modified: PredictionView,
    pub model_fingerprint: String,
}

fn view(model: &ForestModel, env: EnvAttributes) -> PredictionView {
    let p = model.predict(&env);
    PredictionView { predicted_class: p.class, vote_fraction: p.vote_fraction, env }
}

async fn whatif(
    State(state): State<Arc<AppState>>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult<Json<WhatIfResponse>> {
    let body = body.map_err(|e| ApiError::new(e.status(), e.body_text()))?;
    let (g, env) = parse_whatif(&body)?;
    let snap = snapshot(&state)?;
    Ok(Json(WhatIfResponse {
        baseline: view(&snap.model, snap.pois.env(&g)),
        modified: view(&snap.model, env),
        geohash: g,
        model_fingerprint: snap.model.fingerprint.clone(),
    }))
}

#[derive(Serialize)]
struct Reloaded {
    status: &'static str,
    model_fingerprint: String,
}

async fn reload(State(state): State<Arc<AppState>>) -> ApiResult<Json<Reloaded>> {
    if state.source.is_none() {
        return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "reload is not configured"));
    }
    let worker = Arc::clone(&state);
    let fp = tokio::task::spawn_blocking(move || worker.reload())
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("{e:#}")))?;
    Ok(Json(Reloaded { status: "reloaded", model_fingerprint: fp }))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/v1/health", get(health))
        .route("/api/v1/heatmap", get(heatmap))
        .route("/api/v1/geohash/{code}", get(cell))
        .route("/api/v1/whatif", post(whatif))
        .route("/api/v1/admin/reload", post(reload))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .layer(CorsLayer::permissive())
        .layer(TraceLayer::new_for_http())
        .with_state(state)
}

fn spawn_reload(state: &Arc<AppState>, why: &'static str) {
    let state = Arc::clone(state);
    tokio::task::spawn_blocking(move || match state.reload() {
        Ok(fp) => tracing::info!(%fp, why, "model loaded"),
        Err(e) => tracing::error!(error = %format!("{e:#}"), why, "model load failed"),
    });
}

#[cfg(unix)]
fn watch_sighup(state: Arc<AppState>) -> anyhow::Result<()> {
    use tokio::signal::unix::{signal, SignalKind};
    let mut hup = signal(SignalKind::hangup())?;
    tokio::spawn(async move {
        while hup.recv().await.is_some() {
            spawn_reload(&state, "SIGHUP");
        }
    });
    Ok(())
}

#[cfg(not(unix))]
fn watch_sighup(_: Arc<AppState>) -> anyhow::Result<()> {
    Ok(())
}

/// Bind and serve until interrupted. The model loads in the background;
/// requests needing it get 503 until then.
pub async fn serve(cfg: PipelineConfig) -> anyhow::Result<()> {
    let addr = format!("{}:{}", cfg.host, cfg.listen_port()?);
    let listener = tokio::net::TcpListener::bind(&addr).await?;
    tracing::info!(%addr, "listening");
    let state = AppState::from_config(cfg);
    spawn_reload(&state, "startup");
    watch_sighup(Arc::clone(&state))?;
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
