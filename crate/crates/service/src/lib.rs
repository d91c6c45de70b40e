//! HTTP/JSON service over the gridshape workflows.
//!
//! Routes live under `/v1`; every success body is a report envelope
//! (`{meta, result}`) and every failure is `{code, message, detail}` with
//! 400 for bad input, 404 for an unknown case, 422 for infeasible targets
//! (the violated bound in `detail`) and 500 for numerical failures.

pub mod downsample;
pub mod error;
pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use gridshape_core::api::{self, parse_frequency_deviation, CompareRequest, SimulationRequest};
use gridshape_core::report::envelope;
use gridshape_core::tuning::DEFAULT_FRONTIER_POINTS;
use gridshape_core::{CaseContext, ControllerSpec, StabilityRegion, StepResponse, TuningTargets};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

pub use error::ApiError;
pub use store::{CaseStore, StoreError};

/// Upper bound on samples per simulated series, before decimation.
pub const MAX_SAMPLES: f64 = 2.0e6;
pub const MAX_FRONTIER_POINTS: usize = 20_000;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    /// Allowed CORS origins; `"*"` allows any, empty disables CORS headers.
    pub cors_origins: Vec<String>,
}

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<CaseStore>,
}

type ApiResult = Result<Response, ApiError>;

pub fn router(config: &ServiceConfig) -> std::io::Result<Router> {
    let store = Arc::new(CaseStore::open(&config.data_dir)?);
    let v1 = Router::new()
        .route("/health", get(health))
        .route("/cases", post(upload_case).get(list_cases))
        .route("/cases/{id}", get(get_case))
        .route("/cases/{id}/spectrum", get(spectrum))
        .route("/analyze", post(analyze))
        .route("/tune", post(tune))
        .route("/locus", post(locus))
        .route("/frontier", get(frontier))
        .route("/simulate", post(simulate))
        .route("/compare", post(compare));
    let mut app = Router::new()
        .route("/health", get(health))
        .nest("/v1", v1)
        .with_state(AppState { store });
    if let Some(cors) = cors_layer(&config.cors_origins) {
        app = app.layer(cors);
    }
    Ok(app)
}

fn cors_layer(origins: &[String]) -> Option<CorsLayer> {
    if origins.is_empty() {
        return None;
    }
    let allow = if origins.iter().any(|o| o == "*") {
        AllowOrigin::any()
    } else {
        AllowOrigin::list(origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()))
    };
    Some(
        CorsLayer::new()
            .allow_origin(allow)
            .allow_methods(Any)
            .allow_headers(Any),
    )
}

/// Binds and serves until the process is stopped.
pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> std::io::Result<()> {
    let app = router(&config)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, dir = %config.data_dir.display(), "gridshape service listening");
    axum::serve(listener, app).await
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            "invalid_request",
            format!("malformed request body: {e}"),
            json!({}),
        )
    })
}

fn report<T: Serialize>(kind: &str, hash: Option<&str>, body: &T) -> ApiResult {
    Ok(Json(envelope(kind, hash, body)?).into_response())
}

/// Runs CPU-bound work off the async workers.
async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f).await.map_err(|e| {
        ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "internal",
            format!("worker failed: {e}"),
            json!({}),
        )
    })?
}

fn case(state: &AppState, id: &str) -> Result<Arc<CaseContext>, ApiError> {
    Ok(state.store.get(id)?)
}

async fn health() -> Json<Value> {
    Json(
        json!({ "status": "ok", "toolkit": gridshape_core::report::TOOLKIT, "version": gridshape_core::report::VERSION }),
    )
}

#[derive(Serialize)]
struct CaseSummary {
    id: String,
    n: usize,
    f0: f64,
    lambda_2: f64,
    lambda_n: f64,
}

impl CaseSummary {
    fn of(ctx: &CaseContext) -> Self {
        Self {
            id: ctx.hash.clone(),
            n: ctx.n(),
            f0: ctx.case.f0,
            lambda_2: ctx.spectrum.lambda_2(),
            lambda_n: ctx.spectrum.lambda_n(),
        }
    }
}

async fn upload_case(State(state): State<AppState>, body: Bytes) -> ApiResult {
    let text = String::from_utf8(body.to_vec())
        .map_err(|_| ApiError::bad_request("case body is not UTF-8"))?;
    let (ctx, created) = blocking(move || Ok(state.store.put(&text)?)).await?;
    let mut summary = serde_json::to_value(CaseSummary::of(&ctx)).expect("summary serializes");
    summary["created"] = Value::from(created);
    let status = if created {
        StatusCode::CREATED
    } else {
        StatusCode::OK
    };
    Ok((status, Json(envelope("case", Some(&ctx.hash), &summary)?)).into_response())
}

async fn list_cases(State(state): State<AppState>) -> ApiResult {
    let cases = blocking(move || {
        let ids = state.store.ids()?;
        ids.iter()
            .map(|id| Ok(CaseSummary::of(state.store.get(id)?.as_ref())))
            .collect::<Result<Vec<_>, ApiError>>()
    })
    .await?;
    report("cases", None, &cases)
}

async fn get_case(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let ctx = case(&state, &id)?;
    report("case", Some(&ctx.hash), &ctx.case)
}

async fn spectrum(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let ctx = case(&state, &id)?;
    report("spectrum", Some(&ctx.hash), &api::spectrum_report(&ctx))
}

/// Target region given as a decay rate and a damping ratio.
#[derive(Deserialize)]
struct RegionInput {
    alpha: f64,
    cos_psi: f64,
}

#[derive(Deserialize)]
struct AnalyzeBody {
    case_id: String,
    controller: ControllerSpec,
    #[serde(default)]
    region: Option<RegionInput>,
}

async fn analyze(State(state): State<AppState>, body: Bytes) -> ApiResult {
    let req: AnalyzeBody = parse_body(&body)?;
    let ctx = case(&state, &req.case_id)?;
    let region = req
        .region
        .map(|r| StabilityRegion::from_targets(r.alpha, r.cos_psi))
        .transpose()?;
    let c = ctx.clone();
    let out = blocking(move || Ok(api::analyze(&c, &req.controller, region)?)).await?;
    report("analysis", Some(&ctx.hash), &out)
}

/// Per-unit number, or text with a unit such as `"200mHz"`.
#[derive(Deserialize)]
#[serde(untagged)]
enum FrequencyInput {
    Pu(f64),
    Text(String),
}

#[derive(Deserialize)]
struct TargetsInput {
    cos_psi_d: f64,
    alpha_d: f64,
    delta_p: f64,
    delta_omega_d: FrequencyInput,
}

#[derive(Deserialize)]
struct TuneBody {
    case_id: String,
    targets: TargetsInput,
    #[serde(default)]
    coi_override: Option<f64>,
    #[serde(default)]
    with_frontier: bool,
}

async fn tune(State(state): State<AppState>, body: Bytes) -> ApiResult {
    let req: TuneBody = parse_body(&body)?;
    let ctx = case(&state, &req.case_id)?;
    let t = &req.targets;
    let delta_omega_d = match &t.delta_omega_d {
        FrequencyInput::Pu(x) => *x,
        FrequencyInput::Text(s) => parse_frequency_deviation(s, ctx.case.f0)?,
    };
    let targets = TuningTargets {
        cos_psi_d: t.cos_psi_d,
        alpha_d: t.alpha_d,
        delta_p: t.delta_p,
        delta_omega_d,
    };
    let c = ctx.clone();
    let out = blocking(move || {
        Ok(api::tune(
            &c,
            &targets,
            req.coi_override,
            req.with_frontier,
        )?)
    })
    .await?;
    report("tuning", Some(&ctx.hash), &out)
}

#[derive(Deserialize)]
struct LocusBody {
    case_id: String,
    controller: ControllerSpec,
    #[serde(default)]
    grid: Option<Vec<f64>>,
}

async fn locus(State(state): State<AppState>, body: Bytes) -> ApiResult {
    let req: LocusBody = parse_body(&body)?;
    let ctx = case(&state, &req.case_id)?;
    let c = ctx.clone();
    let out = blocking(move || Ok(api::locus(&c, &req.controller, req.grid)?)).await?;
    report("locus", Some(&ctx.hash), &out)
}

#[derive(Deserialize)]
struct FrontierQuery {
    case_id: String,
    #[serde(default)]
    points: Option<usize>,
}

async fn frontier(State(state): State<AppState>, Query(q): Query<FrontierQuery>) -> ApiResult {
    let ctx = case(&state, &q.case_id)?;
    let points = q.points.unwrap_or(DEFAULT_FRONTIER_POINTS);
    if !(2..=MAX_FRONTIER_POINTS).contains(&points) {
        return Err(ApiError::bad_request(format!(
            "points must lie in [2, {MAX_FRONTIER_POINTS}]"
        )));
    }
    let c = ctx.clone();
    let out = blocking(move || Ok(api::frontier(&c, points)?)).await?;
    report("frontier", Some(&ctx.hash), &out)
}

#[derive(Deserialize, Default)]
struct FullQuery {
    #[serde(default)]
    full: Option<String>,
}

impl FullQuery {
    fn full(&self) -> bool {
        matches!(self.full.as_deref(), Some("1" | "true"))
    }
}

fn check_samples(t_end: f64, dt: f64) -> Result<(), ApiError> {
    if dt > 0.0 && t_end / dt > MAX_SAMPLES {
        return Err(ApiError::bad_request(format!(
            "t_end/dt exceeds {MAX_SAMPLES} samples"
        )));
    }
    Ok(())
}

/// Decimates the series in an envelope body when it would exceed the size
/// limit, and notes it in `meta.downsampled`.
fn shrink<T: Serialize>(
    kind: &str,
    hash: &str,
    full: bool,
    body: &mut T,
    series: impl Fn(&mut T) -> Vec<&mut StepResponse>,
) -> ApiResult {
    let value = envelope(kind, Some(hash), body)?;
    if full || serde_json::to_vec(&value).map_or(0, |b| b.len()) <= downsample::MAX_BODY_BYTES {
        return Ok(Json(value).into_response());
    }
    let mut original = 0;
    for r in series(body) {
        original = original.max(r.len());
        *r = downsample::downsample(r, downsample::MAX_POINTS);
    }
    let mut value = envelope(kind, Some(hash), body)?;
    value["meta"]["downsampled"] = json!({ "original_samples": original, "max_points": downsample::MAX_POINTS, "method": "minmax" });
    Ok(Json(value).into_response())
}

#[derive(Deserialize)]
struct SimulateBody {
    case_id: String,
    #[serde(flatten)]
    request: SimulationRequest,
}

async fn simulate(
    State(state): State<AppState>,
    Query(q): Query<FullQuery>,
    body: Bytes,
) -> ApiResult {
    let req: SimulateBody = parse_body(&body)?;
    let ctx = case(&state, &req.case_id)?;
    check_samples(req.request.t_end, req.request.dt)?;
    let c = ctx.clone();
    let mut out = blocking(move || Ok(api::simulate(&c, &req.request)?)).await?;
    shrink("simulation", &ctx.hash, q.full(), &mut out, |r| {
        r.modal.iter_mut().chain(r.direct.iter_mut()).collect()
    })
}

#[derive(Deserialize)]
struct CompareBody {
    case_id: String,
    #[serde(flatten)]
    request: CompareRequest,
}

async fn compare(
    State(state): State<AppState>,
    Query(q): Query<FullQuery>,
    body: Bytes,
) -> ApiResult {
    let req: CompareBody = parse_body(&body)?;
    let ctx = case(&state, &req.case_id)?;
    check_samples(req.request.t_end, req.request.dt)?;
    let c = ctx.clone();
    let mut out = blocking(move || Ok(api::compare(&c, &req.request)?)).await?;
    shrink("comparison", &ctx.hash, q.full(), &mut out, |r| {
        r.fs.response
            .iter_mut()
            .chain(r.vi.response.iter_mut())
            .collect()
    })
}
