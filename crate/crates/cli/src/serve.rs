//! HTTP facade over the library, for the map client.
//!
//! | route | payload |
//! |---|---|
//! | `GET /api/features` | feature labels |
//! | `GET /api/localities?feature=` | GeoJSON points with `g_index` |
//! | `GET /api/contours?feature=&levels=` | one GeoJSON collection per level |
//! | `POST /api/gradient-line` `{feature, lon, lat}` | GeoJSON LineString with the δ table |
//! | `GET /api/front-stats?feature=&n=&seed=` | front statistics, fits, derived quantities |
//! | `GET /api/evolution?model=&t=&law=` | sampled profile |
//! | `GET /api/simulation/:run/frames` | frame manifest |
//! | `GET /api/simulation/:run/frames/:i` | raw f32le frame |
//!
//! Errors are JSON `{"error": ...}` with 400 for malformed requests, 404 for
//! unknown features, runs or frames and 422 when the data cannot answer
//! (point outside the hull, no 0.9 contour, no complete path).

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use isogloss_core::dataio::{project, Dataset, GeoPoint};
use isogloss_core::field::{extract_contours, trace_gradient_line, FieldError, TraceOptions};
use isogloss_core::models::{ConvectionLaw, ErfcForm, ErfcParams, LinearParams};
use isogloss_core::sim2d::Manifest;
use isogloss_core::Exec;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::analysis::{analyze_front, build_feature, FeatureModel, FrontReport, RasterSpec};
use crate::config::ProjectConfig;
use crate::error::StageError;
use crate::evolve::{sample_profile, EvolveModel, Sampling};
use crate::geojson;
use crate::pipeline::{load_input, selected_features};

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl ToString) -> Self {
        Self {
            status,
            message: message.to_string(),
        }
    }

    fn bad_request(m: impl ToString) -> Self {
        Self::new(StatusCode::BAD_REQUEST, m)
    }

    fn not_found(m: impl ToString) -> Self {
        Self::new(StatusCode::NOT_FOUND, m)
    }

    fn unprocessable(m: impl ToString) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, m)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Read-only data behind the service plus the front-statistics cache.
pub struct AppState {
    dataset: Dataset,
    cfg: ProjectConfig,
    models: BTreeMap<String, Result<FeatureModel, String>>,
    sim_root: Option<PathBuf>,
    exec: Exec,
    fronts: Mutex<HashMap<(String, usize, u64), Arc<FrontReport>>>,
    // Front-statistics builds run one at a time.
    build_lock: Mutex<()>,
}

impl AppState {
    /// Loads the configured input and builds every selected feature.
    pub fn load(
        cfg: ProjectConfig,
        sim_root: Option<PathBuf>,
        exec: Exec,
    ) -> Result<Self, StageError> {
        cfg.validate()
            .map_err(|e| StageError::input(crate::error::Stage::Config, e))?;
        let ds = load_input(&cfg)?;
        Self::from_dataset(ds, cfg, sim_root, exec)
    }

    pub fn from_dataset(
        dataset: Dataset,
        cfg: ProjectConfig,
        sim_root: Option<PathBuf>,
        exec: Exec,
    ) -> Result<Self, StageError> {
        let spec = RasterSpec {
            nx: cfg.grid_nx,
            ny: cfg.grid_ny,
            levels: &cfg.levels,
            clamp: cfg.clamp,
        };
        let models = selected_features(&cfg, &dataset)?
            .into_iter()
            .map(|f| {
                let m = build_feature(&dataset, &f, spec, exec).map_err(|e| {
                    log::warn!("{f}: {e:#}");
                    format!("{e:#}")
                });
                (f, m)
            })
            .collect();
        Ok(Self {
            dataset,
            cfg,
            models,
            sim_root,
            exec,
            fronts: Mutex::new(HashMap::new()),
            build_lock: Mutex::new(()),
        })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn config(&self) -> &ProjectConfig {
        &self.cfg
    }

    pub fn model(&self, feature: &str) -> ApiResult<&FeatureModel> {
        match self.models.get(feature) {
            None => Err(ApiError::not_found(format!("unknown feature {feature:?}"))),
            Some(Err(e)) => Err(ApiError::unprocessable(e)),
            Some(Ok(m)) => Ok(m),
        }
    }

    fn origin(&self) -> GeoPoint {
        self.dataset.origin()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/features", get(features))
        .route("/api/localities", get(localities))
        .route("/api/contours", get(contours))
        .route("/api/gradient-line", post(gradient_line))
        .route("/api/front-stats", get(front_stats))
        .route("/api/evolution", get(evolution))
        .route("/api/simulation/:run/frames", get(sim_manifest))
        .route("/api/simulation/:run/frames/:i", get(sim_frame))
        .with_state(state)
}

pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

async fn features(State(st): State<Arc<AppState>>) -> Json<Vec<String>> {
    Json(st.models.keys().cloned().collect())
}

#[derive(Deserialize)]
struct FeatureQuery {
    feature: String,
}

async fn localities(
    State(st): State<Arc<AppState>>,
    Query(q): Query<FeatureQuery>,
) -> ApiResult<Json<Value>> {
    let idx = st
        .dataset
        .feature_index(&q.feature)
        .map_err(ApiError::not_found)?;
    Ok(Json(geojson::localities(&st.dataset, Some(idx))))
}

#[derive(Deserialize)]
struct ContourQuery {
    feature: String,
    levels: Option<String>,
}

pub fn parse_levels(text: &str) -> Result<Vec<f64>, String> {
    let levels = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad level {s:?}"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(l) = levels.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(format!("level {l} is outside [0, 1]"));
    }
    Ok(levels)
}

async fn contours(
    State(st): State<Arc<AppState>>,
    Query(q): Query<ContourQuery>,
) -> ApiResult<Json<Value>> {
    let model = st.model(&q.feature)?;
    let set = match q.levels.as_deref() {
        None => model.contours.clone(),
        Some(text) => {
            let levels = parse_levels(text).map_err(ApiError::bad_request)?;
            extract_contours(&model.grid, &levels).map_err(ApiError::bad_request)?
        }
    };
    Ok(Json(json!({
        "origin": geojson::origin_member(st.origin()),
        "levels": geojson::contour_levels(&set, st.origin()),
    })))
}

#[derive(Debug, Deserialize)]
pub struct GradientLineRequest {
    pub feature: String,
    pub lon: f64,
    pub lat: f64,
}

/// Options used for clicked starts: any distance to the 0.9 contour is
/// accepted, the start snaps to its nearest point.
pub fn click_trace_options() -> TraceOptions {
    TraceOptions {
        snap_radius: f64::INFINITY,
        ..TraceOptions::default()
    }
}

/// The gradient-line payload for a clicked point.
pub fn gradient_line_payload(st: &AppState, req: &GradientLineRequest) -> ApiResult<Value> {
    let model = st.model(&req.feature)?;
    let origin = st.origin();
    let p = project(req.lon, req.lat, origin).map_err(ApiError::bad_request)?;
    if !model.surface.contains(p) {
        return Err(ApiError::unprocessable(format!(
            "({}, {}) is outside the surveyed region",
            req.lon, req.lat
        )));
    }
    let path = trace_gradient_line(
        &model.surface,
        &model.start_contours,
        p,
        &click_trace_options(),
    )
    .map_err(|e| match e {
        FieldError::NoContour { .. } | FieldError::OutsideHull { .. } => ApiError::unprocessable(e),
        e => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e),
    })?;
    let mut f = geojson::path_feature(&path, origin);
    f["origin"] = geojson::origin_member(origin);
    f["properties"]["feature"] = json!(req.feature);
    f["properties"]["click"] = json!([req.lon, req.lat]);
    Ok(f)
}

async fn gradient_line(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: GradientLineRequest = serde_json::from_slice(&body).map_err(ApiError::bad_request)?;
    let payload = tokio::task::spawn_blocking(move || gradient_line_payload(&st, &req))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e))??;
    Ok(Json(payload))
}

#[derive(Deserialize)]
struct FrontQuery {
    feature: String,
    n: Option<usize>,
    seed: Option<u64>,
}

/// Cached front report for `(feature, n, seed)`; builds are serialized.
pub fn front_report(
    st: &AppState,
    feature: &str,
    n: usize,
    seed: u64,
) -> ApiResult<Arc<FrontReport>> {
    if n == 0 {
        return Err(ApiError::bad_request("n must be at least 1"));
    }
    let model = st.model(feature)?;
    let key = (feature.to_string(), n, seed);
    if let Some(r) = st.fronts.lock().expect("cache lock").get(&key) {
        return Ok(r.clone());
    }
    let _build = st.build_lock.lock().expect("build lock");
    if let Some(r) = st.fronts.lock().expect("cache lock").get(&key) {
        return Ok(r.clone());
    }
    let (report, _) = analyze_front(model, n, seed, st.cfg.tau, st.exec)
        .map_err(|e| ApiError::unprocessable(format!("{e:#}")))?;
    let report = Arc::new(report);
    st.fronts
        .lock()
        .expect("cache lock")
        .insert(key, report.clone());
    Ok(report)
}

async fn front_stats(
    State(st): State<Arc<AppState>>,
    Query(q): Query<FrontQuery>,
) -> ApiResult<Json<Value>> {
    let n = q.n.unwrap_or(st.cfg.n_paths[0]);
    let seed = q.seed.unwrap_or(st.cfg.seed);
    let report = tokio::task::spawn_blocking(move || front_report(&st, &q.feature, n, seed))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e))??;
    Ok(Json(
        serde_json::to_value(&*report).expect("report serializes"),
    ))
}

#[derive(Debug, Deserialize, Default)]
pub struct EvolutionQuery {
    pub model: String,
    pub t: f64,
    pub law: Option<String>,
    pub theta: Option<f64>,
    pub lambda: Option<f64>,
    pub tau: Option<f64>,
    pub kappa: Option<f64>,
    pub s0: Option<f64>,
    pub chi: Option<f64>,
    pub s1: Option<f64>,
    pub form: Option<ErfcForm>,
    pub s_min: Option<f64>,
    pub s_max: Option<f64>,
    pub n: Option<usize>,
}

/// Model described by an evolution query; unset parameters come from the
/// project configuration (`τ`, `λ`, `θ`) or default to κ = 0.3, χ = 0.14,
/// s₀ = s₁ = 0.
pub fn evolution_model(cfg: &ProjectConfig, q: &EvolutionQuery) -> Result<EvolveModel, String> {
    let law = ConvectionLaw::from_name(
        q.law.as_deref().unwrap_or("none"),
        Some(q.theta.unwrap_or(cfg.theta)),
    )
    .map_err(|e| e.to_string())?;
    let tau = q.tau.unwrap_or(cfg.tau);
    let lambda = q.lambda.unwrap_or(cfg.lambda);
    match q.model.as_str() {
        "erfc" => Ok(EvolveModel::Erfc {
            params: ErfcParams {
                kappa: q.kappa.unwrap_or(0.3),
                s0: q.s0.unwrap_or(0.0),
                lambda,
                tau,
                law,
            },
            form: q.form.unwrap_or_default(),
        }),
        "linear" => Ok(EvolveModel::Linear {
            params: LinearParams {
                chi: q.chi.unwrap_or(0.14),
                s1: q.s1.unwrap_or(0.0),
                lambda,
                tau,
                law,
            },
        }),
        other => Err(format!("unknown model {other:?} (expected erfc or linear)")),
    }
}

pub fn evolution_sampling(q: &EvolutionQuery) -> Sampling {
    let d = Sampling::default();
    Sampling {
        s_min: q.s_min.unwrap_or(d.s_min),
        s_max: q.s_max.unwrap_or(d.s_max),
        n: q.n.unwrap_or(d.n),
    }
}

async fn evolution(
    State(st): State<Arc<AppState>>,
    Query(q): Query<EvolutionQuery>,
) -> ApiResult<Json<Value>> {
    let model = evolution_model(&st.cfg, &q).map_err(ApiError::bad_request)?;
    let profile =
        sample_profile(&model, q.t, evolution_sampling(&q)).map_err(ApiError::bad_request)?;
    Ok(Json(json!({ "model": model, "profile": profile })))
}

fn run_dir(st: &AppState, run: &str) -> ApiResult<PathBuf> {
    let root = st
        .sim_root
        .as_ref()
        .ok_or_else(|| ApiError::not_found("no simulation runs are served"))?;
    let valid = !run.is_empty()
        && run
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    let dir = root.join(run);
    if !valid || !dir.join("manifest.json").is_file() {
        return Err(ApiError::not_found(format!("unknown run {run:?}")));
    }
    Ok(dir)
}

fn read_manifest(dir: &std::path::Path) -> ApiResult<Manifest> {
    let text = std::fs::read_to_string(dir.join("manifest.json"))
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e))?;
    serde_json::from_str(&text).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e))
}

async fn sim_manifest(
    State(st): State<Arc<AppState>>,
    Path(run): Path<String>,
) -> ApiResult<Json<Manifest>> {
    let dir = run_dir(&st, &run)?;
    Ok(Json(read_manifest(&dir)?))
}

async fn sim_frame(
    State(st): State<Arc<AppState>>,
    Path((run, i)): Path<(String, usize)>,
) -> ApiResult<Response> {
    let dir = run_dir(&st, &run)?;
    let manifest = read_manifest(&dir)?;
    let frame = manifest.frames.get(i).ok_or_else(|| {
        ApiError::not_found(format!("run {run:?} has {} frames", manifest.frames.len()))
    })?;
    let bytes = std::fs::read(dir.join(&frame.file))
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e))?;
    Ok(([(header::CONTENT_TYPE, "application/octet-stream")], bytes).into_response())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_lists() {
        assert_eq!(parse_levels("0.9, 0.5,0").unwrap(), vec![0.9, 0.5, 0.0]);
        assert!(parse_levels("0.9,x").is_err());
        assert!(parse_levels("1.2").is_err());
    }

    #[test]
    fn evolution_defaults_come_from_config() {
        let cfg = ProjectConfig::default();
        let q = EvolutionQuery {
            model: "erfc".into(),
            t: 1000.0,
            law: Some("special".into()),
            ..Default::default()
        };
        match evolution_model(&cfg, &q).unwrap() {
            EvolveModel::Erfc { params, form } => {
                assert_eq!(params.tau, 1000.0);
                assert_eq!(params.lambda, 50.0);
                assert_eq!(params.law, ConvectionLaw::Special { theta: 1100.0 });
                assert_eq!(form, ErfcForm::Corrected);
            }
            m => panic!("{m:?}"),
        }
        let bad_law = EvolutionQuery {
            law: Some("warp".into()),
            ..q
        };
        assert!(evolution_model(&cfg, &bad_law).is_err());
        let bad_model = EvolutionQuery {
            model: "cubic".into(),
            ..Default::default()
        };
        assert!(evolution_model(&cfg, &bad_model).is_err());
    }
}
