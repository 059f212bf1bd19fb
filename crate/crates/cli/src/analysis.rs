//! Per-feature computations shared by the pipeline and the service.

use isogloss_core::dataio::Dataset;
use isogloss_core::field::{
    extract_contours, front_stats, sample_starts, trace_gradient_line, ContourSet, FrontStats,
    GradientPath, Grid, TraceOptions,
};
use isogloss_core::fitting::{
    derived_quantities, fit_erfc, fit_linear, Derived, FitPoint, FitResult,
};
use isogloss_core::surface::{build_surface, FeatureSurface};
use isogloss_core::Exec;
use serde::Serialize;

use crate::error::{Stage, StageError};

/// Level the gradient paths start from.
pub const START_LEVEL: f64 = 0.9;

/// Surface, raster and contours of one feature.
#[derive(Debug, Clone)]
pub struct FeatureModel {
    pub feature: String,
    pub surface: FeatureSurface,
    pub grid: Grid,
    pub contours: ContourSet,
    /// Contours at [`START_LEVEL`], used to seed paths.
    pub start_contours: ContourSet,
}

#[derive(Debug, Clone, Copy)]
pub struct RasterSpec<'a> {
    pub nx: usize,
    pub ny: usize,
    pub levels: &'a [f64],
    pub clamp: bool,
}

pub fn build_feature(
    ds: &Dataset,
    feature: &str,
    spec: RasterSpec<'_>,
    exec: Exec,
) -> Result<FeatureModel, StageError> {
    let surface =
        build_surface(ds, feature, spec.clamp).map_err(|e| StageError::input(Stage::Surface, e))?;
    let status = surface.gradient_status();
    if !status.converged {
        log::warn!(
            "{feature}: gradient estimation stopped after {} sweeps (max change {:.3e})",
            status.sweeps,
            status.max_change
        );
    }
    let bbox = surface.triangulation().bbox();
    let grid = surface
        .rasterize(bbox, spec.nx, spec.ny, f64::NAN, exec)
        .map_err(|e| StageError::input(Stage::Raster, e))?;
    let contours =
        extract_contours(&grid, spec.levels).map_err(|e| StageError::input(Stage::Contours, e))?;
    let start_contours = match contours.level(START_LEVEL) {
        Some(c) => ContourSet {
            levels: vec![c.clone()],
        },
        None => extract_contours(&grid, &[START_LEVEL])
            .map_err(|e| StageError::input(Stage::Contours, e))?,
    };
    Ok(FeatureModel {
        feature: feature.to_string(),
        surface,
        grid,
        contours,
        start_contours,
    })
}

/// Fit of one model, or why it failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelFit {
    pub fit: Option<FitResult>,
    pub derived: Option<Derived>,
    pub error: Option<String>,
}

impl ModelFit {
    fn new(fit: Result<FitResult, impl ToString>, tau: f64) -> Self {
        match fit {
            Ok(f) => match derived_quantities(&f, tau) {
                Ok(d) => Self {
                    fit: Some(f),
                    derived: Some(d),
                    error: None,
                },
                Err(e) => Self {
                    fit: Some(f),
                    derived: None,
                    error: Some(e.to_string()),
                },
            },
            Err(e) => Self {
                fit: None,
                derived: None,
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontReport {
    pub feature: String,
    /// Paths requested.
    pub n: usize,
    pub seed: u64,
    pub tau: f64,
    pub stats: FrontStats,
    pub points: Vec<FitPoint>,
    pub linear: ModelFit,
    pub erfc: ModelFit,
}

pub fn fit_points(stats: &FrontStats) -> Vec<FitPoint> {
    stats
        .mean_distance
        .iter()
        .zip(&stats.levels)
        .map(|(&d, &level)| FitPoint { d, level })
        .collect()
}

/// Traces `n` gradient paths from seeded starts on the 0.9 contour.
pub fn trace_paths(
    model: &FeatureModel,
    n: usize,
    seed: u64,
    exec: Exec,
) -> Result<Vec<GradientPath>, StageError> {
    let starts = sample_starts(&model.start_contours, START_LEVEL, n, seed)
        .map_err(|e| StageError::input(Stage::Starts, e))?;
    let opts = TraceOptions::default();
    exec.map_slice(&starts, |&s| {
        trace_gradient_line(&model.surface, &model.start_contours, s, &opts)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()
    .map_err(|e| StageError::internal(Stage::Trace, e))
}

/// Statistics and both fits of already traced paths.
pub fn analyze_paths(
    feature: &str,
    paths: &[GradientPath],
    n: usize,
    seed: u64,
    tau: f64,
) -> Result<FrontReport, StageError> {
    let stats = front_stats(paths).map_err(|e| StageError::input(Stage::Stats, e))?;
    if stats.truncated > 0 {
        log::info!(
            "{feature}: {} of {} paths truncated",
            stats.truncated,
            paths.len()
        );
    }
    let points = fit_points(&stats);
    Ok(FrontReport {
        feature: feature.to_string(),
        n,
        seed,
        tau,
        linear: ModelFit::new(fit_linear(&points), tau),
        erfc: ModelFit::new(fit_erfc(&points), tau),
        points,
        stats,
    })
}

pub fn analyze_front(
    model: &FeatureModel,
    n: usize,
    seed: u64,
    tau: f64,
    exec: Exec,
) -> Result<(FrontReport, Vec<GradientPath>), StageError> {
    let paths = trace_paths(model, n, seed, exec)?;
    let report = analyze_paths(&model.feature, &paths, n, seed, tau)?;
    Ok((report, paths))
}
