//! The batch pipeline: ingest, surface, contours, gradient paths, front
//! statistics, fits, derived quantities and the comparison table.
//!
//! Output layout under the configured directory:
//!
//! ```text
//! config.txt              resolved configuration
//! dataset.json            origin, localities, features, observation counts
//! localities.geojson
//! <feature>/contours.geojson
//! <feature>/paths_n<N>.geojson
//! <feature>/front_n<N>.json
//! comparison.csv, comparison.txt
//! report.json
//! error.json              only when a stage failed
//! ```
//!
//! Files are written as soon as their stage finishes, so a failing run keeps
//! everything produced before the failure.

use std::fs;
use std::path::{Path, PathBuf};

use isogloss_core::dataio::{load_dataset, Dataset, GeoPoint};
use isogloss_core::fitting::{compare_models, ComparisonInput, ComparisonTable};
use isogloss_core::surface::GradientStatus;
use isogloss_core::Exec;
use serde::Serialize;
use serde_json::json;

use crate::analysis::{analyze_front, build_feature, FrontReport, RasterSpec};
use crate::config::ProjectConfig;
use crate::error::{Stage, StageError};
use crate::geojson;

#[derive(Debug, Clone, Serialize)]
pub struct FeatureOutcome {
    pub feature: String,
    pub gradient_status: GradientStatus,
    pub fronts: Vec<FrontReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub origin: GeoPoint,
    pub localities: usize,
    pub features: Vec<FeatureOutcome>,
    pub table: ComparisonTable,
}

/// Directory-safe version of a feature label.
pub fn feature_dir(feature: &str) -> String {
    feature
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), StageError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| {
            StageError::internal(Stage::Write, anyhow::anyhow!("{}: {e}", dir.display()))
        })?;
    }
    fs::write(path, bytes)
        .map_err(|e| StageError::internal(Stage::Write, anyhow::anyhow!("{}: {e}", path.display())))
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<(), StageError> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| StageError::internal(Stage::Write, e))?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn load_input(cfg: &ProjectConfig) -> Result<Dataset, StageError> {
    let input = cfg.input.as_deref().ok_or_else(|| {
        StageError::input(Stage::Config, anyhow::anyhow!("no input file configured"))
    })?;
    load_dataset(input, cfg.origin, cfg.policy).map_err(|e| StageError::input(Stage::Ingest, e))
}

/// Features named in the config, or all of them.
pub fn selected_features(cfg: &ProjectConfig, ds: &Dataset) -> Result<Vec<String>, StageError> {
    if cfg.features.is_empty() {
        return Ok(ds.features().to_vec());
    }
    for f in &cfg.features {
        ds.feature_index(f)
            .map_err(|e| StageError::input(Stage::Ingest, e))?;
    }
    Ok(cfg.features.clone())
}

pub fn dataset_summary(ds: &Dataset) -> serde_json::Value {
    let counts: Vec<_> = ds
        .features()
        .iter()
        .enumerate()
        .map(|(fi, f)| {
            let n = (0..ds.localities().len())
                .filter(|&l| ds.value(l, fi).is_some())
                .count();
            json!({ "feature": f, "observations": n })
        })
        .collect();
    json!({
        "origin": geojson::origin_member(ds.origin()),
        "localities": ds.localities().len(),
        "observations": ds.observation_count(),
        "features": counts,
    })
}

/// Writes the ingest outputs (`dataset.json`, `localities.geojson`).
pub fn write_ingest(ds: &Dataset, out: &Path) -> Result<(), StageError> {
    write_json(&out.join("dataset.json"), &dataset_summary(ds))?;
    write_json(
        &out.join("localities.geojson"),
        &geojson::localities(ds, None),
    )
}

pub fn run_pipeline(cfg: &ProjectConfig, exec: Exec) -> Result<PipelineReport, StageError> {
    let out = cfg.out.clone();
    let result = run_stages(cfg, &out, exec);
    if let Err(e) = &result {
        let record = json!({
            "stage": e.stage,
            "kind": e.kind,
            "message": format!("{:#}", e.source),
        });
        // Best effort; the original error is what gets reported.
        let _ = write_json(&out.join("error.json"), &record);
    } else {
        let _ = fs::remove_file(out.join("error.json"));
    }
    result
}

fn run_stages(cfg: &ProjectConfig, out: &Path, exec: Exec) -> Result<PipelineReport, StageError> {
    cfg.validate()
        .map_err(|e| StageError::input(Stage::Config, e))?;
    write_bytes(&out.join("config.txt"), cfg.to_text().as_bytes())?;

    let ds = load_input(cfg)?;
    let features = selected_features(cfg, &ds)?;
    write_ingest(&ds, out)?;
    let origin = ds.origin();

    let spec = RasterSpec {
        nx: cfg.grid_nx,
        ny: cfg.grid_ny,
        levels: &cfg.levels,
        clamp: cfg.clamp,
    };
    let mut outcomes = Vec::new();
    let mut inputs = Vec::new();
    for feature in &features {
        let dir: PathBuf = out.join(feature_dir(feature));
        let model = build_feature(&ds, feature, spec, exec)?;
        write_json(
            &dir.join("contours.geojson"),
            &geojson::contours(&model.contours, origin),
        )?;
        let mut fronts = Vec::new();
        for &n in &cfg.n_paths {
            let (report, paths) = analyze_front(&model, n, cfg.seed, cfg.tau, exec)?;
            write_json(
                &dir.join(format!("paths_n{n}.geojson")),
                &geojson::paths(&paths, origin),
            )?;
            write_json(&dir.join(format!("front_n{n}.json")), &report)?;
            inputs.push(ComparisonInput {
                feature: feature.clone(),
                n,
                linear: report.linear.fit.clone(),
                erfc: report.erfc.fit.clone(),
                w: report.stats.w,
            });
            fronts.push(report);
        }
        outcomes.push(FeatureOutcome {
            feature: feature.clone(),
            gradient_status: model.surface.gradient_status(),
            fronts,
        });
    }

    let table = compare_models(&inputs);
    write_bytes(&out.join("comparison.csv"), table.to_csv().as_bytes())?;
    write_bytes(&out.join("comparison.txt"), table.to_text().as_bytes())?;
    let report = PipelineReport {
        origin,
        localities: ds.localities().len(),
        features: outcomes,
        table,
    };
    write_json(&out.join("report.json"), &report)?;
    Ok(report)
}
