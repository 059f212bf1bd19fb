//! Subcommand definitions and their implementations.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use isogloss_core::models::ErfcForm;
use isogloss_core::sim2d::frame_bytes;
use isogloss_core::sim2d::write_text_grid;
use isogloss_core::Exec;
use serde_json::json;

use crate::analysis::{build_feature, RasterSpec};
use crate::config::ProjectConfig;
use crate::error::{Stage, StageError};
use crate::evolve::{profiles_csv, sample_profiles};
use crate::pipeline::{
    feature_dir, load_input, run_pipeline, write_bytes, write_ingest, write_json,
};
use crate::serve::{evolution_model, evolution_sampling, serve, AppState, EvolutionQuery};
use crate::simulate::{default_scenario, load_scenario, simulate_to, ScenarioError};
use crate::{geojson, synthetic};

#[derive(Debug, Parser)]
#[command(
    name = "isogloss",
    version,
    about = "Gradient fronts of binary dialect features"
)]
pub struct Cli {
    /// Run every data-parallel loop on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and project a locality table; writes dataset.json and localities.geojson.
    Ingest(ProjectArgs),
    /// Surface, contours, gradient paths, fits and the comparison table.
    Pipeline(ProjectArgs),
    /// Sample the time evolution of a front profile.
    Evolve(EvolveArgs),
    /// Run a 2D scenario and write its frames.
    Simulate(SimulateArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Write one feature's raster surface and contours.
    Export(ExportArgs),
    /// Write a synthetic locality table with a known front.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args, Default)]
pub struct ProjectArgs {
    /// Flat `key = value` configuration file.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Override a configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(short, long)]
    pub input: Option<PathBuf>,
    /// Output directory [default: $ISOGLOSS_OUT or ./isogloss-out].
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

impl ProjectArgs {
    pub fn resolve(&self) -> Result<ProjectConfig, StageError> {
        let err = |e| StageError::input(Stage::Config, e);
        let mut cfg = match &self.config {
            Some(p) => ProjectConfig::load(p).map_err(err)?,
            None => ProjectConfig::default(),
        };
        for pair in &self.set {
            cfg.set_pair(pair).map_err(err)?;
        }
        if let Some(i) = &self.input {
            cfg.input = Some(i.clone());
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        cfg.validate().map_err(err)?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelArg {
    Erfc,
    Linear,
}

#[derive(Debug, Clone, Args)]
pub struct EvolveArgs {
    #[arg(long, value_enum)]
    pub model: ModelArg,
    /// Convection law: none, linear or special.
    #[arg(long, default_value = "none")]
    pub law: String,
    /// Comma-separated times (yr).
    #[arg(long, value_delimiter = ',', required = true)]
    pub times: Vec<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub s0: Option<f64>,
    #[arg(long)]
    pub chi: Option<f64>,
    #[arg(long)]
    pub s1: Option<f64>,
    /// Use the literal grouping of the erfc centre.
    #[arg(long)]
    pub literal: bool,
    #[arg(long, allow_hyphen_values = true)]
    pub s_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub s_max: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub project: ProjectArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// TOML scenario; the built-in default scenario when omitted.
    pub scenario: Option<PathBuf>,
    /// Run directory [default: <output root>/simulation/<scenario name>].
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub project: ProjectArgs,
    /// Directory whose subdirectories are simulation runs.
    #[arg(long)]
    pub sim_root: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub project: ProjectArgs,
    #[arg(long)]
    pub feature: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SynthKind {
    Erfc,
    Planar,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub kind: SynthKind,
    /// Random localities (the four box corners are added).
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// κ for erfc, slope (1/km) for planar.
    #[arg(long)]
    pub param: Option<f64>,
    #[arg(long)]
    pub output: PathBuf,
}

pub fn run(cli: Cli) -> Result<(), StageError> {
    let exec = if cli.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    };
    match cli.command {
        Command::Ingest(a) => ingest(&a.resolve()?),
        Command::Pipeline(a) => {
            let report = run_pipeline(&a.resolve()?, exec)?;
            print!("{}", report.table.to_text());
            Ok(())
        }
        Command::Evolve(a) => evolve(&a),
        Command::Simulate(a) => simulate(&a, exec),
        Command::Serve(a) => serve_cmd(&a, exec),
        Command::Export(a) => export(&a.project.resolve()?, &a.feature, exec),
        Command::Synth(a) => synth(&a),
    }
}

pub fn ingest(cfg: &ProjectConfig) -> Result<(), StageError> {
    let ds = load_input(cfg)?;
    write_ingest(&ds, &cfg.out)?;
    println!(
        "{} localities, {} features, {} observations",
        ds.localities().len(),
        ds.features().len(),
        ds.observation_count()
    );
    Ok(())
}

pub fn evolve(a: &EvolveArgs) -> Result<(), StageError> {
    let cfg = a.project.resolve()?;
    let q = EvolutionQuery {
        model: match a.model {
            ModelArg::Erfc => "erfc".into(),
            ModelArg::Linear => "linear".into(),
        },
        t: 0.0,
        law: Some(a.law.clone()),
        theta: a.theta,
        lambda: a.lambda,
        tau: a.tau,
        kappa: a.kappa,
        s0: a.s0,
        chi: a.chi,
        s1: a.s1,
        form: Some(if a.literal {
            ErfcForm::Literal
        } else {
            ErfcForm::Corrected
        }),
        s_min: a.s_min,
        s_max: a.s_max,
        n: a.n,
    };
    let model = evolution_model(&cfg, &q)
        .map_err(|e| StageError::input(Stage::Evolve, anyhow::anyhow!(e)))?;
    let profiles = sample_profiles(&model, &a.times, evolution_sampling(&q))
        .map_err(|e| StageError::input(Stage::Evolve, e))?;
    let dir = cfg.out.join("evolve");
    write_bytes(
        &dir.join("profiles.csv"),
        profiles_csv(&profiles).as_bytes(),
    )?;
    write_json(
        &dir.join("profiles.json"),
        &json!({ "model": model, "profiles": profiles }),
    )?;
    for p in &profiles {
        let c = p
            .half_crossing
            .map_or("-".to_string(), |s| format!("{s:.3}"));
        println!("t = {:>8} yr   0.5 crossing at s = {c} km", p.t);
    }
    Ok(())
}

fn scenario_error(e: ScenarioError) -> StageError {
    match e {
        ScenarioError::Sim(isogloss_core::sim2d::SimError::NonFinite { .. })
        | ScenarioError::Sim(isogloss_core::sim2d::SimError::Io { .. }) => {
            StageError::internal(Stage::Simulate, e)
        }
        e => StageError::input(Stage::Simulate, e),
    }
}

pub fn simulate(a: &SimulateArgs, exec: Exec) -> Result<(), StageError> {
    let (cfg, name) = match &a.scenario {
        Some(p) => (
            load_scenario(p).map_err(scenario_error)?,
            p.file_stem()
                .map_or("scenario".into(), |s| s.to_string_lossy().into_owned()),
        ),
        None => (default_scenario(), "default".to_string()),
    };
    let dir = a
        .out
        .clone()
        .unwrap_or_else(|| ProjectConfig::default().out.join("simulation").join(name));
    let manifest = simulate_to(&cfg, &dir, exec).map_err(scenario_error)?;
    println!(
        "{} frames written to {}",
        manifest.frames.len(),
        dir.display()
    );
    Ok(())
}

fn serve_cmd(a: &ServeArgs, exec: Exec) -> Result<(), StageError> {
    let cfg = a.project.resolve()?;
    let state = Arc::new(AppState::load(cfg, a.sim_root.clone(), exec)?);
    let rt = tokio::runtime::Runtime::new().map_err(|e| StageError::internal(Stage::Config, e))?;
    rt.block_on(serve(state, a.addr))
        .map_err(|e| StageError::internal(Stage::Config, e))
}

/// Raster as an f32 frame plus metadata, a text grid and the contours.
pub fn export(cfg: &ProjectConfig, feature: &str, exec: Exec) -> Result<(), StageError> {
    let ds = load_input(cfg)?;
    ds.feature_index(feature)
        .map_err(|e| StageError::input(Stage::Ingest, e))?;
    let spec = RasterSpec {
        nx: cfg.grid_nx,
        ny: cfg.grid_ny,
        levels: &cfg.levels,
        clamp: cfg.clamp,
    };
    let model = build_feature(&ds, feature, spec, exec)?;
    let dir: PathBuf = cfg.out.join("export").join(feature_dir(feature));
    let g = &model.grid;
    write_bytes(&dir.join("surface.bin"), &frame_bytes(g))?;
    write_json(
        &dir.join("surface.json"),
        &json!({
            "feature": feature,
            "origin": geojson::origin_member(ds.origin()),
            "bbox": g.bbox(),
            "nx": g.nx(),
            "ny": g.ny(),
            "dtype": "f32le",
            "layout": "row-major, row 0 = southern edge, NaN outside the hull",
            "file": "surface.bin",
        }),
    )?;
    let mut text = Vec::new();
    write_text_grid(&mut text, 0.0, g).map_err(|e| StageError::internal(Stage::Write, e))?;
    write_bytes(&dir.join("surface.txt"), &text)?;
    write_json(
        &dir.join("contours.geojson"),
        &geojson::contours(&model.contours, ds.origin()),
    )?;
    write_json(
        &dir.join("localities.geojson"),
        &geojson::localities(&ds, ds.feature_index(feature).ok()),
    )?;
    println!("exported {feature} to {}", dir.display());
    Ok(())
}

pub fn synth(a: &SynthArgs) -> Result<(), StageError> {
    let ds = match a.kind {
        SynthKind::Erfc => synthetic::erfc_front(a.param.unwrap_or(0.3), a.n, a.seed),
        SynthKind::Planar => synthetic::planar_front(a.param.unwrap_or(0.07), a.n, a.seed),
    };
    write_dataset(&ds, &a.output)?;
    println!(
        "{} localities written to {}; load with value_policy = fraction",
        ds.localities().len(),
        a.output.display()
    );
    Ok(())
}

pub fn write_dataset(ds: &isogloss_core::dataio::Dataset, path: &Path) -> Result<(), StageError> {
    let mut buf = Vec::new();
    ds.write_csv(&mut buf)
        .map_err(|e| StageError::internal(Stage::Write, e))?;
    write_bytes(path, &buf)
}
