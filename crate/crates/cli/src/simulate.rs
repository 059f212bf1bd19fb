//! TOML scenarios for the 2D simulator and their on-disk runs.
//!
//! A scenario is a [`SimConfig`] written in TOML:
//!
//! ```toml
//! nx = 100
//! ny = 75
//! t_end = 1000.0
//! snapshot_times = [250.0, 500.0, 1000.0]
//! bbox = { xmin = 0.0, ymin = 0.0, xmax = 200.0, ymax = 150.0 }
//! diffusivity = { kind = "constant", eta = 2.0 }
//! tidal = { edges = ["north"] }
//!
//! [[sources]]
//! center = { x = 140.0, y = 40.0 }
//! t_trigger = 300.0
//! ```
//!
//! A run directory holds `manifest.json`, `frame_NNNN.bin` and, for grids of
//! at most [`TEXT_GRID_CELLS`] cells, `frame_NNNN.txt`.

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use isogloss_core::sim2d::{
    run, write_frames, write_text_grid, Diffusivity, Manifest, SchmidtSource, Side, SimConfig,
    SimError, TidalBoundary,
};
use isogloss_core::{BBox, Exec, Point};
use thiserror::Error;

pub const TEXT_GRID_CELLS: usize = 4096;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Sim(#[from] SimError),
}

pub fn parse_scenario(text: &str) -> Result<SimConfig, ScenarioError> {
    let table: toml::Table = text.parse()?;
    if table.is_empty() {
        return Err(SimError::NothingToSimulate.into());
    }
    let cfg: SimConfig = table.try_into()?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_scenario(path: &Path) -> Result<SimConfig, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

/// Tidal spreading from the northern edge, a Schmidt source switching on at
/// 300 yr, and a lake that blocks diffusion. 200 × 150 km at 2 km cells.
pub fn default_scenario() -> SimConfig {
    let mut cfg = SimConfig::new(BBox::new(0.0, 0.0, 200.0, 150.0), 100, 75, 1000.0);
    cfg.snapshot_times = (0..=10).map(|k| k as f64 * 100.0).collect();
    cfg.diffusivity = Diffusivity::Constant { eta: 2.0 };
    cfg.tidal = TidalBoundary {
        edges: vec![Side::North],
        band: 1,
    };
    cfg.sources = vec![SchmidtSource {
        center: Point::new(140.0, 40.0),
        t_trigger: 300.0,
        radius: Some(3.0),
    }];
    cfg.islands = vec![vec![
        Point::new(60.0, 70.0),
        Point::new(90.0, 70.0),
        Point::new(90.0, 80.0),
        Point::new(60.0, 80.0),
    ]];
    cfg
}

/// Runs the scenario and writes its frames and manifest into `dir`.
pub fn simulate_to(cfg: &SimConfig, dir: &Path, exec: Exec) -> Result<Manifest, ScenarioError> {
    let snaps = run(cfg, exec)?;
    let manifest = write_frames(dir, &snaps)?;
    let io = |p: &Path| {
        let path = p.display().to_string();
        move |source| ScenarioError::Io { path, source }
    };
    if cfg.nx * cfg.ny <= TEXT_GRID_CELLS {
        for (s, f) in snaps.iter().zip(&manifest.frames) {
            let path = dir.join(f.file.replace(".bin", ".txt"));
            let file = fs::File::create(&path).map_err(io(&path))?;
            write_text_grid(BufWriter::new(file), s.t, &s.grid).map_err(io(&path))?;
        }
    }
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(io(&path))?;
    Ok(manifest)
}
