use std::fmt;

use serde::Serialize;

/// Pipeline stages, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Ingest,
    Surface,
    Raster,
    Contours,
    Starts,
    Trace,
    Stats,
    Fit,
    Compare,
    Evolve,
    Simulate,
    Write,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Surface => "surface",
            Stage::Raster => "raster",
            Stage::Contours => "contours",
            Stage::Starts => "starts",
            Stage::Trace => "trace",
            Stage::Stats => "stats",
            Stage::Fit => "fit",
            Stage::Compare => "compare",
            Stage::Evolve => "evolve",
            Stage::Simulate => "simulate",
            Stage::Write => "write",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Bad input (exit code 2) or a failure of our own (exit code 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Input,
    Internal,
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct StageError {
    pub stage: Stage,
    pub kind: ErrorKind,
    #[source]
    pub source: anyhow::Error,
}

impl StageError {
    pub fn input(stage: Stage, e: impl Into<anyhow::Error>) -> Self {
        Self {
            stage,
            kind: ErrorKind::Input,
            source: e.into(),
        }
    }

    pub fn internal(stage: Stage, e: impl Into<anyhow::Error>) -> Self {
        Self {
            stage,
            kind: ErrorKind::Internal,
            source: e.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.kind {
            ErrorKind::Input => 2,
            ErrorKind::Internal => 1,
        }
    }
}
