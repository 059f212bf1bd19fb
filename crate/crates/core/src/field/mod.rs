//! Rasters, contour lines, gradient lines and front statistics.

mod contours;
mod grid;
mod stats;
mod trace;

use thiserror::Error;

pub use contours::{default_levels, extract_contours, ContourLevel, ContourSet, Polyline};
pub use grid::Grid;
pub use stats::{front_stats, FrontStats};
pub use trace::{
    gradient_at, path_levels, sample_starts, snap_to_contour, trace_continuous, trace_from,
    trace_gradient_line, GradientPath, PathStatus, TraceOptions,
};

use crate::geom::BBox;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("grid of {nx}x{ny} cells cannot hold {len} values")]
    GridShape { nx: usize, ny: usize, len: usize },
    #[error("grid box {0:?} has no area")]
    GridBBox(BBox),
    #[error("contour level {0} is outside [0, 1]")]
    LevelOutOfRange(f64),
    #[error("point ({x}, {y}) is outside the surface hull")]
    OutsideHull { x: f64, y: f64 },
    #[error("no contour line at level {level}")]
    NoContour { level: f64 },
    #[error("start ({x}, {y}) is {distance} km from the 0.9 contour")]
    StartOffContour { x: f64, y: f64, distance: f64 },
    #[error("no complete gradient path ({truncated} truncated)")]
    NoCompletePaths { truncated: usize },
}
