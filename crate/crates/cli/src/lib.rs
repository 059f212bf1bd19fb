//! Command-line pipeline and HTTP service over `isogloss-core`.

// `!(a > b)` is used throughout to reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod commands;
pub mod config;
pub mod error;
pub mod evolve;
pub mod geojson;
pub mod pipeline;
pub mod serve;
pub mod simulate;
pub mod synthetic;

pub use config::ProjectConfig;
pub use error::{ErrorKind, Stage, StageError};
