//! Feature-fraction surfaces, gradient fronts and diffusion-convection models
//! for the geography of binary dialect features.
//!
//! The crate is organised bottom-up:
//!
//! - [`special`]: erfc, Γ and adaptive quadrature used by the analytic models
//! - [`dataio`]: locality tables and the local equirectangular projection
//! - [`surface`]: Delaunay triangulation and the clamped Clough-Tocher surface
//! - [`field`]: rasters, contours, steepest-descent paths and front statistics
//! - [`models`]: closed-form diffusion / diffusion-convection profiles
//! - [`fitting`]: chi-square fits of the linear and erfc fronts
//! - [`sim2d`]: explicit finite-difference solver for tidal and Schmidt spreading
//!
//! Data-parallel loops go through [`par::Exec`], which runs on rayon when the
//! `parallel` feature is enabled and sequentially otherwise.

// `!(a > b)` is used throughout to reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataio;
pub mod field;
pub mod fitting;
pub mod geom;
pub mod models;
pub mod par;
pub mod sim2d;
pub mod special;
pub mod surface;

mod error;

pub use error::Error;
pub use geom::{BBox, Point};
pub use par::Exec;

pub type Result<T, E = Error> = std::result::Result<T, E>;
