use thiserror::Error;

use crate::{dataio, field, fitting, models, sim2d, special, surface};

/// Umbrella error for callers that drive several stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] dataio::DataError),
    #[error(transparent)]
    Surface(#[from] surface::SurfaceError),
    #[error(transparent)]
    Field(#[from] field::FieldError),
    #[error(transparent)]
    Model(#[from] models::ModelError),
    #[error(transparent)]
    Fit(#[from] fitting::FitError),
    #[error(transparent)]
    Sim(#[from] sim2d::SimError),
    #[error(transparent)]
    Quadrature(#[from] special::QuadratureError),
}
