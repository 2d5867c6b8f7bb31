//! The infinite-system growth machinery: block enlargement, superblock
//! operator application, density-matrix truncation, center-matrix
//! extraction, and the growth loop itself.

mod block;
mod run;
mod superblock;
mod truncate;

pub use block::{Block, Side};
pub use run::{
    idmrg_run, IdmrgRun, LanczosModeConfig, MpsRecord, MpsStep, PredictorChoice, RunConfig,
    StepRecord, DEFAULT_DEGENERACY_TOL,
};
pub use superblock::{superblock_apply, CenterTensor, SuperblockOp};
pub use truncate::{center_matrix, density_matrices, truncation_operator, Truncation};

use thiserror::Error;

use crate::numerics::NumericsError;
use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("site {site} is not adjacent to a {side:?} block of {n_sites} sites")]
    SiteNotAdjacent {
        site: usize,
        side: Side,
        n_sites: usize,
    },

    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    #[error("wave function norm deviates from 1 by {deviation:e}")]
    NotNormalized { deviation: f64 },

    #[error("invalid density matrix: {reason}")]
    InvalidDensityMatrix { reason: String },

    #[error("degenerate weights span the entire spectrum; no multiplet-respecting cut below m={m}")]
    AllWeightsDegenerate { m: usize },

    #[error("invalid run configuration field {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("numerical failure at 2N={two_n}: {source}")]
    StepFailed {
        two_n: usize,
        #[source]
        source: NumericsError,
    },

    #[error(transparent)]
    Numerics(#[from] NumericsError),

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error(transparent)]
    Predictor(#[from] crate::predictor::PredictorError),
}

pub type EngineResult<T> = Result<T, EngineError>;
