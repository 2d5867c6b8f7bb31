//! Dense real linear algebra kernels and the Lanczos iterative eigensolver.
//!
//! Everything here is written for the matrix sizes the growth loop actually
//! produces (a few hundred rows at most), favouring determinism and accuracy
//! over asymptotic cleverness: cyclic Jacobi for symmetric eigenproblems,
//! one-sided Jacobi for singular values, and fully reorthogonalized Lanczos
//! for the large implicit superblock operator.

mod eig;
mod lanczos;
mod matrix;
mod svd;

pub use eig::{sym_eig_desc, SpectralDecomposition};
pub(crate) use eig::fix_sign;
pub use lanczos::{lanczos_ground, LanczosMode, LanczosOptions, LanczosOutcome};
pub use matrix::DenseMatrix;
pub use svd::{pinv_cutoff, singular_values};

use thiserror::Error;

/// Default residual tolerance for [`lanczos_ground`].
pub const DEFAULT_LANCZOS_TOL: f64 = 1e-12;
/// Default cap on Lanczos operator applications.
pub const DEFAULT_LANCZOS_MAX_ITER: usize = 500;
/// Default relative singular-value cutoff for [`pinv_cutoff`].
pub const DEFAULT_PINV_EPS: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum NumericsError {
    /// Input matrix deviates from symmetry by more than the stated relative
    /// tolerance.
    #[error("matrix not symmetric: relative asymmetry {asymmetry:e} exceeds {tolerance:e}")]
    NonSymmetric { asymmetry: f64, tolerance: f64 },

    /// A NaN or infinity showed up where only finite entries are admitted.
    #[error("non-finite entry in input")]
    NonFinite,

    /// Lanczos was started from the zero vector.
    #[error("Lanczos start vector has zero norm")]
    ZeroStartVector,

    /// Lanczos exhausted its iteration budget; the best estimate so far is
    /// attached for post-mortem use.
    #[error("Lanczos did not converge in {iterations} operator applications (best energy {best_energy:e})")]
    NoConvergence {
        best_energy: f64,
        iterations: usize,
    },

    /// Every singular value fell below the pseudo-inverse cutoff.
    #[error("all singular values below cutoff; pseudo-inverse has rank zero")]
    AllSingularValuesCut,

    /// Operand shapes do not agree.
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
}

pub type NumericsResult<T> = Result<T, NumericsError>;
