//! Infinite-system DMRG for open, dimerized spin-1/2 Heisenberg chains.
//!
//! The crate grows a chain two sites at a time, keeping at most `m` block
//! states per side, and warm-starts each superblock diagonalization with a
//! predicted trial wave function. Two predictors are provided: the 2-site
//! shift of the renormalized wave function through the `L`/`R` basis
//! adjustment matrices, and the center-matrix inverse construction. The
//! quality of a prediction is tracked through its fidelity error against the
//! subsequently converged state, and everything renormalized can be checked
//! against brute-force exact diagonalization in [`oracle`].
//!
//! All numerics are generic over the scalar type through [`Scalar`]; the
//! chains studied here have real ground-state wave functions (open boundary,
//! time-reversal symmetric), so no complex arithmetic is needed. Concrete
//! `f64` aliases for the main types live at the crate root.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive};

pub mod engine;
pub mod model;
pub mod numerics;
pub mod oracle;
pub mod predictor;

/// Floating-point scalar the solvers operate on: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + AddAssign
        + SubAssign
        + MulAssign
        + DivAssign
        + Sum
        + Default
        + Debug
        + Display
        + LowerExp
        + Send
        + Sync
        + 'static
{
}

/// Converts an `f64` literal (tolerances, couplings, ...) into the working
/// scalar type.
#[inline]
pub fn real<S: Scalar>(x: f64) -> S {
    S::from_f64(x).expect("literal representable in scalar type")
}

pub type Mat64 = numerics::DenseMatrix<f64>;
pub type Mat32 = numerics::DenseMatrix<f32>;
pub type Center64 = engine::CenterTensor<f64>;
pub type Block64 = engine::Block<f64>;
pub type FullState64 = oracle::FullStateVector<f64>;
