//! Invariance-constrained generative optimization lab.
//!
//! Three workloads share one numeric core:
//!
//! * an exactly analyzable linear minimax game (closed-form equilibria,
//!   gradient-descent instability, extra-gradient stability), see [`toygame`];
//! * data-free surrogates for Burgers' equation driven by a differentiable
//!   PDE residual, checked against an explicit Euler reference, see [`burgers`];
//! * synthesis of binary microstructures matching statistical moments
//!   (volume fraction and two-point correlation), see [`micro`].
//!
//! The numeric core ([`linalg`], [`autodiff`]) is generic over the scalar
//! type through [`scalar::Real`]; the concrete `f64` instantiations used by
//! the applications are re-exported at the crate root.

pub mod autodiff;
pub mod burgers;
pub mod linalg;
pub mod micro;
pub mod scalar;
pub mod toygame;
pub mod trainer;

pub use scalar::Real;

/// Dense vector over `f64`, the working scalar type of the applications.
pub type Vector = linalg::Vector<f64>;
/// Dense row-major matrix over `f64`.
pub type Matrix = linalg::Matrix<f64>;
/// Space-time field over `f64` (rows are space, columns are time).
pub type Grid2D = linalg::Grid2D<f64>;
/// Reverse-mode tape over `f64`.
pub type Tape = autodiff::Tape<f64>;
/// Tape tensor over `f64`.
pub type Tensor = autodiff::Tensor<f64>;
