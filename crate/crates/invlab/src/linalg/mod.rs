//! Dense vector/matrix arithmetic, singular values, and 2-D convolution.
//!
//! Everything here is sized for the lab's workloads: vectors of dimension
//! up to a few thousand, matrices up to roughly 128x128, and 64x64-ish
//! space-time fields. All operations are pure functions of their inputs.

mod grid;
mod mask;
mod matrix;
mod vector;

pub use grid::{Grid2D, GridIoError};
pub use mask::CoordMask;
pub use matrix::Matrix;
pub use vector::Vector;
