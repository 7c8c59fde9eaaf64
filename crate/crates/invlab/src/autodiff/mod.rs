//! Minimal reverse-mode differentiation over dense fields.
//!
//! The node set is deliberately closed: exactly the operations needed by the
//! PDE and moment losses plus a small dense generator. No broadcasting, no
//! higher-order derivatives, no learnable convolution kernels.

mod gradcheck;
mod tape;
mod tensor;

pub use gradcheck::{central_difference, grad_check, GradCheckOptions, GradCheckReport, ParamCheck};
pub use tape::{Activation, NodeId, Tape, TapeError};
pub use tensor::Tensor;
