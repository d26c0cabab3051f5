//! Tensors, tape-based reverse-mode differentiation, Adagrad and gradient
//! checking.

mod check;
mod param;
mod tape;
mod tensor;

use thiserror::Error;

pub use check::{finite_diff_check, finite_diff_check_subset, relative_error, GradCheckReport};
pub use param::{ParamId, ParamStore, Parameter, ADAGRAD_EPS, ADAGRAD_INIT_ACC};
pub use tape::{Axis, Buf, Kernel, NodeId, ParamGrads, Tape, PICK_EPS};
pub use tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GradError {
    #[error("{kernel}: incompatible input dims {dims:?}")]
    DimMismatch { kernel: &'static str, dims: Vec<(usize, usize)> },
    #[error("{kernel}: index {index} out of range for length {len}")]
    IndexOutOfRange { kernel: &'static str, index: usize, len: usize },
    #[error("loss must be scalar, got dims {dims:?}")]
    NonScalarLoss { dims: Vec<usize> },
    #[error("tensor dims {dims:?} do not match data length {len}")]
    BadShape { dims: Vec<usize>, len: usize },
    #[error("non-finite loss while perturbing {param}[{index}]")]
    NonFinite { param: String, index: usize },
    #[error("duplicate parameter name {0}")]
    DuplicateParam(String),
    #[error("missing parameter {0}")]
    MissingParam(String),
}
