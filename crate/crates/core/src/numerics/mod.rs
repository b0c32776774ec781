//! Dense tensors, reverse-mode differentiation and finite-difference checks.

mod gradcheck;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, GradCheckReport, ParamCheck};
pub use params::{Grad, Gradients, ParamId, ParamStore};
pub use tape::{Binary, Tape, Unary, Var, KINK_BAND};
pub use tensor::{dot, log_sum_exp, sigmoid, softmax, Tensor};
