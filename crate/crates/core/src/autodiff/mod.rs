//! Dense tensors, a recording tape with analytic backward rules, and the
//! Adam optimizer.

mod adam;
mod gradcheck;
mod tape;
mod tensor;

pub use adam::Adam;
pub use gradcheck::{gradient_check, GradCheckReport, FD_STEP, REL_ERROR_FLOOR};
pub use tape::{Gradients, Tape, Var, KL_LOG_FLOOR};
pub use tensor::Tensor;
