//! Numerical core: tensors, a reverse-mode tape, parameters, Adam.

mod error;
pub mod gradcheck;
pub mod optim;
pub mod store;
pub mod tape;
pub mod tensor;

pub use error::NnError;
pub use gradcheck::{grad_check, GradCheckReport};
pub use optim::{adam_step, AdamState, Decay, LrSchedule};
pub use store::{Entry, ParameterStore};
pub use tape::{forward_backward, Tape, Var};
pub use tensor::Tensor;
