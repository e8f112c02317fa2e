//! Dense tensors, reverse-mode differentiation and training numerics.

mod gradcheck;
mod kernels;
mod optim;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, grad_check_params, relative_error, GradCheckReport};
pub use kernels::{batch_norm, gelu, leaky_relu, relu, softmax, GeluKind};
pub use optim::{cosine_annealing_lr, AdamState};
pub use tape::{Gradients, Index, LinearOperator, Tape, Var};
pub use tensor::Tensor;
