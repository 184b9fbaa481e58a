//! Minimal dense reverse-mode automatic differentiation.
//!
//! Everything is a dense two-dimensional `f64` tensor (scalars are 1x1,
//! vectors are 1xN). Operations are recorded on a [`Tape`] in execution
//! order; [`Tape::backward`] walks the record in exact reverse and
//! accumulates adjoints, so shared subexpressions receive the sum of
//! their downstream contributions.
//!
//! The op set is deliberately small: it is exactly what small MLP policy
//! networks with attention-style set encoders need (matmul, elementwise
//! math, layer norm, tempered softmax, set reduction, diagonal-Gaussian
//! log densities) plus the clipping and reductions a PPO loss needs.
//!
//! Tensors are immutable after creation and safe to share across
//! threads. A tape is single-threaded; gradient exchange across workers
//! happens by explicit reduction of the dense gradients it returns.

mod check;
pub mod suite;
mod tape;
mod tensor;

pub use check::{directional_grad_check, grad_check, grad_check_multi};
pub use tape::{Tape, Var};
pub use tensor::{Tensor, TensorError};

/// Stabilizer added to the variance inside layer norm's square root.
pub const LAYER_NORM_EPS: f64 = 1e-5;
