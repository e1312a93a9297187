//! Minimal reverse-mode automatic differentiation over dense `f64` arrays.
//!
//! Operations are recorded on a [`Tape`] in execution order; [`Tape::backward`]
//! replays them in reverse. Only what a multilayer perceptron policy needs is
//! provided: matrix products, bias adds, elementwise activations, log-sum-exp
//! reductions, row gathers and a handful of scalar ops. Broadcasting is limited
//! to bias-add and scalar ops.
//!
//! Leaves are either differentiable or constants. Parameters are always
//! differentiable; network inputs are constants unless the caller opts in, which
//! is how Langevin sampling obtains `∂E/∂s`.

mod mlp;
mod params;
mod tape;
mod tensor;

pub use mlp::{forward_mlp, Activation, Architecture};
pub use params::{AdamConfig, BoundParams, Param, ParamStore};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
