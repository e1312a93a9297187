//! Strictly batch imitation learning by energy-based distribution matching.
//!
//! A softmax policy `π_θ(a|s) ∝ exp f_θ(s)[a]` is trained from a fixed set of
//! demonstrations. Its logits also define an energy-based model of the state
//! occupancy, `E_θ(s) = -logsumexp_a f_θ(s)[a]`, which is fit jointly with the
//! policy through a contrastive (positive phase / negative phase) loss.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, configuration and
//! the command-line front end live in the `edm` companion crate.
//!
//! Modules:
//! - [`autodiff`]: reverse-mode tape, parameter store, Adam and the MLP forward pass.
//! - [`env`]: tabular MDPs (gridworld, chain), cart-pole and the rollout engine.
//! - [`solver`]: exact soft value iteration, the inverse soft Bellman operator,
//!   occupancy measures and KL divergence.
//! - [`policy`]: the logit network, its action probabilities and state energy.
//! - [`edm`]: SGLD with a persistent buffer, the surrogate losses and the
//!   EDM / BC / RCAL trainers.
//! - [`data`]: demonstration datasets.
//! - [`eval`]: live returns, scaled returns and action-matching metrics.
#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod autodiff;
pub mod data;
pub mod edm;
pub mod env;
mod error;
pub mod eval;
pub mod numeric;
pub mod policy;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
