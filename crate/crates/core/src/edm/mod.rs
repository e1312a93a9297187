//! Energy-based distribution matching and its baselines.
//!
//! Each training iteration draws a demonstration mini-batch and minimizes
//! `L̂_π + L̂_ρ`, where `L̂_π` is the cross-entropy of the policy on the
//! demonstrated actions and `L̂_ρ` is the energy gap between demonstration
//! states (positive phase) and model samples (negative phase). Negative states
//! come either from SGLD chains seeded by a persistent buffer, or, on finite
//! state sets, from the exact model distribution.
//!
//! Behavioral cloning drops `L̂_ρ`; RCAL replaces it with an L1 penalty on the
//! rewards implied by inverting the soft Bellman equation.

mod buffer;
mod config;
mod exact;
mod losses;
mod sgld;
mod train;

pub use buffer::PcdBuffer;
pub use config::{Algorithm, NegativePhase, SgldConfig, TrainConfig};
pub use exact::{exact_negative_phase, model_state_distribution, ExactNegativePhase};
pub use losses::{
    implied_reward_penalty, mean_energy, policy_loss, surrogate_loss_values, surrogate_losses,
    SurrogateLosses,
};
pub use sgld::{langevin_step, sgld_sample, Energy, SgldOutput};
pub use train::{
    augment_state_only, train, train_bc, train_edm, train_rcal, CheckpointHook, EnvMeta, LogRecord,
    TrainHooks, TrainLog, TrainOutcome, TrainingSource,
};
