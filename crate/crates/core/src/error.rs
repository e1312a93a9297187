use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: String,
        expected: usize,
        found: usize,
    },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("non-finite gradient for parameter `{0}`")]
    NonFiniteGradient(String),
    #[error("duplicate parameter name `{0}`")]
    DuplicateParameter(String),
    #[error("soft value iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("singular linear system at pivot {0}")]
    Singular(usize),
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(
        "{0} needs (state, action, next_state) triples but the data holds state-action pairs only"
    )]
    TriplesRequired(&'static str),
    #[error(
        "non-finite loss at iteration {iteration} (loss_pi = {loss_pi}, loss_rho = {loss_rho:?})"
    )]
    NonFiniteLoss {
        iteration: usize,
        loss_pi: f64,
        loss_rho: Option<f64>,
    },
    #[error("return scaling undefined: demonstrator and random reference returns are both {0}")]
    UndefinedScaling(f64),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
