//! Environments and the rollout engine.

mod cartpole;
mod tabular;

use alloc::vec::Vec;
use rand::Rng;

pub use cartpole::{build_cartpole, Cartpole, CartpoleParams, CartpoleState, LinearController};
pub use tabular::{
    build_chain, build_gridworld, single_state, GridworldSpec, TabularMdp, ACTION_NAMES,
};

use crate::numeric::sample_index;
use crate::rng::{derive_seed, stream, StreamRng};
use crate::{Error, Result};

/// Default rollout length caps.
pub const GRIDWORLD_HORIZON: usize = 200;
pub const CARTPOLE_HORIZON: usize = 500;

/// Outcome of one environment transition.
#[derive(Clone, Debug, PartialEq)]
pub struct Step<S> {
    pub next: S,
    pub reward: f64,
    pub done: bool,
}

/// An episodic environment with a discrete action set.
pub trait Environment {
    type State: Clone;

    fn name(&self) -> &str;
    fn n_actions(&self) -> usize;
    fn feature_dim(&self) -> usize;
    fn gamma(&self) -> f64;
    /// Every state's features, when the state space is finite.
    fn feature_set(&self) -> Option<Vec<Vec<f64>>> {
        None
    }
    /// Feature vector presented to policies.
    fn features(&self, state: &Self::State) -> Vec<f64>;
    fn reset(&self, rng: &mut StreamRng) -> Self::State;
    fn step(
        &self,
        state: &Self::State,
        action: usize,
        rng: &mut StreamRng,
    ) -> Result<Step<Self::State>>;
    /// Rollout length cap.
    fn horizon(&self) -> usize;
}

/// A stochastic action rule over feature vectors.
pub trait ActionRule {
    fn action_probs(&self, features: &[f64]) -> Result<Vec<f64>>;
}

impl<T: ActionRule + ?Sized> ActionRule for &T {
    fn action_probs(&self, features: &[f64]) -> Result<Vec<f64>> {
        (**self).action_probs(features)
    }
}

/// Uniformly random actions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UniformPolicy {
    pub n_actions: usize,
}

impl ActionRule for UniformPolicy {
    fn action_probs(&self, _features: &[f64]) -> Result<Vec<f64>> {
        Ok(alloc::vec![1.0 / self.n_actions as f64; self.n_actions])
    }
}

/// One recorded step of a demonstration.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub next_state: Option<Vec<f64>>,
    /// The episode ended in a terminal state (not a horizon cut).
    pub done: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub transitions: Vec<Transition>,
    /// Undiscounted sum of rewards.
    pub total_return: f64,
    /// Seed of the episode's random stream.
    pub seed: u64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

/// Draws an action by inverse CDF on the rule's probabilities.
pub fn sample_action<P: ActionRule + ?Sized>(
    policy: &P,
    features: &[f64],
    n_actions: usize,
    rng: &mut StreamRng,
) -> Result<usize> {
    let probs = policy.action_probs(features)?;
    if probs.len() != n_actions {
        return Err(Error::Dimension {
            context: "policy output".into(),
            expected: n_actions,
            found: probs.len(),
        });
    }
    Ok(sample_index(&probs, rng.random::<f64>()))
}

/// Runs one episode until a terminal state or `horizon` steps.
pub fn rollout_episode<E, P>(env: &E, policy: &P, horizon: usize, seed: u64) -> Result<Trajectory>
where
    E: Environment + ?Sized,
    P: ActionRule + ?Sized,
{
    let mut rng = stream(seed, "rollout", 0);
    let mut state = env.reset(&mut rng);
    let mut transitions = Vec::new();
    let mut total_return = 0.0;
    for _ in 0..horizon {
        let features = env.features(&state);
        let action = sample_action(policy, &features, env.n_actions(), &mut rng)?;
        let step = env.step(&state, action, &mut rng)?;
        total_return += step.reward;
        transitions.push(Transition {
            state: features,
            action,
            next_state: Some(env.features(&step.next)),
            done: step.done,
        });
        state = step.next;
        if step.done {
            break;
        }
    }
    Ok(Trajectory {
        transitions,
        total_return,
        seed,
    })
}

/// Runs `n_episodes` independently seeded episodes. Episode `i` uses the
/// stream derived from `(seed, "episode", i)`, so the result does not depend
/// on evaluation order.
pub fn rollout<E, P>(
    env: &E,
    policy: &P,
    n_episodes: usize,
    horizon: usize,
    seed: u64,
) -> Result<Vec<Trajectory>>
where
    E: Environment + ?Sized,
    P: ActionRule + ?Sized,
{
    (0..n_episodes)
        .map(|i| rollout_episode(env, policy, horizon, derive_seed(seed, "episode", i as u64)))
        .collect()
}
