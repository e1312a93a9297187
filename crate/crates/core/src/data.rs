//! Demonstration datasets: generation with baked-in reference returns,
//! splitting, and action stripping.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::edm::TrainingSource;
use crate::env::{rollout, ActionRule, Environment, Transition, UniformPolicy};
use crate::rng::derive_seed;
use crate::{Error, Result};

pub const DATASET_VERSION: u32 = 1;
/// Episodes used to estimate each reference return.
pub const REFERENCE_EPISODES: usize = 1000;
/// Demonstration budgets, in trajectories.
pub const DEMO_SIZES: [usize; 5] = [1, 3, 7, 10, 15];

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetHeader {
    pub env_name: String,
    pub state_dim: usize,
    pub n_actions: usize,
    pub gamma: f64,
    pub n_trajectories: usize,
    /// Free-form description of the policy that produced the data.
    pub demonstrator: String,
    /// Mean undiscounted return of the demonstrator (scales to 1).
    pub demonstrator_return: f64,
    /// Mean undiscounted return of a uniformly random policy (scales to 0).
    pub random_return: f64,
    pub seed: u64,
    pub version: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DemoEpisode {
    pub id: u64,
    pub transitions: Vec<Transition>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DemoDataset {
    pub header: DatasetHeader,
    pub episodes: Vec<DemoEpisode>,
}

impl DemoDataset {
    pub fn new(header: DatasetHeader, episodes: Vec<DemoEpisode>) -> Result<Self> {
        let ds = Self { header, episodes };
        ds.validate()?;
        Ok(ds)
    }

    /// Checks the body against the header.
    pub fn validate(&self) -> Result<()> {
        let h = &self.header;
        if h.version != DATASET_VERSION {
            return Err(Error::Contract(format!(
                "dataset version {} is not supported (expected {DATASET_VERSION})",
                h.version
            )));
        }
        if h.n_trajectories != self.episodes.len() {
            return Err(Error::Dimension {
                context: "trajectories in dataset body".into(),
                expected: h.n_trajectories,
                found: self.episodes.len(),
            });
        }
        let mut ids: Vec<u64> = self.episodes.iter().map(|e| e.id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Contract(format!("duplicate episode id {}", w[0])));
        }
        for e in &self.episodes {
            for t in &e.transitions {
                let dims =
                    core::iter::once(t.state.len()).chain(t.next_state.as_ref().map(Vec::len));
                for d in dims {
                    if d != h.state_dim {
                        return Err(Error::Dimension {
                            context: format!("state in episode {}", e.id),
                            expected: h.state_dim,
                            found: d,
                        });
                    }
                }
                if t.action >= h.n_actions {
                    return Err(Error::Contract(format!(
                        "action {} in episode {} out of range for {} actions",
                        t.action, e.id, h.n_actions
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n_transitions(&self) -> usize {
        self.episodes.iter().map(|e| e.transitions.len()).sum()
    }

    /// All transitions, episode by episode.
    pub fn transitions(&self) -> Vec<Transition> {
        self.episodes
            .iter()
            .flat_map(|e| e.transitions.iter().cloned())
            .collect()
    }

    /// Whether every non-terminal transition records its successor.
    pub fn has_triples(&self) -> bool {
        self.episodes
            .iter()
            .flat_map(|e| &e.transitions)
            .all(|t| t.done || t.next_state.is_some())
    }

    /// The first `k` episodes and the rest.
    pub fn split(&self, k: usize) -> Result<(DemoDataset, DemoDataset)> {
        if k > self.episodes.len() {
            return Err(Error::Contract(format!(
                "cannot take {k} of {} episodes",
                self.episodes.len()
            )));
        }
        let part = |eps: &[DemoEpisode]| DemoDataset {
            header: DatasetHeader {
                n_trajectories: eps.len(),
                ..self.header.clone()
            },
            episodes: eps.to_vec(),
        };
        Ok((part(&self.episodes[..k]), part(&self.episodes[k..])))
    }
}

impl From<&DemoDataset> for TrainingSource {
    fn from(ds: &DemoDataset) -> Self {
        TrainingSource::new(ds.transitions())
    }
}

/// Mean returns of `expert` and of uniformly random actions, each over
/// [`REFERENCE_EPISODES`] episodes.
pub fn reference_returns<E, P>(env: &E, expert: &P, seed: u64) -> Result<(f64, f64)>
where
    E: Environment + ?Sized,
    P: ActionRule + ?Sized,
{
    let mean = |trajs: Vec<crate::env::Trajectory>| {
        trajs.iter().map(|t| t.total_return).sum::<f64>() / trajs.len() as f64
    };
    let horizon = env.horizon();
    let demo = rollout(
        env,
        expert,
        REFERENCE_EPISODES,
        horizon,
        derive_seed(seed, "reference-expert", 0),
    )?;
    let uniform = UniformPolicy {
        n_actions: env.n_actions(),
    };
    let random = rollout(
        env,
        &uniform,
        REFERENCE_EPISODES,
        horizon,
        derive_seed(seed, "reference-random", 0),
    )?;
    Ok((mean(demo), mean(random)))
}

/// Rolls out `n_traj` expert episodes, recording full triples.
pub fn generate_demonstrations<E, P>(
    env: &E,
    expert: &P,
    demonstrator: &str,
    n_traj: usize,
    seed: u64,
) -> Result<DemoDataset>
where
    E: Environment + ?Sized,
    P: ActionRule + ?Sized,
{
    let trajs = rollout(
        env,
        expert,
        n_traj,
        env.horizon(),
        derive_seed(seed, "demos", 0),
    )?;
    let (demonstrator_return, random_return) = reference_returns(env, expert, seed)?;
    let header = DatasetHeader {
        env_name: env.name().into(),
        state_dim: env.feature_dim(),
        n_actions: env.n_actions(),
        gamma: env.gamma(),
        n_trajectories: n_traj,
        demonstrator: demonstrator.into(),
        demonstrator_return,
        random_return,
        seed,
        version: DATASET_VERSION,
    };
    let episodes = trajs
        .into_iter()
        .enumerate()
        .map(|(i, t)| DemoEpisode {
            id: i as u64,
            transitions: t.transitions,
        })
        .collect();
    DemoDataset::new(header, episodes)
}

/// State vectors of every transition, in order.
pub fn strip_actions(ds: &DemoDataset) -> Vec<Vec<f64>> {
    ds.episodes
        .iter()
        .flat_map(|e| e.transitions.iter().map(|t| t.state.clone()))
        .collect()
}
