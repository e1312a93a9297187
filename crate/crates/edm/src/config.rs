//! Run configuration: built-in defaults, overridden by a `key = value` file,
//! overridden by `--set key=value` flags. Unknown keys are errors.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use edm_core::autodiff::Activation;
use edm_core::edm::{Algorithm, NegativePhase, PcdBuffer, SgldConfig, TrainConfig};
use edm_core::eval::{Reduction, EVAL_EPISODES};
use edm_core::solver::SoftViConfig;

use crate::envspec::EnvSpec;
use crate::error::{parse_error, read, Error, Result};
use crate::text::{fmt_list, key_values, parse_f64, parse_list};

/// Where a key's value came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Source {
    Default,
    File(PathBuf),
    Flag,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Default => f.write_str("default"),
            Source::File(p) => write!(f, "file {}", p.display()),
            Source::Flag => f.write_str("flag"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Root of every random stream in the run.
    pub seed: u64,
    pub env: EnvSpec,
    pub train: TrainConfig,
    /// `None` picks exact on finite state spaces and SGLD otherwise.
    pub negative_phase: Option<NegativePhase>,
    pub log_wall_time: bool,
    pub sgld: SgldConfig,
    pub buffer_capacity: usize,
    pub buffer_reinit_prob: f64,
    pub eval_episodes: usize,
    pub eval_reduction: Reduction,
    pub solver: SoftViConfig,
    pub sweep_algos: Vec<Algorithm>,
    pub sweep_n_traj: Vec<usize>,
    /// Sweep seeds are `0..sweep_seeds`.
    pub sweep_seeds: u64,
    provenance: BTreeMap<&'static str, Source>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            env: EnvSpec::default(),
            train: TrainConfig::default(),
            negative_phase: None,
            log_wall_time: false,
            sgld: SgldConfig::default(),
            buffer_capacity: PcdBuffer::DEFAULT_CAPACITY,
            buffer_reinit_prob: PcdBuffer::DEFAULT_REINIT_PROB,
            eval_episodes: EVAL_EPISODES,
            eval_reduction: Reduction::Macro,
            solver: SoftViConfig::default(),
            sweep_algos: vec![Algorithm::Edm, Algorithm::Bc, Algorithm::Rcal],
            sweep_n_traj: edm_core::data::DEMO_SIZES.to_vec(),
            sweep_seeds: 20,
            provenance: BTreeMap::new(),
        }
    }
}

const OWN_KEYS: [&str; 27] = [
    "seed",
    "train.batch_size",
    "train.iterations",
    "train.learning_rate",
    "train.algo",
    "train.rcal_lambda",
    "train.negative_phase",
    "train.occupancy_weight",
    "train.hidden",
    "train.activation",
    "train.log_interval",
    "train.checkpoint_interval",
    "train.log_wall_time",
    "sgld.step_size",
    "sgld.noise",
    "sgld.chain_length",
    "sgld.clamp",
    "buffer.capacity",
    "buffer.reinit_prob",
    "eval.episodes",
    "eval.reduction",
    "solver.tolerance",
    "solver.max_iterations",
    "solver.temperature",
    "sweep.algos",
    "sweep.n_traj",
    "sweep.seeds",
];

impl RunConfig {
    /// Every recognised key.
    pub fn keys() -> Vec<&'static str> {
        let env = EnvSpec::KEYS.iter().map(|k| match *k {
            "kind" => "env.kind",
            "width" => "env.width",
            "height" => "env.height",
            "slip" => "env.slip",
            "goal_reward" => "env.goal_reward",
            "step_cost" => "env.step_cost",
            "gamma" => "env.gamma",
            "horizon" => "env.horizon",
            "n_states" => "env.n_states",
            "end_reward" => "env.end_reward",
            "reward" => "env.reward",
            "n_actions" => "env.n_actions",
            other => unreachable!("env key {other} has no config name"),
        });
        OWN_KEYS.iter().copied().chain(env).collect()
    }

    /// Defaults, then `file`, then `overrides` (`key=value`).
    pub fn resolve(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(path) = file {
            let text = read(path)?;
            for kv in key_values(path, &text) {
                let (line, key, value) = kv?;
                cfg.set(key, value, Source::File(path.to_path_buf()))
                    .map_err(|e| parse_error(path, line, e.to_string()))?;
            }
        }
        for o in overrides {
            let (key, value) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{o}` is not `key=value`")))?;
            cfg.set(key.trim(), value.trim(), Source::Flag)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str, source: Source) -> Result<()> {
        let canonical = Self::keys()
            .into_iter()
            .find(|k| *k == key)
            .ok_or_else(|| Error::Config(format!("unknown configuration key `{key}`")))?;
        self.assign(key, value)
            .map_err(|m| Error::Config(format!("`{key}`: {m}")))?;
        self.provenance.insert(canonical, source);
        Ok(())
    }

    fn assign(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let bad = || format!("invalid value `{value}`");
        let float = || parse_f64(value).ok_or_else(bad);
        let count = || value.parse::<usize>().map_err(|_| bad());
        let flag = || value.parse::<bool>().map_err(|_| bad());
        if let Some(env_key) = key.strip_prefix("env.") {
            return self.env.set(env_key, value);
        }
        match key {
            "seed" => self.seed = value.parse().map_err(|_| bad())?,
            "train.batch_size" => self.train.batch_size = count()?,
            "train.iterations" => self.train.iterations = count()?,
            "train.learning_rate" => self.train.learning_rate = float()?,
            "train.algo" => {
                self.train.algorithm = value.parse().map_err(|e: edm_core::Error| e.to_string())?
            }
            "train.rcal_lambda" => self.train.rcal_lambda = float()?,
            "train.negative_phase" => {
                self.negative_phase = match value {
                    "auto" => None,
                    v => Some(v.parse().map_err(|e: edm_core::Error| e.to_string())?),
                }
            }
            "train.occupancy_weight" => self.train.occupancy_weight = float()?,
            "train.hidden" => self.train.hidden = parse_list(value).ok_or_else(bad)?,
            "train.activation" => {
                self.train.activation = value.parse::<Activation>().map_err(|e| e.to_string())?
            }
            "train.log_interval" => self.train.log_interval = count()?,
            "train.checkpoint_interval" => self.train.checkpoint_interval = count()?,
            "train.log_wall_time" => self.log_wall_time = flag()?,
            "sgld.step_size" => self.sgld.step_size = float()?,
            "sgld.noise" => self.sgld.noise = float()?,
            "sgld.chain_length" => self.sgld.chain_length = count()?,
            "sgld.clamp" => self.sgld.clamp_to_init_range = flag()?,
            "buffer.capacity" => self.buffer_capacity = count()?,
            "buffer.reinit_prob" => self.buffer_reinit_prob = float()?,
            "eval.episodes" => self.eval_episodes = count()?,
            "eval.reduction" => {
                self.eval_reduction = value.parse().map_err(|e: edm_core::Error| e.to_string())?
            }
            "solver.tolerance" => self.solver.tolerance = float()?,
            "solver.max_iterations" => self.solver.max_iterations = count()?,
            "solver.temperature" => self.solver.temperature = float()?,
            "sweep.algos" => {
                self.sweep_algos = value
                    .split(',')
                    .map(|a| a.trim().parse::<Algorithm>().map_err(|e| e.to_string()))
                    .collect::<std::result::Result<_, _>>()?
            }
            "sweep.n_traj" => self.sweep_n_traj = parse_list(value).ok_or_else(bad)?,
            "sweep.seeds" => self.sweep_seeds = value.parse().map_err(|_| bad())?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Canonical text of a key's current value.
    pub fn get(&self, key: &str) -> Option<String> {
        if let Some(env_key) = key.strip_prefix("env.") {
            return self.env.get(env_key);
        }
        Some(match key {
            "seed" => self.seed.to_string(),
            "train.batch_size" => self.train.batch_size.to_string(),
            "train.iterations" => self.train.iterations.to_string(),
            "train.learning_rate" => self.train.learning_rate.to_string(),
            "train.algo" => self.train.algorithm.to_string(),
            "train.rcal_lambda" => self.train.rcal_lambda.to_string(),
            "train.negative_phase" => self.negative_phase.map_or("auto".into(), |p| p.to_string()),
            "train.occupancy_weight" => self.train.occupancy_weight.to_string(),
            "train.hidden" => fmt_list(&self.train.hidden),
            "train.activation" => self.train.activation.to_string(),
            "train.log_interval" => self.train.log_interval.to_string(),
            "train.checkpoint_interval" => self.train.checkpoint_interval.to_string(),
            "train.log_wall_time" => self.log_wall_time.to_string(),
            "sgld.step_size" => self.sgld.step_size.to_string(),
            "sgld.noise" => self.sgld.noise.to_string(),
            "sgld.chain_length" => self.sgld.chain_length.to_string(),
            "sgld.clamp" => self.sgld.clamp_to_init_range.to_string(),
            "buffer.capacity" => self.buffer_capacity.to_string(),
            "buffer.reinit_prob" => self.buffer_reinit_prob.to_string(),
            "eval.episodes" => self.eval_episodes.to_string(),
            "eval.reduction" => self.eval_reduction.to_string(),
            "solver.tolerance" => self.solver.tolerance.to_string(),
            "solver.max_iterations" => self.solver.max_iterations.to_string(),
            "solver.temperature" => self.solver.temperature.to_string(),
            "sweep.algos" => fmt_list(&self.sweep_algos),
            "sweep.n_traj" => fmt_list(&self.sweep_n_traj),
            "sweep.seeds" => self.sweep_seeds.to_string(),
            _ => return None,
        })
    }

    pub fn source(&self, key: &str) -> Source {
        self.provenance.get(key).cloned().unwrap_or(Source::Default)
    }

    /// Every key with its value and origin, one per line.
    pub fn describe(&self) -> String {
        Self::keys()
            .into_iter()
            .map(|k| format!("{k} = {}  # {}\n", self.get(k).unwrap(), self.source(k)))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.sgld.validate()?;
        if self.buffer_capacity == 0 || !(0.0..=1.0).contains(&self.buffer_reinit_prob) {
            return Err(Error::Config(
                "buffer needs capacity ≥ 1 and reinit_prob ∈ [0, 1]".into(),
            ));
        }
        if self.eval_episodes == 0 {
            return Err(Error::Config("eval.episodes must be at least 1".into()));
        }
        Ok(())
    }

    /// Training settings for `algo` with the run seed.
    pub fn train_config(&self, algo: Algorithm, finite_states: bool, seed: u64) -> TrainConfig {
        let phase = self.negative_phase.unwrap_or(if finite_states {
            NegativePhase::Exact
        } else {
            NegativePhase::Sgld
        });
        TrainConfig {
            algorithm: algo,
            seed,
            negative_phase: phase,
            ..self.train.clone()
        }
    }
}
