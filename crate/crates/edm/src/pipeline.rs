//! The steps shared by the command line and sweeps: training from a run
//! configuration and evaluating the result.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use edm_core::data::{strip_actions, DemoDataset};
use edm_core::edm::{
    augment_state_only, train, Algorithm, PcdBuffer, TrainHooks, TrainOutcome, TrainingSource,
};
use edm_core::eval::{action_matching_with, scaled_return, EvalReport};
use edm_core::policy::PolicyNet;
use edm_core::rng::derive_seed;

use crate::checkpoint::save_checkpoint;
use crate::config::RunConfig;
use crate::envspec::{build_expert, AnyEnv};
use crate::error::{Error, Result};

/// Held-out trajectories generated per sweep cell for action matching.
pub const HELDOUT_TRAJECTORIES: usize = 5;

/// Trains `algo` on `data` (plus optional unlabeled states).
pub fn train_policy(
    cfg: &RunConfig,
    env: &AnyEnv,
    data: &DemoDataset,
    state_only: Option<&[Vec<f64>]>,
    algo: Algorithm,
    seed: u64,
    checkpoint_dir: Option<&Path>,
) -> Result<TrainOutcome> {
    let meta = env.meta();
    if data.header.state_dim != meta.state_dim || data.header.n_actions != meta.n_actions {
        return Err(Error::Config(format!(
            "dataset shape ({} features, {} actions) does not match environment `{}` ({} features, {} actions)",
            data.header.state_dim,
            data.header.n_actions,
            env.name(),
            meta.state_dim,
            meta.n_actions
        )));
    }
    let mut source = TrainingSource::from(data);
    if let Some(extra) = state_only {
        source = augment_state_only(source, extra.to_vec())?;
    }
    let tcfg = cfg.train_config(algo, meta.feature_set.is_some(), seed);
    let buffer =
        if algo == Algorithm::Edm && tcfg.negative_phase == edm_core::edm::NegativePhase::Sgld {
            let pool: Vec<Vec<f64>> = source.positive_states().cloned().collect();
            Some(PcdBuffer::from_states(
                &pool,
                cfg.buffer_capacity,
                cfg.buffer_reinit_prob,
            )?)
        } else {
            None
        };
    let start = Instant::now();
    let mut hooks = TrainHooks::default();
    if cfg.log_wall_time {
        hooks.clock = Some(Box::new(move || start.elapsed().as_secs_f64() * 1e3));
    }
    if let Some(dir) = checkpoint_dir {
        let dir: PathBuf = dir.to_path_buf();
        hooks.on_checkpoint = Some(Box::new(move |it: usize, net: &PolicyNet| {
            save_checkpoint(net, &dir.join(format!("checkpoint-{it:06}.txt")))
                .map_err(|e| edm_core::Error::Contract(e.to_string()))
        }));
    }
    Ok(train(&meta, &source, &tcfg, &cfg.sgld, buffer, hooks)?)
}

/// Live-rollout returns, scaled by the dataset's references, plus action
/// matching when held-out demonstrations are given.
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    cfg: &RunConfig,
    env: &AnyEnv,
    net: &PolicyNet,
    data: &DemoDataset,
    heldout: Option<&DemoDataset>,
    algo: &str,
    seed: u64,
) -> Result<EvalReport> {
    let raw = env.average_return(net, cfg.eval_episodes, seed)?;
    let scaled = scaled_return(raw.mean, &data.header)?;
    let matching = match heldout {
        Some(h) => Some(action_matching_with(
            net,
            &h.transitions(),
            h.header.n_actions,
            cfg.eval_reduction,
        )?),
        None => None,
    };
    Ok(EvalReport {
        algo: algo.into(),
        env: env.name(),
        n_traj: data.header.n_trajectories,
        seed,
        raw_return: raw,
        scaled_return: scaled,
        matching,
    })
}

/// Every `(algo, n_traj, seed)` cell of the configured sweep. Cells run in
/// parallel; each derives its randomness from its own seed only.
pub fn run_sweep(cfg: &RunConfig) -> Result<Vec<EvalReport>> {
    let env = cfg.env.build()?;
    let (expert, _) = build_expert(&env, &cfg.solver)?;
    let seeds: Vec<u64> = (0..cfg.sweep_seeds).map(|i| cfg.seed + i).collect();
    let datasets: Vec<((usize, u64), DemoDataset, DemoDataset)> = cfg
        .sweep_n_traj
        .iter()
        .flat_map(|&n| seeds.iter().map(move |&s| (n, s)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(n, s)| {
            let data = env.generate(&expert, n, s)?;
            let heldout =
                env.generate(&expert, HELDOUT_TRAJECTORIES, derive_seed(s, "heldout", 0))?;
            Ok(((n, s), data, heldout))
        })
        .collect::<Result<_>>()?;
    let cells: Vec<(Algorithm, usize)> = cfg
        .sweep_algos
        .iter()
        .flat_map(|&a| (0..datasets.len()).map(move |i| (a, i)))
        .collect();
    cells
        .into_par_iter()
        .map(|(algo, i)| {
            let ((_, seed), data, heldout) = &datasets[i];
            let out = train_policy(cfg, &env, data, None, algo, *seed, None)?;
            evaluate(
                cfg,
                &env,
                &out.net,
                data,
                Some(heldout),
                &algo.to_string(),
                *seed,
            )
        })
        .collect()
}

/// States of `data` with the actions dropped, for semi-supervised runs.
pub fn state_only_from(data: &DemoDataset) -> Vec<Vec<f64>> {
    strip_actions(data)
}
