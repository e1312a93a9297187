use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use super::{
    exact_negative_phase, implied_reward_penalty, mean_energy, model_state_distribution,
    policy_loss, sgld_sample, Algorithm, NegativePhase, PcdBuffer, SgldConfig, TrainConfig,
};
use crate::autodiff::{AdamConfig, Architecture, Tape, Var};
use crate::env::{Environment, Transition};
use crate::policy::PolicyNet;
use crate::rng::stream;
use crate::solver::kl_divergence;
use crate::{Error, Result};

/// What a trainer needs to know about the environment.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvMeta {
    pub state_dim: usize,
    pub n_actions: usize,
    pub gamma: f64,
    /// Every state's feature vector, when the state space is finite.
    pub feature_set: Option<Vec<Vec<f64>>>,
}

impl EnvMeta {
    pub fn from_env<E: Environment + ?Sized>(env: &E) -> Self {
        Self {
            state_dim: env.feature_dim(),
            n_actions: env.n_actions(),
            gamma: env.gamma(),
            feature_set: env.feature_set(),
        }
    }
}

/// Demonstrated transitions plus optional unlabeled states.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingSource {
    transitions: Vec<Transition>,
    state_only: Vec<Vec<f64>>,
}

impl TrainingSource {
    pub fn new(transitions: Vec<Transition>) -> Self {
        Self {
            transitions,
            state_only: Vec::new(),
        }
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn state_only(&self) -> &[Vec<f64>] {
        &self.state_only
    }

    /// States seen by the positive phase: demonstrated, then state-only.
    pub fn positive_states(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.transitions
            .iter()
            .map(|t| &t.state)
            .chain(&self.state_only)
    }
}

impl From<Vec<Transition>> for TrainingSource {
    fn from(transitions: Vec<Transition>) -> Self {
        Self::new(transitions)
    }
}

/// Adds unlabeled states. They join only the positive phase of `L̂_ρ` and
/// the buffer's init-range estimate; `L̂_π` never sees them.
pub fn augment_state_only(
    source: impl Into<TrainingSource>,
    states: Vec<Vec<f64>>,
) -> Result<TrainingSource> {
    let mut source = source.into();
    let dim = source.transitions.first().map(|t| t.state.len());
    for s in &states {
        if let Some(d) = dim.filter(|&d| d != s.len()) {
            return Err(Error::Dimension {
                context: "state-only sample".into(),
                expected: d,
                found: s.len(),
            });
        }
    }
    source.state_only.extend(states);
    Ok(source)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogRecord {
    pub iteration: usize,
    pub loss_pi: f64,
    /// Absent when the objective has no occupancy term.
    pub loss_rho: Option<f64>,
    /// `KL(ρ̂_D ‖ ρ_θ)`, when the state space is finite.
    pub kl_exact: Option<f64>,
    /// Cumulative SGLD chain restarts.
    pub buffer_restarts: usize,
    pub wall_ms: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<LogRecord>,
}

impl TrainLog {
    pub fn first(&self) -> Option<&LogRecord> {
        self.records.first()
    }

    pub fn last(&self) -> Option<&LogRecord> {
        self.records.last()
    }
}

pub type CheckpointHook<'a> = Box<dyn FnMut(usize, &PolicyNet) -> Result<()> + 'a>;

/// Optional side channels into the training loop.
#[derive(Default)]
pub struct TrainHooks<'a> {
    /// Milliseconds on some monotone clock; fills `wall_ms`.
    pub clock: Option<Box<dyn Fn() -> f64 + 'a>>,
    /// Called every `checkpoint_interval` iterations with the number of
    /// completed iterations.
    pub on_checkpoint: Option<CheckpointHook<'a>>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub net: PolicyNet,
    pub log: TrainLog,
    /// The PCD buffer after training, in SGLD mode.
    pub buffer: Option<PcdBuffer>,
}

/// Energy-based distribution matching.
pub fn train_edm(
    meta: &EnvMeta,
    source: &TrainingSource,
    cfg: &TrainConfig,
    sgld: &SgldConfig,
    buffer: Option<PcdBuffer>,
) -> Result<TrainOutcome> {
    let cfg = TrainConfig {
        algorithm: Algorithm::Edm,
        ..cfg.clone()
    };
    train(meta, source, &cfg, sgld, buffer, TrainHooks::default())
}

/// Behavioral cloning: `L̂_π` alone.
pub fn train_bc(
    meta: &EnvMeta,
    source: &TrainingSource,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let cfg = TrainConfig {
        algorithm: Algorithm::Bc,
        ..cfg.clone()
    };
    train(
        meta,
        source,
        &cfg,
        &SgldConfig::default(),
        None,
        TrainHooks::default(),
    )
}

/// `L̂_π + λ·mean|R̂|` over implied rewards.
pub fn train_rcal(
    meta: &EnvMeta,
    source: &TrainingSource,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let cfg = TrainConfig {
        algorithm: Algorithm::Rcal,
        ..cfg.clone()
    };
    train(
        meta,
        source,
        &cfg,
        &SgldConfig::default(),
        None,
        TrainHooks::default(),
    )
}

/// The shared training loop behind all three algorithms.
///
/// Random streams, all derived from `cfg.seed`: `init` for weights, `batch`
/// for mini-batch indices, `positive` for state-only substitution, and
/// per-iteration SGLD chain streams.
pub fn train(
    meta: &EnvMeta,
    source: &TrainingSource,
    cfg: &TrainConfig,
    sgld: &SgldConfig,
    buffer: Option<PcdBuffer>,
    mut hooks: TrainHooks<'_>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let transitions = source.transitions();
    if transitions.is_empty() {
        return Err(Error::Contract(
            "training needs at least one demonstrated transition".into(),
        ));
    }
    for s in source.positive_states() {
        check_dim(s, meta.state_dim, "demonstration state")?;
    }
    for t in transitions {
        if t.action >= meta.n_actions {
            return Err(Error::Contract(format!(
                "demonstrated action {} out of range for {} actions",
                t.action, meta.n_actions
            )));
        }
    }
    let start = hooks.clock.as_ref().map(|c| c());

    let uses_rho = cfg.algorithm == Algorithm::Edm && cfg.occupancy_weight != 0.0;
    let features = meta.feature_set.as_deref();
    let exact = uses_rho && cfg.negative_phase == NegativePhase::Exact;
    if exact && features.is_none() {
        return Err(Error::Config(
            "exact negative phase needs a finite feature set".into(),
        ));
    }
    let mut buffer = if uses_rho && !exact {
        sgld.validate()?;
        Some(match buffer {
            Some(b) => b,
            None => {
                let pool: Vec<Vec<f64>> = source.positive_states().cloned().collect();
                PcdBuffer::from_states(
                    &pool,
                    PcdBuffer::DEFAULT_CAPACITY,
                    PcdBuffer::DEFAULT_REINIT_PROB,
                )?
            }
        })
    } else {
        buffer
    };
    if cfg.algorithm == Algorithm::Rcal {
        if transitions
            .iter()
            .any(|t| t.next_state.is_none() && !t.done)
        {
            return Err(Error::TriplesRequired("RCAL"));
        }
        for t in transitions {
            if let Some(next) = &t.next_state {
                check_dim(next, meta.state_dim, "next state")?;
            }
        }
    }
    let data_dist = match features {
        Some(fs) => Some(empirical_distribution(source, fs)?),
        None => None,
    };

    let arch = Architecture::new(
        meta.state_dim,
        cfg.hidden.clone(),
        meta.n_actions,
        cfg.activation,
    );
    let mut net = PolicyNet::new(arch, &mut stream(cfg.seed, "init", 0));
    let adam = AdamConfig::with_learning_rate(cfg.learning_rate);
    let mut batch_rng = stream(cfg.seed, "batch", 0);
    let mut positive_rng = stream(cfg.seed, "positive", 0);
    let n_demo = transitions.len();
    let n_extra = source.state_only().len();
    let extra_prob = n_extra as f64 / (n_demo + n_extra) as f64;

    let mut log = TrainLog::default();
    let mut restarts = 0;
    let mut last = (f64::NAN, None);
    for it in 0..cfg.iterations {
        let idx: Vec<usize> = (0..cfg.batch_size)
            .map(|_| batch_rng.random_range(0..n_demo))
            .collect();
        let states: Vec<Vec<f64>> = idx.iter().map(|&i| transitions[i].state.clone()).collect();
        let actions: Vec<usize> = idx.iter().map(|&i| transitions[i].action).collect();

        let mut tape = Tape::new();
        let bound = net.params().bind(&mut tape);
        let x = tape.constant(net.batch(&states)?);
        let logits = net.forward(&mut tape, &bound, x)?;
        let loss_pi = policy_loss(&mut tape, logits, &actions);
        let mut total = loss_pi;
        let mut loss_rho = None;

        if uses_rho {
            let positive = if n_extra == 0 {
                mean_energy(&mut tape, logits)
            } else {
                let mut pos = states.clone();
                let mut substituted = false;
                for slot in pos.iter_mut() {
                    if positive_rng.random::<f64>() < extra_prob {
                        *slot = source.state_only()[positive_rng.random_range(0..n_extra)].clone();
                        substituted = true;
                    }
                }
                if substituted {
                    let xp = tape.constant(net.batch(&pos)?);
                    let pl = net.forward(&mut tape, &bound, xp)?;
                    mean_energy(&mut tape, pl)
                } else {
                    mean_energy(&mut tape, logits)
                }
            };
            let negative = if exact {
                exact_negative_phase(&mut tape, &net, &bound, features.unwrap())?.expected_energy
            } else {
                let buf = buffer.as_mut().expect("SGLD mode has a buffer");
                let out = sgld_sample(&net, buf, sgld, cfg.batch_size, cfg.seed, it as u64)?;
                restarts += out.restarts;
                let xn = tape.constant(net.batch(&out.states)?);
                let nl = net.forward(&mut tape, &bound, xn)?;
                mean_energy(&mut tape, nl)
            };
            let rho = tape.sub(positive, negative);
            loss_rho = Some(rho);
            let weighted = tape.scale(rho, cfg.occupancy_weight);
            total = tape.add(total, weighted);
        }
        if cfg.algorithm == Algorithm::Rcal {
            let batch: Vec<&Transition> = idx.iter().map(|&i| &transitions[i]).collect();
            let penalty =
                implied_reward_penalty(&mut tape, &net, &bound, logits, &batch, meta.gamma)?;
            let weighted = tape.scale(penalty, cfg.rcal_lambda);
            total = tape.add(total, weighted);
        }

        let pi_value = scalar(&tape, loss_pi);
        let rho_value = loss_rho.map(|v| scalar(&tape, v));
        if !scalar(&tape, total).is_finite() {
            return Err(Error::NonFiniteLoss {
                iteration: it,
                loss_pi: pi_value,
                loss_rho: rho_value,
            });
        }
        last = (pi_value, rho_value);
        if it % cfg.log_interval == 0 {
            log.records.push(LogRecord {
                iteration: it,
                loss_pi: pi_value,
                loss_rho: rho_value,
                kl_exact: model_kl(&net, features, data_dist.as_deref())?,
                buffer_restarts: restarts,
                wall_ms: elapsed(&hooks, start),
            });
        }

        let grads = tape.backward(total)?;
        let grads = bound.gradients(&grads);
        net.params_mut().adam_step(&grads, &adam)?;

        if cfg.checkpoint_interval > 0 && (it + 1) % cfg.checkpoint_interval == 0 {
            if let Some(cb) = hooks.on_checkpoint.as_mut() {
                cb(it + 1, &net)?;
            }
        }
    }
    // losses are those of the last mini-batch; the KL is at the final parameters
    log.records.push(LogRecord {
        iteration: cfg.iterations,
        loss_pi: last.0,
        loss_rho: last.1,
        kl_exact: model_kl(&net, features, data_dist.as_deref())?,
        buffer_restarts: restarts,
        wall_ms: elapsed(&hooks, start),
    });
    Ok(TrainOutcome { net, log, buffer })
}

fn scalar(tape: &Tape, v: Var) -> f64 {
    tape.value(v).data()[0]
}

fn elapsed(hooks: &TrainHooks<'_>, start: Option<f64>) -> Option<f64> {
    Some(hooks.clock.as_ref()?() - start?)
}

fn check_dim(s: &[f64], dim: usize, context: &str) -> Result<()> {
    if s.len() != dim {
        return Err(Error::Dimension {
            context: context.into(),
            expected: dim,
            found: s.len(),
        });
    }
    Ok(())
}

/// Empirical distribution of the positive-phase states over `features`.
fn empirical_distribution(source: &TrainingSource, features: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut counts = vec![0.0; features.len()];
    let mut total = 0.0;
    for s in source.positive_states() {
        let i = features.iter().position(|f| f == s).ok_or_else(|| {
            Error::Contract("demonstration state is not in the feature set".into())
        })?;
        counts[i] += 1.0;
        total += 1.0;
    }
    Ok(counts.into_iter().map(|c| c / total).collect())
}

fn model_kl(
    net: &PolicyNet,
    features: Option<&[Vec<f64>]>,
    data: Option<&[f64]>,
) -> Result<Option<f64>> {
    match (features, data) {
        (Some(fs), Some(d)) => Ok(Some(kl_divergence(d, &model_state_distribution(net, fs)?))),
        _ => Ok(None),
    }
}
