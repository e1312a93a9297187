//! Environment specs (`key = value` files) and the environments and experts
//! they build.

use std::fmt::Write as _;
use std::path::Path;

use edm_core::data::{generate_demonstrations, DemoDataset};
use edm_core::edm::EnvMeta;
use edm_core::env::{
    build_cartpole, build_chain, single_state, ActionRule, Cartpole, CartpoleParams, GridworldSpec,
    LinearController, TabularMdp, CARTPOLE_HORIZON, GRIDWORLD_HORIZON,
};
use edm_core::eval::{average_return, ReturnEstimate};
use edm_core::solver::{
    soft_policy_from_q, soft_value_iteration, PolicyTable, SoftQ, SoftViConfig,
};

use crate::error::{parse_error, read, write, Error, Result};
use crate::text::{fmt_f64, fmt_list, key_values, parse_f64, parse_list};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvKind {
    Gridworld,
    Chain,
    Single,
    Cartpole,
}

impl std::fmt::Display for EnvKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EnvKind::Gridworld => "gridworld",
            EnvKind::Chain => "chain",
            EnvKind::Single => "single",
            EnvKind::Cartpole => "cartpole",
        })
    }
}

impl std::str::FromStr for EnvKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gridworld" => Ok(EnvKind::Gridworld),
            "chain" => Ok(EnvKind::Chain),
            "single" => Ok(EnvKind::Single),
            "cartpole" => Ok(EnvKind::Cartpole),
            other => Err(format!("unknown environment kind `{other}`")),
        }
    }
}

/// Every knob of every environment kind; each kind reads the ones it needs.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvSpec {
    pub kind: EnvKind,
    pub width: usize,
    pub height: usize,
    pub slip: f64,
    pub goal_reward: f64,
    pub step_cost: f64,
    pub gamma: f64,
    /// 0 selects the kind's default cap.
    pub horizon: usize,
    /// Chain length.
    pub n_states: usize,
    /// Chain reward for reaching the end.
    pub end_reward: f64,
    /// Single-state reward per step.
    pub reward: f64,
    /// Single-state action count.
    pub n_actions: usize,
}

impl Default for EnvSpec {
    fn default() -> Self {
        Self {
            kind: EnvKind::Gridworld,
            width: 5,
            height: 5,
            slip: 0.1,
            goal_reward: 10.0,
            step_cost: 1.0,
            gamma: 0.95,
            horizon: 0,
            n_states: 5,
            end_reward: 1.0,
            reward: 1.0,
            n_actions: 2,
        }
    }
}

impl EnvSpec {
    pub const KEYS: [&'static str; 12] = [
        "kind",
        "width",
        "height",
        "slip",
        "goal_reward",
        "step_cost",
        "gamma",
        "horizon",
        "n_states",
        "end_reward",
        "reward",
        "n_actions",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let bad = || format!("invalid value `{value}` for `{key}`");
        let float = || parse_f64(value).ok_or_else(bad);
        let count = || value.parse::<usize>().map_err(|_| bad());
        match key {
            "kind" => self.kind = value.parse()?,
            "width" => self.width = count()?,
            "height" => self.height = count()?,
            "slip" => self.slip = float()?,
            "goal_reward" => self.goal_reward = float()?,
            "step_cost" => self.step_cost = float()?,
            "gamma" => self.gamma = float()?,
            "horizon" => self.horizon = count()?,
            "n_states" => self.n_states = count()?,
            "end_reward" => self.end_reward = float()?,
            "reward" => self.reward = float()?,
            "n_actions" => self.n_actions = count()?,
            other => return Err(format!("unknown environment key `{other}`")),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "kind" => self.kind.to_string(),
            "width" => self.width.to_string(),
            "height" => self.height.to_string(),
            "slip" => self.slip.to_string(),
            "goal_reward" => self.goal_reward.to_string(),
            "step_cost" => self.step_cost.to_string(),
            "gamma" => self.gamma.to_string(),
            "horizon" => self.horizon.to_string(),
            "n_states" => self.n_states.to_string(),
            "end_reward" => self.end_reward.to_string(),
            "reward" => self.reward.to_string(),
            "n_actions" => self.n_actions.to_string(),
            _ => return None,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read(path)?;
        let mut spec = Self::default();
        for kv in key_values(path, &text) {
            let (line, key, value) = kv?;
            spec.set(key, value)
                .map_err(|m| parse_error(path, line, m))?;
        }
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        Self::KEYS
            .iter()
            .map(|k| format!("{k} = {}\n", self.get(k).unwrap()))
            .collect()
    }

    pub fn build(&self) -> Result<AnyEnv> {
        let cap = |default| {
            if self.horizon == 0 {
                default
            } else {
                self.horizon
            }
        };
        Ok(match self.kind {
            EnvKind::Gridworld => {
                let mdp = GridworldSpec::new(
                    self.width,
                    self.height,
                    self.slip,
                    self.goal_reward,
                    self.step_cost,
                    self.gamma,
                )
                .build()?;
                AnyEnv::Tabular(mdp.with_horizon(cap(GRIDWORLD_HORIZON)))
            }
            EnvKind::Chain => AnyEnv::Tabular(
                build_chain(self.n_states, self.gamma, self.end_reward)?
                    .with_horizon(cap(GRIDWORLD_HORIZON)),
            ),
            EnvKind::Single => {
                if self.n_actions == 0 || !(0.0..1.0).contains(&self.gamma) {
                    return Err(Error::Config(
                        "single-state env needs n_actions ≥ 1 and γ ∈ [0, 1)".into(),
                    ));
                }
                AnyEnv::Tabular(
                    single_state(self.reward, self.gamma, self.n_actions)
                        .with_horizon(cap(GRIDWORLD_HORIZON)),
                )
            }
            EnvKind::Cartpole => AnyEnv::Cartpole(build_cartpole(CartpoleParams {
                horizon: cap(CARTPOLE_HORIZON),
                gamma: self.gamma,
                ..CartpoleParams::default()
            })),
        })
    }
}

/// A built environment of any supported kind.
#[derive(Clone, Debug)]
pub enum AnyEnv {
    Tabular(TabularMdp),
    Cartpole(Cartpole),
}

macro_rules! with_env {
    ($env:expr, $e:ident => $body:expr) => {
        match $env {
            AnyEnv::Tabular($e) => $body,
            AnyEnv::Cartpole($e) => $body,
        }
    };
}

impl AnyEnv {
    pub fn meta(&self) -> EnvMeta {
        with_env!(self, e => EnvMeta::from_env(e))
    }

    pub fn name(&self) -> String {
        with_env!(self, e => edm_core::env::Environment::name(e).to_string())
    }

    pub fn tabular(&self) -> Option<&TabularMdp> {
        match self {
            AnyEnv::Tabular(m) => Some(m),
            AnyEnv::Cartpole(_) => None,
        }
    }

    pub fn generate(&self, expert: &Expert, n_traj: usize, seed: u64) -> Result<DemoDataset> {
        Ok(
            with_env!(self, e => generate_demonstrations(e, expert, &expert.descriptor(), n_traj, seed))?,
        )
    }

    pub fn average_return(
        &self,
        policy: &dyn ActionRule,
        n_episodes: usize,
        seed: u64,
    ) -> Result<ReturnEstimate> {
        Ok(with_env!(self, e => average_return(policy, e, n_episodes, seed))?)
    }
}

/// The demonstrator: the soft-optimal policy on tabular environments, a
/// hand-tuned linear controller on cart-pole.
#[derive(Clone, Debug, PartialEq)]
pub enum Expert {
    Table(PolicyTable),
    Linear(LinearController),
}

impl ActionRule for Expert {
    fn action_probs(&self, features: &[f64]) -> edm_core::Result<Vec<f64>> {
        match self {
            Expert::Table(t) => t.action_probs(features),
            Expert::Linear(c) => c.action_probs(features),
        }
    }
}

impl Expert {
    pub fn descriptor(&self) -> String {
        match self {
            Expert::Table(t) => format!("soft-optimal table {}x{}", t.n_states(), t.n_actions()),
            Expert::Linear(c) => format!(
                "linear controller {} sharpness {}",
                fmt_list(&c.weights),
                c.sharpness
            ),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# edm expert policy\n");
        match self {
            Expert::Table(t) => {
                let _ = writeln!(
                    out,
                    "kind = table\nn_states = {}\nn_actions = {}",
                    t.n_states(),
                    t.n_actions()
                );
                for s in 0..t.n_states() {
                    let row: Vec<String> = t.row(s).iter().map(|p| fmt_f64(*p)).collect();
                    let _ = writeln!(out, "row = {}", row.join(","));
                }
            }
            Expert::Linear(c) => {
                let w: Vec<String> = c.weights.iter().map(|v| fmt_f64(*v)).collect();
                let _ = writeln!(
                    out,
                    "kind = linear\nweights = {}\nsharpness = {}",
                    w.join(","),
                    fmt_f64(c.sharpness)
                );
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(path, &read(path)?)
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let (mut kind, mut n_states, mut n_actions) = (None, None, None);
        let (mut rows, mut weights, mut sharpness) = (Vec::new(), None, None);
        for kv in key_values(path, text) {
            let (line, key, value) = kv?;
            let bad = || parse_error(path, line, format!("invalid value for `{key}`"));
            match key {
                "kind" => kind = Some(value.to_string()),
                "n_states" => n_states = Some(value.parse::<usize>().map_err(|_| bad())?),
                "n_actions" => n_actions = Some(value.parse::<usize>().map_err(|_| bad())?),
                "row" => rows.extend(parse_list::<f64>(value).ok_or_else(bad)?),
                "weights" => {
                    let w = parse_list::<f64>(value).ok_or_else(bad)?;
                    weights = Some(<[f64; 4]>::try_from(w).map_err(|_| bad())?);
                }
                "sharpness" => sharpness = Some(parse_f64(value).ok_or_else(bad)?),
                other => return Err(parse_error(path, line, format!("unknown key `{other}`"))),
            }
        }
        let end = text.lines().count();
        let missing = |k: &str| parse_error(path, end, format!("expert file lacks `{k}`"));
        match kind.as_deref() {
            Some("table") => {
                let table = PolicyTable::new(
                    n_states.ok_or_else(|| missing("n_states"))?,
                    n_actions.ok_or_else(|| missing("n_actions"))?,
                    rows,
                )
                .map_err(|e| parse_error(path, end, e.to_string()))?;
                Ok(Expert::Table(table))
            }
            Some("linear") => Ok(Expert::Linear(LinearController {
                weights: weights.ok_or_else(|| missing("weights"))?,
                sharpness: sharpness.ok_or_else(|| missing("sharpness"))?,
            })),
            Some(other) => Err(parse_error(
                path,
                1,
                format!("unknown expert kind `{other}`"),
            )),
            None => Err(missing("kind")),
        }
    }
}

/// Builds the demonstrator for `env`. Tabular environments also return the
/// soft-optimal Q-table the policy came from.
pub fn build_expert(env: &AnyEnv, solver: &SoftViConfig) -> Result<(Expert, Option<SoftQ>)> {
    match env {
        AnyEnv::Tabular(mdp) => {
            let q = soft_value_iteration(mdp, mdp.reward_table(), solver)?;
            Ok((Expert::Table(soft_policy_from_q(&q)), Some(q)))
        }
        AnyEnv::Cartpole(_) => Ok((Expert::Linear(LinearController::default()), None)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_text_round_trip() {
        let mut spec = EnvSpec::default();
        spec.set("kind", "chain").unwrap();
        spec.set("slip", "0.25").unwrap();
        spec.set("horizon", "40").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("env.spec");
        write(&p, &spec.to_text()).unwrap();
        assert_eq!(EnvSpec::load(&p).unwrap(), spec);
        assert!(spec.set("colour", "red").is_err());
        assert!(spec.set("width", "-1").is_err());
    }

    #[test]
    fn expert_round_trip() {
        let env = EnvSpec::default().build().unwrap();
        let (expert, q) = build_expert(&env, &SoftViConfig::default()).unwrap();
        assert!(q.is_some());
        let back = Expert::parse(Path::new("e"), &expert.to_text()).unwrap();
        assert_eq!(back, expert);
        let linear = Expert::Linear(LinearController::default());
        assert_eq!(
            Expert::parse(Path::new("e"), &linear.to_text()).unwrap(),
            linear
        );
    }
}
