use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use super::{Environment, Step, GRIDWORLD_HORIZON};
use crate::numeric::sample_index;
use crate::rng::StreamRng;
use crate::{Error, Result};

/// Gridworld action order.
pub const ACTION_NAMES: [&str; 4] = ["N", "E", "S", "W"];

const ROW_TOLERANCE: f64 = 1e-12;

/// A finite MDP with exact dynamics.
///
/// States are presented to policies as one-hot vectors. Terminal states are
/// absorbing with zero reward.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularMdp {
    name: String,
    n_states: usize,
    n_actions: usize,
    /// `T[s][a][s']`, flattened.
    transition: Vec<f64>,
    /// `R[s][a]`, flattened.
    reward: Vec<f64>,
    gamma: f64,
    initial_dist: Vec<f64>,
    terminal: Vec<bool>,
    horizon: usize,
}

impl TabularMdp {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        gamma: f64,
        initial_dist: Vec<f64>,
        terminal: Vec<bool>,
    ) -> Result<Self> {
        let invalid = |msg: String| Err(Error::InvalidMdp(msg));
        if n_states == 0 || n_actions == 0 {
            return invalid("needs at least one state and one action".into());
        }
        if transition.len() != n_states * n_actions * n_states {
            return invalid(format!(
                "transition tensor has {} entries",
                transition.len()
            ));
        }
        if reward.len() != n_states * n_actions {
            return invalid(format!("reward table has {} entries", reward.len()));
        }
        if initial_dist.len() != n_states || terminal.len() != n_states {
            return invalid(
                "initial distribution and terminal mask need one entry per state".into(),
            );
        }
        if !(0.0..1.0).contains(&gamma) {
            return invalid(format!("discount {gamma} outside [0, 1)"));
        }
        for (i, row) in transition.chunks(n_states).enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > ROW_TOLERANCE {
                return invalid(format!(
                    "T[{}][{}] is not a distribution (sum {sum})",
                    i / n_actions,
                    i % n_actions
                ));
            }
        }
        let init_sum: f64 = initial_dist.iter().sum();
        if initial_dist.iter().any(|&p| !(p >= 0.0)) || (init_sum - 1.0).abs() > ROW_TOLERANCE {
            return invalid(format!("initial distribution sums to {init_sum}"));
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return invalid("non-finite reward".into());
        }
        let mdp = Self {
            name: name.into(),
            n_states,
            n_actions,
            transition,
            reward,
            gamma,
            initial_dist,
            terminal,
            horizon: GRIDWORLD_HORIZON,
        };
        for s in (0..n_states).filter(|&s| mdp.terminal[s]) {
            for a in 0..n_actions {
                if mdp.prob(s, a, s) != 1.0 || mdp.reward(s, a) != 0.0 {
                    return invalid(format!(
                        "terminal state {s} must self-loop with zero reward"
                    ));
                }
            }
        }
        Ok(mdp)
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    /// Same dynamics with a different reward table (terminal rows must stay zero).
    pub fn with_reward(&self, reward: Vec<f64>) -> Result<Self> {
        Self::new(
            self.name.clone(),
            self.n_states,
            self.n_actions,
            self.transition.clone(),
            reward,
            self.gamma,
            self.initial_dist.clone(),
            self.terminal.clone(),
        )
        .map(|m| m.with_horizon(self.horizon))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn terminal_mask(&self) -> &[bool] {
        &self.terminal
    }

    /// `T[s][a][·]`.
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.transition_row(s, a)[next]
    }

    pub fn transition_tensor(&self) -> &[f64] {
        &self.transition
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    pub fn reward_table(&self) -> &[f64] {
        &self.reward
    }

    /// One-hot encoding of state `s`.
    pub fn one_hot(&self, s: usize) -> Vec<f64> {
        let mut f = vec![0.0; self.n_states];
        f[s] = 1.0;
        f
    }

    /// One-hot features of every state, in state order.
    pub fn feature_set(&self) -> Vec<Vec<f64>> {
        (0..self.n_states).map(|s| self.one_hot(s)).collect()
    }

    /// Recovers a state index from its one-hot features.
    pub fn state_of(&self, features: &[f64]) -> Option<usize> {
        if features.len() != self.n_states {
            return None;
        }
        let s = features.iter().position(|&x| x == 1.0)?;
        features
            .iter()
            .enumerate()
            .all(|(i, &x)| x == if i == s { 1.0 } else { 0.0 })
            .then_some(s)
    }

    /// Samples `s' ~ T(·|s, a)`; the reward is `R[s][a]`.
    pub fn env_step(&self, s: usize, a: usize, rng: &mut StreamRng) -> Result<(usize, f64, bool)> {
        if s >= self.n_states || a >= self.n_actions {
            return Err(Error::Contract(format!(
                "state {s} / action {a} out of range"
            )));
        }
        if self.terminal[s] {
            return Err(Error::Contract(format!("step from terminal state {s}")));
        }
        let next = sample_index(self.transition_row(s, a), rng.random::<f64>());
        Ok((next, self.reward(s, a), self.terminal[next]))
    }
}

impl Environment for TabularMdp {
    type State = usize;

    fn name(&self) -> &str {
        &self.name
    }

    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn feature_dim(&self) -> usize {
        self.n_states
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn feature_set(&self) -> Option<Vec<Vec<f64>>> {
        Some(TabularMdp::feature_set(self))
    }

    fn features(&self, state: &usize) -> Vec<f64> {
        self.one_hot(*state)
    }

    fn reset(&self, rng: &mut StreamRng) -> usize {
        sample_index(&self.initial_dist, rng.random::<f64>())
    }

    fn step(&self, state: &usize, action: usize, rng: &mut StreamRng) -> Result<Step<usize>> {
        let (next, reward, done) = self.env_step(*state, action, rng)?;
        Ok(Step { next, reward, done })
    }

    fn horizon(&self) -> usize {
        self.horizon
    }
}

/// Gridworld layout and rewards. Cells are numbered row-major from the
/// top-left corner.
#[derive(Clone, Debug, PartialEq)]
pub struct GridworldSpec {
    pub width: usize,
    pub height: usize,
    pub slip: f64,
    pub goal_reward: f64,
    pub step_cost: f64,
    pub gamma: f64,
    pub start: usize,
    /// Defaults to the bottom-right cell.
    pub goal: Option<usize>,
}

impl GridworldSpec {
    pub fn new(
        width: usize,
        height: usize,
        slip: f64,
        goal_reward: f64,
        step_cost: f64,
        gamma: f64,
    ) -> Self {
        Self {
            width,
            height,
            slip,
            goal_reward,
            step_cost,
            gamma,
            start: 0,
            goal: None,
        }
    }

    /// Where action `a` leads from `cell` if it succeeds; walls block.
    fn target(&self, cell: usize, a: usize) -> usize {
        let (x, y) = (cell % self.width, cell / self.width);
        let (x, y) = match a {
            0 if y > 0 => (x, y - 1),
            1 if x + 1 < self.width => (x + 1, y),
            2 if y + 1 < self.height => (x, y + 1),
            3 if x > 0 => (x - 1, y),
            _ => (x, y),
        };
        y * self.width + x
    }

    pub fn build(&self) -> Result<TabularMdp> {
        let n = self.width * self.height;
        if n < 2 {
            return Err(Error::InvalidMdp(format!(
                "degenerate {}x{} grid",
                self.width, self.height
            )));
        }
        if !(0.0..1.0).contains(&self.slip) {
            return Err(Error::InvalidMdp(format!(
                "slip probability {} outside [0, 1)",
                self.slip
            )));
        }
        let goal = self.goal.unwrap_or(n - 1);
        if goal >= n || self.start >= n || goal == self.start {
            return Err(Error::InvalidMdp(
                "start and goal must be distinct cells".into(),
            ));
        }
        let mut transition = vec![0.0; n * 4 * n];
        let mut reward = vec![0.0; n * 4];
        for s in 0..n {
            for a in 0..4 {
                let row = &mut transition[(s * 4 + a) * n..(s * 4 + a + 1) * n];
                if s == goal {
                    row[s] = 1.0;
                    continue;
                }
                // perpendicular actions are a±1 mod 4
                row[self.target(s, a)] += 1.0 - self.slip;
                row[self.target(s, (a + 1) % 4)] += self.slip / 2.0;
                row[self.target(s, (a + 3) % 4)] += self.slip / 2.0;
                reward[s * 4 + a] = self.goal_reward * row[goal] - self.step_cost;
            }
        }
        let mut initial = vec![0.0; n];
        initial[self.start] = 1.0;
        let mut terminal = vec![false; n];
        terminal[goal] = true;
        TabularMdp::new(
            format!("gridworld-{}x{}", self.width, self.height),
            n,
            4,
            transition,
            reward,
            self.gamma,
            initial,
            terminal,
        )
    }
}

/// Gridworld with start in the top-left and goal (terminal) in the bottom-right
/// corner. Actions are N/E/S/W; the intended move happens with probability
/// `1 - slip` and each perpendicular move with `slip / 2`. The reward is the
/// expected goal bonus of the move minus `step_cost`.
pub fn build_gridworld(
    width: usize,
    height: usize,
    slip: f64,
    goal_reward: f64,
    step_cost: f64,
    gamma: f64,
) -> Result<TabularMdp> {
    GridworldSpec::new(width, height, slip, goal_reward, step_cost, gamma).build()
}

/// Deterministic chain `0 → 1 → … → n-1`. Action 0 advances, action 1 stays.
/// Advancing into the last (terminal) state pays `end_reward`.
pub fn build_chain(n_states: usize, gamma: f64, end_reward: f64) -> Result<TabularMdp> {
    if n_states < 2 {
        return Err(Error::InvalidMdp("chain needs at least two states".into()));
    }
    let n = n_states;
    let mut transition = vec![0.0; n * 2 * n];
    let mut reward = vec![0.0; n * 2];
    for s in 0..n {
        let advance = if s + 1 < n { s + 1 } else { s };
        transition[(s * 2) * n + advance] = 1.0;
        transition[(s * 2 + 1) * n + s] = 1.0;
        if s + 2 == n {
            reward[s * 2] = end_reward;
        }
    }
    let mut initial = vec![0.0; n];
    initial[0] = 1.0;
    let mut terminal = vec![false; n];
    terminal[n - 1] = true;
    TabularMdp::new(
        format!("chain-{n}"),
        n,
        2,
        transition,
        reward,
        gamma,
        initial,
        terminal,
    )
}

/// One non-terminal state that loops to itself under every action.
pub fn single_state(reward: f64, gamma: f64, n_actions: usize) -> TabularMdp {
    TabularMdp::new(
        "single",
        1,
        n_actions,
        vec![1.0; n_actions],
        vec![reward; n_actions],
        gamma,
        vec![1.0],
        vec![false],
    )
    .expect("single-state MDP is valid")
}
