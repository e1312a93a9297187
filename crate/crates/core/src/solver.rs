//! Exact oracles on finite MDPs.
//!
//! Soft value iteration solves the entropy-regularized control problem; its
//! inverse maps a Q-table back to the unique reward that induces it. The
//! occupancy solver handles the discounted Bellman-flow equations with a dense
//! LU factorization.
//!
//! Conventions:
//! - `V(s) = τ·logsumexp(Q(s,·)/τ)` with temperature `τ` (default 1).
//! - Terminal states end the episode: their continuation value is 0 and their
//!   Q-values equal their (zero) rewards.
//! - Occupancies are scaled by `(1-γ)`, i.e. `ρ(s) = (1-γ) Σ_t γ^t P(s_t = s)`,
//!   and are solved over non-terminal states only. Without terminal states the
//!   result is a probability distribution; otherwise the mass that leaks into
//!   terminal states is missing and [`OccupancyMeasure::normalize`] rescales it.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::env::{ActionRule, TabularMdp};
use crate::numeric::{logsumexp, softmax};
use crate::{Error, Result};

/// A stochastic policy table `π[s][a]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyTable {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl PolicyTable {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != n_states * n_actions {
            return Err(Error::Dimension {
                context: "policy table".into(),
                expected: n_states * n_actions,
                found: probs.len(),
            });
        }
        for (s, row) in probs.chunks(n_actions).enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Contract(format!(
                    "policy row {s} is not a distribution"
                )));
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Reads the state index off a one-hot feature vector.
impl ActionRule for PolicyTable {
    fn action_probs(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.n_states {
            return Err(Error::Dimension {
                context: "policy table input".into(),
                expected: self.n_states,
                found: features.len(),
            });
        }
        let s = features
            .iter()
            .position(|&x| x == 1.0)
            .ok_or_else(|| Error::Contract("policy table needs one-hot features".into()))?;
        Ok(self.row(s).to_vec())
    }
}

/// A soft Q-table with the parameters that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftQ {
    pub n_states: usize,
    pub n_actions: usize,
    /// `Q[s][a]`, flattened.
    pub q: Vec<f64>,
    pub gamma: f64,
    pub temperature: f64,
    /// `‖B Q_prev − Q_prev‖∞` at the last iteration (0 for tables not produced by iteration).
    pub residual: f64,
}

impl SoftQ {
    /// Wraps an arbitrary table (e.g. network logits) with unit temperature.
    pub fn from_table(n_states: usize, n_actions: usize, q: Vec<f64>, gamma: f64) -> Result<Self> {
        if q.len() != n_states * n_actions {
            return Err(Error::Dimension {
                context: "Q table".into(),
                expected: n_states * n_actions,
                found: q.len(),
            });
        }
        Ok(Self {
            n_states,
            n_actions,
            q,
            gamma,
            temperature: 1.0,
            residual: 0.0,
        })
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.q[s * self.n_actions..(s + 1) * self.n_actions]
    }

    /// `V(s) = τ·logsumexp(Q(s,·)/τ)`.
    pub fn state_values(&self) -> Vec<f64> {
        (0..self.n_states)
            .map(|s| soft_max(self.row(s), self.temperature))
            .collect()
    }
}

fn soft_max(row: &[f64], temperature: f64) -> f64 {
    if temperature == 1.0 {
        logsumexp(row)
    } else {
        let scaled: Vec<f64> = row.iter().map(|q| q / temperature).collect();
        temperature * logsumexp(&scaled)
    }
}

/// Knobs for [`soft_value_iteration`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SoftViConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub temperature: f64,
}

impl Default for SoftViConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iterations: 200_000,
            temperature: 1.0,
        }
    }
}

impl SoftViConfig {
    pub fn with_tolerance(tolerance: f64) -> Self {
        Self {
            tolerance,
            ..Self::default()
        }
    }
}

/// `E_{s'~T(·|s,a)} V(s')` for every `(s, a)`, with `V = 0` on terminal states.
fn expected_continuation(mdp: &TabularMdp, values: &[f64]) -> Vec<f64> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut out = vec![0.0; ns * na];
    for s in 0..ns {
        for a in 0..na {
            out[s * na + a] = mdp
                .transition_row(s, a)
                .iter()
                .zip(values)
                .enumerate()
                .filter(|&(next, _)| !mdp.is_terminal(next))
                .map(|(_, (p, v))| p * v)
                .sum();
        }
    }
    out
}

fn check_reward(mdp: &TabularMdp, reward: &[f64]) -> Result<()> {
    if reward.len() != mdp.n_states() * mdp.n_actions() {
        return Err(Error::Dimension {
            context: "reward table".into(),
            expected: mdp.n_states() * mdp.n_actions(),
            found: reward.len(),
        });
    }
    Ok(())
}

/// One application of the soft Bellman operator:
/// `(B Q)(s,a) = R(s,a) + γ E_T[τ·logsumexp(Q(s',·)/τ)]`.
pub fn soft_bellman_backup(
    mdp: &TabularMdp,
    reward: &[f64],
    q: &[f64],
    temperature: f64,
) -> Result<Vec<f64>> {
    check_reward(mdp, reward)?;
    check_reward(mdp, q)?;
    let na = mdp.n_actions();
    let values: Vec<f64> = q.chunks(na).map(|row| soft_max(row, temperature)).collect();
    let cont = expected_continuation(mdp, &values);
    Ok(reward
        .iter()
        .zip(&cont)
        .enumerate()
        .map(|(i, (r, c))| {
            if mdp.is_terminal(i / na) {
                *r
            } else {
                r + mdp.gamma() * c
            }
        })
        .collect())
}

/// Iterates the soft Bellman operator from zero until the sup-norm change
/// drops to `cfg.tolerance`.
pub fn soft_value_iteration(mdp: &TabularMdp, reward: &[f64], cfg: &SoftViConfig) -> Result<SoftQ> {
    check_reward(mdp, reward)?;
    if !(cfg.tolerance > 0.0) || !(cfg.temperature > 0.0) {
        return Err(Error::Config(
            "tolerance and temperature must be positive".into(),
        ));
    }
    let mut q = vec![0.0; reward.len()];
    let mut residual = f64::INFINITY;
    for _ in 0..cfg.max_iterations {
        let next = soft_bellman_backup(mdp, reward, &q, cfg.temperature)?;
        residual = next
            .iter()
            .zip(&q)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        q = next;
        if residual <= cfg.tolerance {
            return Ok(SoftQ {
                n_states: mdp.n_states(),
                n_actions: mdp.n_actions(),
                q,
                gamma: mdp.gamma(),
                temperature: cfg.temperature,
                residual,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_iterations,
        residual,
    })
}

/// `π(a|s) = exp((Q(s,a) − V(s))/τ)`.
pub fn soft_policy_from_q(q: &SoftQ) -> PolicyTable {
    let mut probs = Vec::with_capacity(q.q.len());
    for s in 0..q.n_states {
        let scaled: Vec<f64> = q.row(s).iter().map(|v| v / q.temperature).collect();
        probs.extend(softmax(&scaled));
    }
    PolicyTable {
        n_states: q.n_states,
        n_actions: q.n_actions,
        probs,
    }
}

/// Inverse soft Bellman operator:
/// `(J Q)(s,a) = Q(s,a) − γ E_T[τ·logsumexp(Q(s',·)/τ)]`.
///
/// For terminal states the continuation is zero, matching
/// [`soft_value_iteration`].
pub fn inverse_bellman(q: &SoftQ, mdp: &TabularMdp) -> Result<Vec<f64>> {
    if q.n_states != mdp.n_states() || q.n_actions != mdp.n_actions() {
        return Err(Error::Dimension {
            context: "Q table vs MDP".into(),
            expected: mdp.n_states() * mdp.n_actions(),
            found: q.q.len(),
        });
    }
    let cont = expected_continuation(mdp, &q.state_values());
    let na = mdp.n_actions();
    Ok(q.q
        .iter()
        .zip(&cont)
        .enumerate()
        .map(|(i, (v, c))| {
            if mdp.is_terminal(i / na) {
                *v
            } else {
                v - mdp.gamma() * c
            }
        })
        .collect())
}

/// State and state-action occupancy.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyMeasure {
    pub state: Vec<f64>,
    /// `ρ[s][a]`, flattened.
    pub state_action: Vec<f64>,
    pub n_actions: usize,
    /// Whether the state vector sums to 1 (within 1e-10).
    pub normalized: bool,
}

impl OccupancyMeasure {
    pub fn total_mass(&self) -> f64 {
        self.state.iter().sum()
    }

    /// Rescales to a probability distribution.
    pub fn normalize(&self) -> Result<Self> {
        let mass = self.total_mass();
        if !(mass > 0.0) {
            return Err(Error::Contract("cannot normalize a zero occupancy".into()));
        }
        Ok(Self {
            state: self.state.iter().map(|x| x / mass).collect(),
            state_action: self.state_action.iter().map(|x| x / mass).collect(),
            n_actions: self.n_actions,
            normalized: true,
        })
    }

    /// Builds a normalized state-only measure from a distribution vector.
    pub fn from_state_distribution(state: Vec<f64>) -> Self {
        let normalized = (state.iter().sum::<f64>() - 1.0).abs() <= 1e-10;
        Self {
            state_action: state.clone(),
            state,
            n_actions: 1,
            normalized,
        }
    }
}

fn policy_matrix(mdp: &TabularMdp, policy: &PolicyTable) -> Result<Vec<f64>> {
    if policy.n_states != mdp.n_states() || policy.n_actions != mdp.n_actions() {
        return Err(Error::Dimension {
            context: "policy table vs MDP".into(),
            expected: mdp.n_states() * mdp.n_actions(),
            found: policy.probs.len(),
        });
    }
    let ns = mdp.n_states();
    // P[s][s'] = Σ_a π(a|s) T(s'|s,a)
    let mut p = vec![0.0; ns * ns];
    for s in 0..ns {
        for (a, &pa) in policy.row(s).iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            for (dst, &t) in p[s * ns..(s + 1) * ns]
                .iter_mut()
                .zip(mdp.transition_row(s, a))
            {
                *dst += pa * t;
            }
        }
    }
    Ok(p)
}

/// Solves `ρ = (1−γ)μ₀ + γ P_πᵀ ρ` over non-terminal states.
pub fn exact_occupancy(mdp: &TabularMdp, policy: &PolicyTable) -> Result<OccupancyMeasure> {
    let p = policy_matrix(mdp, policy)?;
    let ns = mdp.n_states();
    let gamma = mdp.gamma();
    let live: Vec<usize> = (0..ns).filter(|&s| !mdp.is_terminal(s)).collect();
    let n = live.len();
    let mut a = vec![0.0; n * n];
    let mut b = vec![0.0; n];
    for (i, &dst) in live.iter().enumerate() {
        b[i] = (1.0 - gamma) * mdp.initial_dist()[dst];
        for (j, &src) in live.iter().enumerate() {
            let delta = if i == j { 1.0 } else { 0.0 };
            a[i * n + j] = delta - gamma * p[src * ns + dst];
        }
    }
    let solution = lu_solve(a, b, n)?;
    let mut state = vec![0.0; ns];
    for (&s, v) in live.iter().zip(solution) {
        state[s] = v;
    }
    let na = mdp.n_actions();
    let mut state_action = vec![0.0; ns * na];
    for s in 0..ns {
        for (a, &pa) in policy.row(s).iter().enumerate() {
            state_action[s * na + a] = state[s] * pa;
        }
    }
    let normalized = (state.iter().sum::<f64>() - 1.0).abs() <= 1e-10;
    Ok(OccupancyMeasure {
        state,
        state_action,
        n_actions: na,
        normalized,
    })
}

/// Largest violation of the flow equation over non-terminal states.
pub fn flow_residual(
    mdp: &TabularMdp,
    policy: &PolicyTable,
    occ: &OccupancyMeasure,
) -> Result<f64> {
    let p = policy_matrix(mdp, policy)?;
    let ns = mdp.n_states();
    let gamma = mdp.gamma();
    let mut worst = 0.0_f64;
    for dst in (0..ns).filter(|&s| !mdp.is_terminal(s)) {
        let inflow: f64 = (0..ns)
            .filter(|&src| !mdp.is_terminal(src))
            .map(|src| occ.state[src] * p[src * ns + dst])
            .sum();
        let r = occ.state[dst] - (1.0 - gamma) * mdp.initial_dist()[dst] - gamma * inflow;
        worst = worst.max(r.abs());
    }
    Ok(worst)
}

/// Dense LU with partial pivoting; `a` is row-major `n × n`.
pub fn lu_solve(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Result<Vec<f64>> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .unwrap();
        if !(a[pivot * n + col].abs() > 1e-300) {
            return Err(Error::Singular(col));
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let diag = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / diag;
            if factor == 0.0 {
                continue;
            }
            a[row * n + col] = factor;
            for k in col + 1..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row * n + k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row * n + row];
    }
    Ok(x)
}

/// `Σ p log(p/q)` with `0 log 0 = 0`; `+∞` when `q = 0` somewhere `p > 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "KL operands differ in length");
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi == 0.0 {
            continue;
        }
        if qi <= 0.0 {
            return f64::INFINITY;
        }
        total += pi * (pi / qi).ln();
    }
    total
}

/// `KL(ρ_data ‖ ρ_model)` over states. Both measures must be normalized.
pub fn kl_occupancy(data: &OccupancyMeasure, model: &OccupancyMeasure) -> Result<f64> {
    if !data.normalized || !model.normalized {
        return Err(Error::Contract(
            "KL needs normalized occupancy measures".into(),
        ));
    }
    if data.state.len() != model.state.len() {
        return Err(Error::Dimension {
            context: "occupancy measures".into(),
            expected: data.state.len(),
            found: model.state.len(),
        });
    }
    Ok(kl_divergence(&data.state, &model.state))
}

/// Expected undiscounted return over at most `horizon` steps from the initial
/// distribution, by backward recursion. Matches [`rollout`](crate::env::rollout)
/// semantics: an episode stops at a terminal state or after `horizon` steps.
pub fn finite_horizon_return(
    mdp: &TabularMdp,
    policy: &PolicyTable,
    horizon: usize,
) -> Result<f64> {
    let p = policy_matrix(mdp, policy)?;
    let ns = mdp.n_states();
    let expected_reward: Vec<f64> = (0..ns)
        .map(|s| {
            policy
                .row(s)
                .iter()
                .enumerate()
                .map(|(a, pa)| pa * mdp.reward(s, a))
                .sum()
        })
        .collect();
    let mut value = vec![0.0; ns];
    for _ in 0..horizon {
        let next: Vec<f64> = (0..ns)
            .map(|s| {
                if mdp.is_terminal(s) {
                    return 0.0;
                }
                expected_reward[s] + (0..ns).map(|t| p[s * ns + t] * value[t]).sum::<f64>()
            })
            .collect();
        value = next;
    }
    Ok(mdp
        .initial_dist()
        .iter()
        .zip(&value)
        .map(|(m, v)| m * v)
        .sum())
}
