//! The softmax policy `π_θ(a|s) ∝ exp f_θ(s)[a]` and the state energy its
//! logits define, `E_θ(s) = −logsumexp_a f_θ(s)[a]`.
//!
//! Logits are never centered: the per-state offset is exactly what the energy
//! model uses to represent the state density.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::autodiff::{forward_mlp, Architecture, BoundParams, ParamStore, Tape, Tensor, Var};
use crate::env::{ActionRule, Transition};
use crate::numeric::{logsumexp, softmax};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyNet {
    arch: Architecture,
    params: ParamStore,
}

impl PolicyNet {
    pub fn new<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Self {
        let params = arch.init_params(rng);
        Self { arch, params }
    }

    pub fn from_params(arch: Architecture, params: ParamStore) -> Result<Self> {
        arch.validate(&params)?;
        Ok(Self { arch, params })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn input_dim(&self) -> usize {
        self.arch.input_dim
    }

    pub fn n_actions(&self) -> usize {
        self.arch.output_dim
    }

    /// Records the logits of an `[n, d]` batch on `tape`.
    pub fn forward(&self, tape: &mut Tape, bound: &BoundParams, states: Var) -> Result<Var> {
        forward_mlp(tape, bound, states, self.arch.activation)
    }

    /// Stacks state vectors into a batch, checking their width.
    pub fn batch(&self, states: &[Vec<f64>]) -> Result<Tensor> {
        for s in states {
            self.check_input(s)?;
        }
        if states.is_empty() {
            return Ok(Tensor::zeros(&[0, self.input_dim()]));
        }
        Tensor::from_rows(states)
    }

    fn check_input(&self, s: &[f64]) -> Result<()> {
        if s.len() != self.input_dim() {
            return Err(Error::Dimension {
                context: "policy input".into(),
                expected: self.input_dim(),
                found: s.len(),
            });
        }
        Ok(())
    }

    /// `f_θ(s)` without recording a tape.
    pub fn logits(&self, s: &[f64]) -> Result<Vec<f64>> {
        self.check_input(s)?;
        let params = self.params.params();
        let n_layers = params.len() / 2;
        let mut x = s.to_vec();
        for layer in 0..n_layers {
            let w = params[2 * layer].value();
            let b = params[2 * layer + 1].value();
            let m = w.shape()[1];
            let mut z = vec![0.0; m];
            // same accumulation order as the tape's matmul + add_bias
            for (p, &xv) in x.iter().enumerate() {
                if xv == 0.0 {
                    continue;
                }
                for (o, &wv) in z.iter_mut().zip(&w.data()[p * m..(p + 1) * m]) {
                    *o += xv * wv;
                }
            }
            for (o, &bv) in z.iter_mut().zip(b.data()) {
                *o += bv;
            }
            if layer + 1 < n_layers {
                for v in &mut z {
                    *v = self.arch.activation.apply(*v);
                }
            }
            x = z;
        }
        Ok(x)
    }

    /// `π_θ(·|s)`.
    pub fn action_probs(&self, s: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(s)?))
    }

    /// `E_θ(s) = −logsumexp f_θ(s)`.
    pub fn state_energy(&self, s: &[f64]) -> Result<f64> {
        Ok(-logsumexp(&self.logits(s)?))
    }

    /// Reward implied by reading the logits as a soft Q-function:
    /// `R̂(s,a) = f_θ(s)[a] − γ·logsumexp f_θ(s')`, with zero continuation on
    /// terminal transitions.
    pub fn implied_reward(&self, t: &Transition, gamma: f64) -> Result<f64> {
        let logits = self.logits(&t.state)?;
        let q = *logits
            .get(t.action)
            .ok_or_else(|| Error::Contract(alloc::format!("action {} out of range", t.action)))?;
        if t.done {
            return Ok(q);
        }
        let next = t
            .next_state
            .as_ref()
            .ok_or(Error::TriplesRequired("implied reward"))?;
        Ok(q - gamma * logsumexp(&self.logits(next)?))
    }
}

impl ActionRule for PolicyNet {
    fn action_probs(&self, features: &[f64]) -> Result<Vec<f64>> {
        PolicyNet::action_probs(self, features)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Activation;
    use crate::rng::stream;

    /// A network with no hidden layers whose logits at one-hot state `s` are `table[s]`.
    pub(crate) fn tabular_net(n_states: usize, n_actions: usize, table: &[f64]) -> PolicyNet {
        let arch = Architecture::new(n_states, vec![], n_actions, Activation::Elu);
        let mut params = ParamStore::new();
        params
            .insert(
                "layer0.weight",
                Tensor::new(vec![n_states, n_actions], table.to_vec()).unwrap(),
            )
            .unwrap();
        params
            .insert("layer0.bias", Tensor::zeros(&[n_actions]))
            .unwrap();
        PolicyNet::from_params(arch, params).unwrap()
    }

    #[test]
    fn zero_logits_uniform_and_energy() {
        let net = tabular_net(1, 2, &[0.0, 0.0]);
        assert_eq!(net.action_probs(&[1.0]).unwrap(), vec![0.5, 0.5]);
        assert!((net.state_energy(&[1.0]).unwrap() + core::f64::consts::LN_2).abs() < 1e-15);
        let net4 = tabular_net(1, 4, &[0.0; 4]);
        assert!((net4.state_energy(&[1.0]).unwrap() + 4.0_f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn known_softmax_and_energy() {
        let net = tabular_net(1, 3, &[1.0, 2.0, 3.0]);
        let p = net.action_probs(&[1.0]).unwrap();
        let expected = [
            0.090_030_573_170_380_46,
            0.244_728_471_054_797_6,
            0.665_240_955_774_821_9,
        ];
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((net.state_energy(&[1.0]).unwrap() + 3.407_605_964_444_38).abs() < 1e-14);
    }

    #[test]
    fn shift_invariance_of_probs() {
        let a = tabular_net(1, 3, &[0.3, -1.2, 2.0]);
        let b = tabular_net(1, 3, &[0.3 + 7.5, -1.2 + 7.5, 2.0 + 7.5]);
        for (x, y) in a
            .action_probs(&[1.0])
            .unwrap()
            .iter()
            .zip(b.action_probs(&[1.0]).unwrap())
        {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn input_width_checked() {
        let net = tabular_net(2, 2, &[0.0; 4]);
        assert!(matches!(
            net.action_probs(&[1.0]),
            Err(Error::Dimension {
                expected: 2,
                found: 1,
                ..
            })
        ));
    }

    #[test]
    fn plain_forward_matches_tape() {
        let arch = Architecture::new(4, vec![8, 8], 3, Activation::Elu);
        let net = PolicyNet::new(arch, &mut stream(1, "init", 0));
        let states = vec![vec![0.1, -0.3, 2.0, 0.0], vec![1.0, 0.0, 0.0, 0.0]];
        let mut tape = Tape::new();
        let bound = net.params().bind(&mut tape);
        let x = tape.constant(net.batch(&states).unwrap());
        let y = net.forward(&mut tape, &bound, x).unwrap();
        for (i, s) in states.iter().enumerate() {
            assert_eq!(tape.value(y).row(i), net.logits(s).unwrap().as_slice());
        }
    }

    #[test]
    fn implied_reward_cases() {
        let net = tabular_net(2, 2, &[2.0, 0.5, 1.0, -1.0]);
        let terminal = Transition {
            state: vec![1.0, 0.0],
            action: 0,
            next_state: None,
            done: true,
        };
        assert_eq!(net.implied_reward(&terminal, 0.9).unwrap(), 2.0);
        let pair = Transition {
            state: vec![1.0, 0.0],
            action: 1,
            next_state: None,
            done: false,
        };
        assert_eq!(
            net.implied_reward(&pair, 0.9),
            Err(Error::TriplesRequired("implied reward"))
        );
        let triple = Transition {
            next_state: Some(vec![0.0, 1.0]),
            ..pair
        };
        assert_eq!(net.implied_reward(&triple, 0.0).unwrap(), 0.5);
        let expected = 0.5 - 0.9 * logsumexp(&[1.0, -1.0]);
        assert!((net.implied_reward(&triple, 0.9).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn implied_reward_inverts_soft_q() {
        use crate::env::build_gridworld;
        use crate::solver::{soft_value_iteration, SoftViConfig};
        let mdp = build_gridworld(3, 3, 0.0, 2.0, 0.3, 0.9).unwrap();
        let q = soft_value_iteration(&mdp, mdp.reward_table(), &SoftViConfig::default()).unwrap();
        let net = tabular_net(9, 4, &q.q);
        for s in (0..9).filter(|&s| !mdp.is_terminal(s)) {
            for a in 0..4 {
                let next = mdp
                    .transition_row(s, a)
                    .iter()
                    .position(|&p| p == 1.0)
                    .unwrap();
                let t = Transition {
                    state: mdp.one_hot(s),
                    action: a,
                    next_state: Some(mdp.one_hot(next)),
                    done: mdp.is_terminal(next),
                };
                let r = net.implied_reward(&t, 0.9).unwrap();
                assert!((r - mdp.reward(s, a)).abs() < 1e-6, "s={s} a={a}");
            }
        }
    }

    #[test]
    fn model_joint_decomposes_into_state_and_policy() {
        // ρ_θ(s,a) ∝ e^{f(s)[a]}, ρ_θ(s) ∝ e^{−E(s)}, ratio = π(a|s)
        let arch = Architecture::new(5, vec![6], 3, Activation::Tanh);
        let net = PolicyNet::new(arch, &mut stream(4, "init", 0));
        let states: Vec<Vec<f64>> = (0..5)
            .map(|i| (0..5).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let joint: Vec<Vec<f64>> = states.iter().map(|s| net.logits(s).unwrap()).collect();
        let log_z = logsumexp(&joint.iter().flatten().copied().collect::<Vec<_>>());
        let energies: Vec<f64> = states
            .iter()
            .map(|s| -net.state_energy(s).unwrap())
            .collect();
        let log_z_states = logsumexp(&energies);
        assert!((log_z - log_z_states).abs() < 1e-12);
        for (s, row) in states.iter().zip(&joint) {
            let pi = net.action_probs(s).unwrap();
            let rho_s = (-net.state_energy(s).unwrap() - log_z_states).exp();
            for (a, f) in row.iter().enumerate() {
                let rho_sa = (f - log_z).exp();
                assert!((rho_sa / rho_s - pi[a]).abs() < 1e-12);
            }
        }
    }
}
