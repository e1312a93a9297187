use alloc::vec::Vec;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{PcdBuffer, SgldConfig};
use crate::autodiff::Tape;
use crate::policy::PolicyNet;
use crate::rng::{derive_seed, stream};
use crate::{Error, Result};

/// A differentiable energy over state vectors.
pub trait Energy {
    fn dim(&self) -> usize;

    /// Energies of `states` and their gradients with respect to each state.
    fn energy_and_grad(&self, states: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)>;
}

impl Energy for PolicyNet {
    fn dim(&self) -> usize {
        self.input_dim()
    }

    fn energy_and_grad(&self, states: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let mut tape = Tape::new();
        let bound = self.params().bind(&mut tape);
        let x = tape.variable(self.batch(states)?);
        let logits = self.forward(&mut tape, &bound, x)?;
        let lse = tape.logsumexp(logits, 1);
        let energy = tape.neg(lse);
        // rows are independent, so d(Σ E)/ds_n = dE(s_n)/ds_n
        let total = tape.sum(energy);
        let grads = tape.backward(total)?;
        let gx = grads.wrt(x).expect("input leaf is differentiable");
        let d = self.input_dim();
        let rows = gx.data().chunks(d.max(1)).map(<[f64]>::to_vec).collect();
        Ok((tape.value(energy).data().to_vec(), rows))
    }
}

/// One Langevin update `s ← s − α ∇E(s) + σ ξ` with caller-supplied `ξ`.
pub fn langevin_step(state: &mut [f64], grad: &[f64], step_size: f64, noise: f64, xi: &[f64]) {
    for ((s, &g), &z) in state.iter_mut().zip(grad).zip(xi) {
        *s += -step_size * g + noise * z;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SgldOutput {
    pub states: Vec<Vec<f64>>,
    /// Chains restarted from a uniform draw after leaving the finite reals.
    pub restarts: usize,
}

/// Runs `n` Langevin chains of length ι, seeded from `buffer`, and appends
/// their endpoints to it.
///
/// Chain `c` of call `round` draws all of its randomness from its own stream,
/// so results do not depend on how chains are scheduled.
pub fn sgld_sample<E: Energy + ?Sized>(
    energy: &E,
    buffer: &mut PcdBuffer,
    cfg: &SgldConfig,
    n: usize,
    seed: u64,
    round: u64,
) -> Result<SgldOutput> {
    cfg.validate()?;
    if energy.dim() != buffer.dim() {
        return Err(Error::Dimension {
            context: "SGLD energy input".into(),
            expected: buffer.dim(),
            found: energy.dim(),
        });
    }
    let round_seed = derive_seed(seed, "sgld", round);
    let mut rngs: Vec<_> = (0..n)
        .map(|c| stream(round_seed, "chain", c as u64))
        .collect();
    let mut states: Vec<Vec<f64>> = rngs.iter_mut().map(|rng| buffer.draw_start(rng)).collect();
    let mut restarts = 0;
    let mut xi = alloc::vec![0.0; buffer.dim()];
    for _ in 0..cfg.chain_length {
        let (_, grads) = energy.energy_and_grad(&states)?;
        for ((s, g), rng) in states.iter_mut().zip(&grads).zip(rngs.iter_mut()) {
            for z in xi.iter_mut() {
                *z = rng.sample(StandardNormal);
            }
            langevin_step(s, g, cfg.step_size, cfg.noise, &xi);
            if s.iter().any(|v| !v.is_finite()) {
                *s = buffer.sample_uniform(rng);
                restarts += 1;
            } else if cfg.clamp_to_init_range {
                buffer.clamp(s);
            }
        }
    }
    for s in &states {
        buffer.push(s.clone())?;
    }
    Ok(SgldOutput { states, restarts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{Activation, Architecture};
    use alloc::vec;

    /// `E(s) = ½‖s‖²`.
    struct Quadratic(usize);

    impl Energy for Quadratic {
        fn dim(&self) -> usize {
            self.0
        }

        fn energy_and_grad(&self, states: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
            let e = states
                .iter()
                .map(|s| 0.5 * s.iter().map(|v| v * v).sum::<f64>())
                .collect();
            Ok((e, states.to_vec()))
        }
    }

    /// Gradient explodes away from the origin so every chain overflows.
    struct Exploding;

    impl Energy for Exploding {
        fn dim(&self) -> usize {
            1
        }

        fn energy_and_grad(&self, states: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
            Ok((
                vec![0.0; states.len()],
                states.iter().map(|_| vec![-1e308]).collect(),
            ))
        }
    }

    #[test]
    fn noise_free_descent_reaches_mode() {
        let mut buf = PcdBuffer::new(100, 1.0, vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let cfg = SgldConfig {
            step_size: 0.1,
            noise: 0.0,
            chain_length: 200,
            ..Default::default()
        };
        let out = sgld_sample(&Quadratic(2), &mut buf, &cfg, 16, 3, 0).unwrap();
        for s in &out.states {
            assert!(s.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-4);
        }
    }

    #[test]
    fn buffer_grows_by_batch_up_to_capacity() {
        let mut buf = PcdBuffer::new(50, 0.05, vec![-1.0], vec![1.0]).unwrap();
        let cfg = SgldConfig::default();
        for round in 0..4 {
            let before = buf.len();
            let out = sgld_sample(&Quadratic(1), &mut buf, &cfg, 20, 0, round).unwrap();
            assert_eq!(buf.len(), (before + 20).min(50));
            let tail: Vec<_> = buf.states().skip(buf.len() - 20).cloned().collect();
            assert_eq!(tail, out.states);
        }
    }

    #[test]
    fn full_reinit_ignores_stored_states() {
        let mut buf = PcdBuffer::new(1000, 1.0, vec![-1.0], vec![1.0]).unwrap();
        for _ in 0..100 {
            buf.push(vec![1e6]).unwrap();
        }
        let cfg = SgldConfig {
            noise: 0.0,
            chain_length: 1,
            ..Default::default()
        };
        let out = sgld_sample(&Quadratic(1), &mut buf, &cfg, 64, 0, 0).unwrap();
        // one damped step from [-1, 1] stays well inside the box
        assert!(out.states.iter().all(|s| s[0].abs() < 1.0));
    }

    #[test]
    fn diverging_chains_restart_and_are_counted() {
        let mut buf = PcdBuffer::new(10, 1.0, vec![0.0], vec![1.0]).unwrap();
        let cfg = SgldConfig {
            step_size: 10.0,
            noise: 0.0,
            chain_length: 3,
            ..Default::default()
        };
        let out = sgld_sample(&Exploding, &mut buf, &cfg, 4, 0, 0).unwrap();
        assert_eq!(out.restarts, 12);
        assert!(out.states.iter().all(|s| s[0].is_finite()));
    }

    #[test]
    fn reproducible_per_round() {
        let run = |round| {
            let mut buf = PcdBuffer::new(10, 0.05, vec![-1.0], vec![1.0]).unwrap();
            sgld_sample(&Quadratic(1), &mut buf, &SgldConfig::default(), 4, 9, round).unwrap()
        };
        assert_eq!(run(0), run(0));
        assert_ne!(run(0), run(1));
    }

    #[test]
    fn policy_energy_gradient_matches_differences() {
        let arch = Architecture::new(3, vec![5], 4, Activation::Tanh);
        let net = PolicyNet::new(arch, &mut stream(1, "net", 0));
        let states = vec![vec![0.3, -0.2, 0.9], vec![-1.0, 0.5, 0.0]];
        let (e, g) = net.energy_and_grad(&states).unwrap();
        let h = 1e-6;
        for (n, s) in states.iter().enumerate() {
            assert!((e[n] - net.state_energy(s).unwrap()).abs() < 1e-12);
            for k in 0..3 {
                let mut up = s.clone();
                let mut dn = s.clone();
                up[k] += h;
                dn[k] -= h;
                let fd =
                    (net.state_energy(&up).unwrap() - net.state_energy(&dn).unwrap()) / (2.0 * h);
                assert!((fd - g[n][k]).abs() < 1e-7, "{fd} vs {}", g[n][k]);
            }
        }
    }
}
