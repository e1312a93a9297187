use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::{BoundParams, Tape, Tensor, Var};
use crate::env::Transition;
use crate::policy::PolicyNet;
use crate::{Error, Result};

/// Mean cross-entropy `mean_n [logsumexp f(s_n) − f(s_n)[a_n]]` of `[n, A]` logits.
pub fn policy_loss(tape: &mut Tape, logits: Var, actions: &[usize]) -> Var {
    let lse = tape.logsumexp(logits, 1);
    let chosen = tape.gather(logits, actions);
    let nll = tape.sub(lse, chosen);
    tape.mean(nll)
}

/// Mean energy `mean_n −logsumexp f(s_n)` of `[n, A]` logits.
pub fn mean_energy(tape: &mut Tape, logits: Var) -> Var {
    let lse = tape.logsumexp(logits, 1);
    let e = tape.neg(lse);
    tape.mean(e)
}

#[derive(Clone, Copy, Debug)]
pub struct SurrogateLosses {
    /// `L̂_π`.
    pub policy: Var,
    /// `L̂_ρ`: positive-phase minus negative-phase mean energy.
    pub occupancy: Var,
}

/// Records both surrogate losses on one tape. Negative states enter as
/// constants, so their gradient flows only through `E_θ` evaluated at them.
pub fn surrogate_losses(
    tape: &mut Tape,
    net: &PolicyNet,
    bound: &BoundParams,
    demo_states: &[Vec<f64>],
    actions: &[usize],
    negatives: &[Vec<f64>],
) -> Result<SurrogateLosses> {
    if demo_states.is_empty() || negatives.is_empty() {
        return Err(Error::Contract(
            "surrogate losses need non-empty batches".into(),
        ));
    }
    if demo_states.len() != actions.len() {
        return Err(Error::Dimension {
            context: "actions per demo state".into(),
            expected: demo_states.len(),
            found: actions.len(),
        });
    }
    if let Some(&a) = actions.iter().find(|&&a| a >= net.n_actions()) {
        return Err(Error::Contract(alloc::format!("action {a} out of range")));
    }
    let x = tape.constant(net.batch(demo_states)?);
    let logits = net.forward(tape, bound, x)?;
    let policy = policy_loss(tape, logits, actions);
    let positive = mean_energy(tape, logits);
    let xn = tape.constant(net.batch(negatives)?);
    let neg_logits = net.forward(tape, bound, xn)?;
    let negative = mean_energy(tape, neg_logits);
    let occupancy = tape.sub(positive, negative);
    Ok(SurrogateLosses { policy, occupancy })
}

/// RCAL sparsity term `mean_n |R̂(s_n, a_n)|` with
/// `R̂ = f(s)[a] − γ·logsumexp f(s')` and no continuation past terminal
/// steps. `logits` are the already-recorded `[n, A]` logits of the batch
/// states.
pub fn implied_reward_penalty(
    tape: &mut Tape,
    net: &PolicyNet,
    bound: &BoundParams,
    logits: Var,
    batch: &[&Transition],
    gamma: f64,
) -> Result<Var> {
    let zeros = vec![0.0; net.input_dim()];
    let mut next = Vec::with_capacity(batch.len());
    let mut discount = Vec::with_capacity(batch.len());
    for t in batch {
        match (&t.next_state, t.done) {
            (_, true) => {
                next.push(t.next_state.clone().unwrap_or_else(|| zeros.clone()));
                discount.push(0.0);
            }
            (Some(s), false) => {
                next.push(s.clone());
                discount.push(gamma);
            }
            (None, false) => return Err(Error::TriplesRequired("implied reward")),
        }
    }
    let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();
    let xn = tape.constant(net.batch(&next)?);
    let next_logits = net.forward(tape, bound, xn)?;
    let next_value = tape.logsumexp(next_logits, 1);
    let discount = tape.constant(Tensor::vector(discount));
    let continuation = tape.mul(discount, next_value);
    let q = tape.gather(logits, &actions);
    let reward = tape.sub(q, continuation);
    let magnitude = tape.abs(reward);
    Ok(tape.mean(magnitude))
}

/// `(L̂_π, L̂_ρ)` values without keeping the tape.
pub fn surrogate_loss_values(
    net: &PolicyNet,
    demo_states: &[Vec<f64>],
    actions: &[usize],
    negatives: &[Vec<f64>],
) -> Result<(f64, f64)> {
    let mut tape = Tape::new();
    let bound = net.params().bind(&mut tape);
    let l = surrogate_losses(&mut tape, net, &bound, demo_states, actions, negatives)?;
    Ok((
        tape.value(l.policy).data()[0],
        tape.value(l.occupancy).data()[0],
    ))
}
