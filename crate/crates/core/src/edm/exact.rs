use alloc::vec::Vec;

use crate::autodiff::{BoundParams, Tape, Tensor, Var};
use crate::numeric::softmax;
use crate::policy::PolicyNet;
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct ExactNegativePhase {
    /// `Σ_s ρ_θ(s) E_θ(s)` with the weights held constant, so its gradient
    /// is `E_{s∼ρ_θ} ∇_θ E_θ(s)`.
    pub expected_energy: Var,
    /// `ρ_θ(s) ∝ exp(−E_θ(s))` over the feature set.
    pub model_distribution: Vec<f64>,
}

/// Negative phase computed with the exact partition sum over a finite set
/// of state features.
pub fn exact_negative_phase(
    tape: &mut Tape,
    net: &PolicyNet,
    bound: &BoundParams,
    feature_set: &[Vec<f64>],
) -> Result<ExactNegativePhase> {
    if feature_set.is_empty() {
        return Err(Error::Contract(
            "exact negative phase needs a non-empty feature set".into(),
        ));
    }
    let x = tape.constant(net.batch(feature_set)?);
    let logits = net.forward(tape, bound, x)?;
    let lse = tape.logsumexp(logits, 1);
    // −E = lse, so ρ_θ = softmax(lse)
    let model_distribution = softmax(tape.value(lse).data());
    let weights = tape.constant(Tensor::vector(model_distribution.clone()));
    let energy = tape.neg(lse);
    let weighted = tape.mul(weights, energy);
    let expected_energy = tape.sum(weighted);
    Ok(ExactNegativePhase {
        expected_energy,
        model_distribution,
    })
}

/// `ρ_θ` over `feature_set`, without a tape.
pub fn model_state_distribution(net: &PolicyNet, feature_set: &[Vec<f64>]) -> Result<Vec<f64>> {
    if feature_set.is_empty() {
        return Err(Error::Contract(
            "model distribution needs a non-empty feature set".into(),
        ));
    }
    let neg_energy = feature_set
        .iter()
        .map(|s| net.state_energy(s).map(|e| -e))
        .collect::<Result<Vec<_>>>()?;
    Ok(softmax(&neg_energy))
}
