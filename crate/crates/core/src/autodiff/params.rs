use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use super::{Gradients, Tape, Tensor, Var};
use crate::{Error, Result};

/// Adam hyperparameters. Only the learning rate comes from the training
/// recipe; the moment decay rates and epsilon are the usual defaults.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

/// A named parameter tensor with its Adam moment accumulators.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    name: String,
    value: Tensor,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

impl Param {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self) -> &Tensor {
        &self.value
    }
}

/// Ordered collection of named parameters plus optimizer state.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
    step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<()> {
        let name = name.into();
        if self.params.iter().any(|p| p.name == name) {
            return Err(Error::DuplicateParameter(name));
        }
        let n = value.len();
        self.params.push(Param {
            name,
            value,
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
        });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.params
            .iter()
            .find(|p| p.name == name)
            .map(|p| &p.value)
    }

    /// Overwrites a parameter's values; the shape must not change.
    pub fn set(&mut self, name: &str, value: Tensor) -> Result<()> {
        let p = self
            .params
            .iter_mut()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::Contract(alloc::format!("unknown parameter `{name}`")))?;
        if p.value.shape() != value.shape() {
            return Err(Error::Dimension {
                context: alloc::format!("parameter `{name}`"),
                expected: p.value.len(),
                found: value.len(),
            });
        }
        p.value = value;
        Ok(())
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Number of optimizer steps taken.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// All parameter values concatenated in store order.
    pub fn flatten(&self) -> Vec<f64> {
        self.params
            .iter()
            .flat_map(|p| p.value.data().iter().copied())
            .collect()
    }

    /// Inverse of [`flatten`](Self::flatten).
    pub fn assign_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_scalars() {
            return Err(Error::Dimension {
                context: "flat parameter vector".into(),
                expected: self.num_scalars(),
                found: values.len(),
            });
        }
        let mut offset = 0;
        for p in &mut self.params {
            let n = p.value.len();
            p.value
                .data_mut()
                .copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// Records every parameter as a differentiable leaf.
    pub fn bind(&self, tape: &mut Tape) -> BoundParams {
        BoundParams {
            vars: self
                .params
                .iter()
                .map(|p| tape.variable(p.value.clone()))
                .collect(),
        }
    }

    /// One bias-corrected Adam update. `grads` follows store order.
    ///
    /// Gradients are validated before anything is modified, so a rejected step
    /// leaves parameters, moments and the step counter untouched.
    pub fn adam_step(&mut self, grads: &[Tensor], cfg: &AdamConfig) -> Result<()> {
        if grads.len() != self.params.len() {
            return Err(Error::Dimension {
                context: "gradient list".into(),
                expected: self.params.len(),
                found: grads.len(),
            });
        }
        for (p, g) in self.params.iter().zip(grads) {
            if p.value.shape() != g.shape() {
                return Err(Error::Dimension {
                    context: alloc::format!("gradient for `{}`", p.name),
                    expected: p.value.len(),
                    found: g.len(),
                });
            }
            if !g.is_finite() {
                return Err(Error::NonFiniteGradient(p.name.clone()));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        for (p, g) in self.params.iter_mut().zip(grads) {
            let values = p.value.data_mut();
            let moments = p.first_moment.iter_mut().zip(p.second_moment.iter_mut());
            for ((x, &gi), (m, v)) in values.iter_mut().zip(g.data()).zip(moments) {
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * gi;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * gi * gi;
                *x -= cfg.learning_rate * (*m / c1) / ((*v / c2).sqrt() + cfg.epsilon);
            }
        }
        Ok(())
    }
}

/// The tape leaves of a [`ParamStore`], in store order.
#[derive(Clone, Debug)]
pub struct BoundParams {
    vars: Vec<Var>,
}

impl BoundParams {
    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    /// Parameter gradients in store order (zero for parameters that did not
    /// contribute).
    pub fn gradients(&self, grads: &Gradients) -> Vec<Tensor> {
        self.vars
            .iter()
            .map(|&v| {
                grads
                    .wrt(v)
                    .expect("bound parameters are differentiable leaves")
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(values: &[f64]) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("theta", Tensor::vector(values.to_vec())).unwrap();
        s
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut s = store(&[1.0]);
        assert_eq!(
            s.insert("theta", Tensor::scalar(0.0)),
            Err(Error::DuplicateParameter("theta".into()))
        );
    }

    #[test]
    fn zero_gradient_leaves_parameters_and_counts_step() {
        let mut s = store(&[1.5, -2.0]);
        s.adam_step(&[Tensor::zeros(&[2])], &AdamConfig::default())
            .unwrap();
        assert_eq!(s.get("theta").unwrap().data(), &[1.5, -2.0]);
        assert_eq!(s.step(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate_against_sign() {
        let cfg = AdamConfig::with_learning_rate(0.1);
        let mut s = store(&[0.0, 0.0, 0.0]);
        s.adam_step(&[Tensor::vector(vec![2.5, 2.5, 2.5])], &cfg)
            .unwrap();
        // m̂ = g, v̂ = g², so the step is lr · g / (|g| + ε)
        let expected = -0.1 * 2.5 / (2.5 + 1e-8);
        for &x in s.get("theta").unwrap().data() {
            assert!((x - expected).abs() < 1e-15);
        }
        let mut s = store(&[0.0]);
        s.adam_step(&[Tensor::vector(vec![-4.0])], &cfg).unwrap();
        assert!((s.get("theta").unwrap().data()[0] - 0.1).abs() < 1e-9);
    }

    #[test]
    fn non_finite_gradient_names_parameter_and_changes_nothing() {
        let mut s = store(&[1.0, 2.0]);
        let before = s.clone();
        let err = s
            .adam_step(
                &[Tensor::vector(vec![0.5, f64::NAN])],
                &AdamConfig::default(),
            )
            .unwrap_err();
        assert_eq!(err, Error::NonFiniteGradient("theta".into()));
        assert_eq!(s, before);
    }

    #[test]
    fn quadratic_bowl_converges() {
        // f(θ) = ½‖θ‖², ∇f = θ
        let cfg = AdamConfig::with_learning_rate(1e-2);
        let mut s = store(&[5.0, -3.0]);
        for _ in 0..5000 {
            let g = s.get("theta").unwrap().clone();
            s.adam_step(&[g], &cfg).unwrap();
        }
        let norm = s
            .get("theta")
            .unwrap()
            .data()
            .iter()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt();
        assert!(norm < 1e-3, "‖θ‖ = {norm}");
    }

    #[test]
    fn flatten_round_trip() {
        let mut s = store(&[1.0, 2.0]);
        s.insert("b", Tensor::scalar(3.0)).unwrap();
        assert_eq!(s.flatten(), [1.0, 2.0, 3.0]);
        s.assign_flat(&[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(s.get("b").unwrap().data(), &[6.0]);
        assert!(s.assign_flat(&[1.0]).is_err());
    }
}
