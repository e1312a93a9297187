use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use rand::Rng;

use super::{BoundParams, ParamStore, Tape, Tensor, Var};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Elu,
    Relu,
    Tanh,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp_m1()
                }
            }
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative at input `x` given the forward output `y`.
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Elu => {
                if x > 0.0 {
                    1.0
                } else {
                    y + 1.0
                }
            }
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Elu => "elu",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "elu" => Ok(Activation::Elu),
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::Config(format!("unknown activation `{other}`"))),
        }
    }
}

/// Fully connected network shape: hidden layers use `activation`, the output
/// layer is linear.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
}

impl Architecture {
    pub fn new(
        input_dim: usize,
        hidden: Vec<usize>,
        output_dim: usize,
        activation: Activation,
    ) -> Self {
        Self {
            input_dim,
            hidden,
            output_dim,
            activation,
        }
    }

    /// Two hidden layers of 64 ELU units.
    pub fn policy_default(input_dim: usize, n_actions: usize) -> Self {
        Self::new(input_dim, alloc::vec![64, 64], n_actions, Activation::Elu)
    }

    /// `(fan_in, fan_out)` of each affine layer.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut widths = Vec::with_capacity(self.hidden.len() + 2);
        widths.push(self.input_dim);
        widths.extend_from_slice(&self.hidden);
        widths.push(self.output_dim);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Weights and biases uniform in `±1/√fan_in`.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamStore {
        let mut store = ParamStore::new();
        for (i, (fan_in, fan_out)) in self.layer_dims().into_iter().enumerate() {
            let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
            let mut draw = |n: usize| -> Vec<f64> {
                (0..n).map(|_| rng.random_range(-bound..bound)).collect()
            };
            let w = Tensor::new(alloc::vec![fan_in, fan_out], draw(fan_in * fan_out)).unwrap();
            let b = Tensor::vector(draw(fan_out));
            store.insert(format!("layer{i}.weight"), w).unwrap();
            store.insert(format!("layer{i}.bias"), b).unwrap();
        }
        store
    }

    /// Checks that `params` holds exactly this network's layers.
    pub fn validate(&self, params: &ParamStore) -> Result<()> {
        let dims = self.layer_dims();
        if params.len() != 2 * dims.len() {
            return Err(Error::Dimension {
                context: "parameter count".into(),
                expected: 2 * dims.len(),
                found: params.len(),
            });
        }
        for (i, (fan_in, fan_out)) in dims.into_iter().enumerate() {
            let w = &params.params()[2 * i];
            let b = &params.params()[2 * i + 1];
            if w.value().shape() != [fan_in, fan_out] {
                return Err(Error::Dimension {
                    context: format!("layer {i} weight `{}`", w.name()),
                    expected: fan_in * fan_out,
                    found: w.value().len(),
                });
            }
            if b.value().shape() != [fan_out] {
                return Err(Error::Dimension {
                    context: format!("layer {i} bias `{}`", b.name()),
                    expected: fan_out,
                    found: b.value().len(),
                });
            }
        }
        Ok(())
    }
}

/// Runs an `[n, d]` batch through the affine layers in `params` (weight, bias
/// pairs in order), applying `activation` between layers.
pub fn forward_mlp(
    tape: &mut Tape,
    params: &BoundParams,
    input: Var,
    activation: Activation,
) -> Result<Var> {
    let vars = params.vars();
    if vars.is_empty() || !vars.len().is_multiple_of(2) {
        return Err(Error::Contract(format!(
            "expected weight/bias pairs, got {} parameters",
            vars.len()
        )));
    }
    let n_layers = vars.len() / 2;
    let mut x = input;
    for layer in 0..n_layers {
        let (w, b) = (vars[2 * layer], vars[2 * layer + 1]);
        let xs = tape.shape(x);
        if xs.len() != 2 {
            return Err(Error::Contract(format!(
                "layer {layer} input must be a matrix, got shape {xs:?}"
            )));
        }
        let ws = tape.shape(w).to_vec();
        if ws.len() != 2 || ws[0] != xs[1] {
            return Err(Error::Dimension {
                context: format!("layer {layer} input width"),
                expected: ws.first().copied().unwrap_or(0),
                found: xs[1],
            });
        }
        if tape.shape(b) != [ws[1]] {
            return Err(Error::Dimension {
                context: format!("layer {layer} bias"),
                expected: ws[1],
                found: tape.value(b).len(),
            });
        }
        let z = tape.matmul(x, w);
        let z = tape.add_bias(z, b);
        x = if layer + 1 < n_layers {
            tape.activate(z, activation)
        } else {
            z
        };
    }
    Ok(x)
}
