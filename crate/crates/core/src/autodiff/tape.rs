use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use super::{Activation, Tensor};
use crate::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Abs(Var),
    Exp(Var),
    Ln(Var),
    Activate(Var, Activation),
    LogSumExp {
        input: Var,
        outer: usize,
        len: usize,
        inner: usize,
    },
    Gather {
        input: Var,
        indices: Vec<usize>,
    },
    Sum(Var),
    Mean(Var),
}

#[derive(Clone, Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Wengert list of primitive operations.
///
/// Every operand is recorded before its consumer, so reverse index order is a
/// valid topological order for the backward pass. Shape errors in primitives
/// are contract violations and panic; [`forward_mlp`](super::forward_mlp)
/// checks shapes up front and reports them as errors instead.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records a leaf. `differentiable` leaves receive gradients in [`backward`](Self::backward).
    pub fn leaf(&mut self, value: Tensor, differentiable: bool) -> Var {
        self.push(value, Op::Leaf, differentiable)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn variable(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    fn data(&self, v: Var) -> &[f64] {
        self.nodes[v.0].value.data()
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) {
        assert_eq!(
            self.shape(a),
            self.shape(b),
            "contract violation: {what} operands differ in shape"
        );
    }

    fn matrix_dims(&self, v: Var, what: &str) -> (usize, usize) {
        let s = self.shape(v);
        assert!(
            s.len() == 2,
            "contract violation: {what} needs a matrix, got shape {s:?}"
        );
        (s[0], s[1])
    }

    /// `[n, k] × [k, m] → [n, m]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (n, k) = self.matrix_dims(a, "matmul");
        let (k2, m) = self.matrix_dims(b, "matmul");
        assert_eq!(k, k2, "contract violation: matmul inner dimensions differ");
        let (ad, bd) = (self.data(a), self.data(b));
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let row = &mut out[i * m..(i + 1) * m];
            for p in 0..k {
                let av = ad[i * k + p];
                if av == 0.0 {
                    continue;
                }
                for (o, &bv) in row.iter_mut().zip(&bd[p * m..(p + 1) * m]) {
                    *o += av * bv;
                }
            }
        }
        let rg = self.any_grad(&[a, b]);
        self.push(Tensor::new(vec![n, m], out).unwrap(), Op::MatMul(a, b), rg)
    }

    /// Adds a length-`m` bias to every row of an `[n, m]` matrix.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Var {
        let (n, m) = self.matrix_dims(x, "add_bias");
        assert_eq!(
            self.shape(bias),
            &[m],
            "contract violation: bias length must match matrix width"
        );
        let (xd, bd) = (self.data(x), self.data(bias));
        let mut out = xd.to_vec();
        for row in out.chunks_mut(m) {
            for (o, &b) in row.iter_mut().zip(bd) {
                *o += b;
            }
        }
        let rg = self.any_grad(&[x, bias]);
        self.push(
            Tensor::new(vec![n, m], out).unwrap(),
            Op::AddBias(x, bias),
            rg,
        )
    }

    fn zip_with(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Var {
        let out: Vec<f64> = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.shape(a).to_vec();
        let rg = self.any_grad(&[a, b]);
        self.push(Tensor::new(shape, out).unwrap(), op, rg)
    }

    fn map(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let out: Vec<f64> = self.data(a).iter().map(|&x| f(x)).collect();
        let shape = self.shape(a).to_vec();
        let rg = self.any_grad(&[a]);
        self.push(Tensor::new(shape, out).unwrap(), op, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.same_shape(a, b, "add");
        self.zip_with(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.same_shape(a, b, "sub");
        self.zip_with(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.same_shape(a, b, "mul");
        self.zip_with(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.map(a, Op::Scale(a, c), |x| c * x)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        self.map(a, Op::AddScalar(a), |x| x + c)
    }

    /// `|x|`, with subgradient 0 at exactly 0.
    pub fn abs(&mut self, a: Var) -> Var {
        self.map(a, Op::Abs(a), f64::abs)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.map(a, Op::Exp(a), f64::exp)
    }

    pub fn ln(&mut self, a: Var) -> Var {
        self.map(a, Op::Ln(a), f64::ln)
    }

    pub fn activate(&mut self, a: Var, act: Activation) -> Var {
        self.map(a, Op::Activate(a, act), |x| act.apply(x))
    }

    /// Numerically stable log-sum-exp along `axis`; the axis is removed from the shape.
    pub fn logsumexp(&mut self, x: Var, axis: usize) -> Var {
        let shape = self.shape(x).to_vec();
        assert!(
            axis < shape.len(),
            "contract violation: axis {axis} out of range for shape {shape:?}"
        );
        let len = shape[axis];
        assert!(len > 0, "contract violation: logsumexp over an empty axis");
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let xd = self.data(x);
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for i in 0..inner {
                let at = |k: usize| xd[(o * len + k) * inner + i];
                let max = (0..len).map(at).fold(f64::NEG_INFINITY, f64::max);
                out[o * inner + i] = if len == 1 || !max.is_finite() {
                    // exact for a single element
                    if len == 1 {
                        at(0)
                    } else {
                        max
                    }
                } else {
                    max + (0..len).map(|k| (at(k) - max).exp()).sum::<f64>().ln()
                };
            }
        }
        let mut out_shape = shape;
        out_shape.remove(axis);
        let rg = self.any_grad(&[x]);
        self.push(
            Tensor::new(out_shape, out).unwrap(),
            Op::LogSumExp {
                input: x,
                outer,
                len,
                inner,
            },
            rg,
        )
    }

    /// Picks `x[i, indices[i]]` from an `[n, m]` matrix.
    pub fn gather(&mut self, x: Var, indices: &[usize]) -> Var {
        let (n, m) = self.matrix_dims(x, "gather");
        assert_eq!(n, indices.len(), "contract violation: one index per row");
        let xd = self.data(x);
        let out: Vec<f64> = indices
            .iter()
            .enumerate()
            .map(|(i, &j)| {
                assert!(j < m, "contract violation: gather index {j} out of range");
                xd[i * m + j]
            })
            .collect();
        let rg = self.any_grad(&[x]);
        self.push(
            Tensor::vector(out),
            Op::Gather {
                input: x,
                indices: indices.to_vec(),
            },
            rg,
        )
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.data(x).iter().sum();
        let rg = self.any_grad(&[x]);
        self.push(Tensor::scalar(s), Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let d = self.data(x);
        assert!(!d.is_empty(), "contract violation: mean of an empty tensor");
        let m = d.iter().sum::<f64>() / d.len() as f64;
        let rg = self.any_grad(&[x]);
        self.push(Tensor::scalar(m), Op::Mean(x), rg)
    }

    /// Reverse pass from a one-element output.
    ///
    /// The tape is left untouched, so replaying it yields identical gradients.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let out_node = self
            .nodes
            .get(output.0)
            .ok_or_else(|| Error::Contract("backward output is not on this tape".into()))?;
        if out_node.value.len() != 1 {
            return Err(Error::Contract(alloc::format!(
                "backward needs a scalar output, got shape {:?}",
                out_node.value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; output.0 + 1];
        let mut leaves: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        if out_node.requires_grad {
            grads[output.0] = Some(vec![1.0]);
        }
        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {
                    leaves[idx] = Some(Tensor::new(node.value.shape().to_vec(), g).unwrap());
                }
                Op::MatMul(a, b) => {
                    let (n, k) = self.matrix_dims(*a, "matmul");
                    let m = self.shape(*b)[1];
                    let (ad, bd) = (self.data(*a), self.data(*b));
                    if self.requires_grad(*a) {
                        let mut ga = vec![0.0; n * k];
                        for i in 0..n {
                            let grow = &g[i * m..(i + 1) * m];
                            for p in 0..k {
                                ga[i * k + p] = grow
                                    .iter()
                                    .zip(&bd[p * m..(p + 1) * m])
                                    .map(|(x, y)| x * y)
                                    .sum();
                            }
                        }
                        accumulate(&mut grads, *a, &ga);
                    }
                    if self.requires_grad(*b) {
                        let mut gb = vec![0.0; k * m];
                        for i in 0..n {
                            let grow = &g[i * m..(i + 1) * m];
                            for p in 0..k {
                                let av = ad[i * k + p];
                                if av == 0.0 {
                                    continue;
                                }
                                for (o, &gv) in gb[p * m..(p + 1) * m].iter_mut().zip(grow) {
                                    *o += av * gv;
                                }
                            }
                        }
                        accumulate(&mut grads, *b, &gb);
                    }
                }
                Op::AddBias(x, b) => {
                    if self.requires_grad(*x) {
                        accumulate(&mut grads, *x, &g);
                    }
                    if self.requires_grad(*b) {
                        let m = self.shape(*b)[0];
                        let mut gb = vec![0.0; m];
                        for row in g.chunks(m) {
                            for (o, &v) in gb.iter_mut().zip(row) {
                                *o += v;
                            }
                        }
                        accumulate(&mut grads, *b, &gb);
                    }
                }
                Op::Add(a, b) => {
                    if self.requires_grad(*a) {
                        accumulate(&mut grads, *a, &g);
                    }
                    if self.requires_grad(*b) {
                        accumulate(&mut grads, *b, &g);
                    }
                }
                Op::Sub(a, b) => {
                    if self.requires_grad(*a) {
                        accumulate(&mut grads, *a, &g);
                    }
                    if self.requires_grad(*b) {
                        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
                        accumulate(&mut grads, *b, &neg);
                    }
                }
                Op::Mul(a, b) => {
                    let (ad, bd) = (self.data(*a), self.data(*b));
                    if self.requires_grad(*a) {
                        let ga: Vec<f64> = g.iter().zip(bd).map(|(x, y)| x * y).collect();
                        accumulate(&mut grads, *a, &ga);
                    }
                    if self.requires_grad(*b) {
                        let gb: Vec<f64> = g.iter().zip(ad).map(|(x, y)| x * y).collect();
                        accumulate(&mut grads, *b, &gb);
                    }
                }
                Op::Scale(a, c) => {
                    let ga: Vec<f64> = g.iter().map(|v| c * v).collect();
                    accumulate(&mut grads, *a, &ga);
                }
                Op::AddScalar(a) => accumulate(&mut grads, *a, &g),
                Op::Abs(a) => {
                    let ga: Vec<f64> = g
                        .iter()
                        .zip(self.data(*a))
                        .map(|(v, &x)| {
                            if x > 0.0 {
                                *v
                            } else if x < 0.0 {
                                -v
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    accumulate(&mut grads, *a, &ga);
                }
                Op::Exp(a) => {
                    let ga: Vec<f64> = g
                        .iter()
                        .zip(node.value.data())
                        .map(|(v, y)| v * y)
                        .collect();
                    accumulate(&mut grads, *a, &ga);
                }
                Op::Ln(a) => {
                    let ga: Vec<f64> = g.iter().zip(self.data(*a)).map(|(v, x)| v / x).collect();
                    accumulate(&mut grads, *a, &ga);
                }
                Op::Activate(a, act) => {
                    let ga: Vec<f64> = g
                        .iter()
                        .zip(self.data(*a).iter().zip(node.value.data()))
                        .map(|(v, (&x, &y))| v * act.derivative(x, y))
                        .collect();
                    accumulate(&mut grads, *a, &ga);
                }
                Op::LogSumExp {
                    input,
                    outer,
                    len,
                    inner,
                } => {
                    let xd = self.data(*input);
                    let yd = node.value.data();
                    let mut gx = vec![0.0; xd.len()];
                    for o in 0..*outer {
                        for i in 0..*inner {
                            let gy = g[o * inner + i];
                            let y = yd[o * inner + i];
                            for k in 0..*len {
                                let at = (o * len + k) * inner + i;
                                gx[at] = gy * (xd[at] - y).exp();
                            }
                        }
                    }
                    accumulate(&mut grads, *input, &gx);
                }
                Op::Gather { input, indices } => {
                    let m = self.shape(*input)[1];
                    let mut gx = vec![0.0; self.data(*input).len()];
                    for (i, (&j, &v)) in indices.iter().zip(&g).enumerate() {
                        gx[i * m + j] = v;
                    }
                    accumulate(&mut grads, *input, &gx);
                }
                Op::Sum(x) => {
                    let gx = vec![g[0]; self.data(*x).len()];
                    accumulate(&mut grads, *x, &gx);
                }
                Op::Mean(x) => {
                    let n = self.data(*x).len();
                    let gx = vec![g[0] / n as f64; n];
                    accumulate(&mut grads, *x, &gx);
                }
            }
        }
        let shapes = self
            .nodes
            .iter()
            .map(|n| n.value.shape().to_vec())
            .collect();
        let differentiable = self
            .nodes
            .iter()
            .map(|n| matches!(n.op, Op::Leaf) && n.requires_grad)
            .collect();
        Ok(Gradients {
            leaves,
            shapes,
            differentiable,
        })
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], v: Var, contribution: &[f64]) {
    match &mut grads[v.0] {
        Some(acc) => {
            for (a, c) in acc.iter_mut().zip(contribution) {
                *a += c;
            }
        }
        slot @ None => *slot = Some(contribution.to_vec()),
    }
}

/// Gradients of one backward pass, indexed by leaf.
#[derive(Clone, Debug)]
pub struct Gradients {
    leaves: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
    differentiable: Vec<bool>,
}

impl Gradients {
    /// Gradient with respect to a differentiable leaf; zero if the leaf did not
    /// contribute to the output. `None` for constants and interior nodes.
    pub fn wrt(&self, v: Var) -> Option<Tensor> {
        if !self.differentiable.get(v.0).copied().unwrap_or(false) {
            return None;
        }
        Some(match &self.leaves[v.0] {
            Some(t) => t.clone(),
            None => Tensor::zeros(&self.shapes[v.0]),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::LN_2;

    #[test]
    fn square_has_gradient_six_at_three() {
        let mut t = Tape::new();
        let x = t.variable(Tensor::scalar(3.0));
        let y = t.mul(x, x);
        let g = t.backward(y).unwrap();
        assert_eq!(g.wrt(x).unwrap().data(), &[6.0]);
    }

    #[test]
    fn logsumexp_symmetric_gradient() {
        let mut t = Tape::new();
        let x = t.variable(Tensor::vector(vec![0.0, 0.0]));
        let y = t.logsumexp(x, 0);
        assert!((t.value(y).item().unwrap() - LN_2).abs() < 1e-15);
        let g = t.backward(y).unwrap();
        assert_eq!(g.wrt(x).unwrap().data(), &[0.5, 0.5]);
    }

    #[test]
    fn logsumexp_values() {
        let mut t = Tape::new();
        let big = t.constant(Tensor::vector(vec![1000.0, 1000.0]));
        let y = t.logsumexp(big, 0);
        assert!((t.value(y).item().unwrap() - (1000.0 + LN_2)).abs() < 1e-12);
        let x = t.constant(Tensor::vector(vec![1.0, 2.0, 3.0]));
        let y = t.logsumexp(x, 0);
        // 3 + ln(1 + e^-1 + e^-2)
        assert!((t.value(y).item().unwrap() - 3.407_605_964_444_38).abs() < 1e-14);
        let one = t.constant(Tensor::vector(vec![-7.25]));
        let y = t.logsumexp(one, 0);
        assert_eq!(t.value(y).item().unwrap(), -7.25);
    }

    #[test]
    fn logsumexp_along_each_axis() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::new(vec![2, 3], vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap());
        let rows = t.logsumexp(x, 1);
        let cols = t.logsumexp(x, 0);
        assert_eq!(t.shape(rows), &[2]);
        assert_eq!(t.shape(cols), &[3]);
        let r = crate::numeric::logsumexp(&[3.0, 4.0, 5.0]);
        assert!((t.value(rows).data()[1] - r).abs() < 1e-15);
        let c = crate::numeric::logsumexp(&[1.0, 4.0]);
        assert!((t.value(cols).data()[1] - c).abs() < 1e-15);
    }

    #[test]
    #[should_panic(expected = "empty axis")]
    fn logsumexp_empty_axis_panics() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::zeros(&[2, 0]));
        t.logsumexp(x, 1);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut t = Tape::new();
        let x = t.variable(Tensor::vector(vec![1.0, 2.0]));
        let y = t.scale(x, 2.0);
        assert!(matches!(t.backward(y), Err(Error::Contract(_))));
    }

    #[test]
    fn unused_leaf_gets_zero_and_constants_none() {
        let mut t = Tape::new();
        let x = t.variable(Tensor::vector(vec![1.0, 2.0]));
        let unused = t.variable(Tensor::zeros(&[3]));
        let c = t.constant(Tensor::vector(vec![5.0, 6.0]));
        let y = t.mul(x, c);
        let s = t.sum(y);
        let g = t.backward(s).unwrap();
        assert_eq!(g.wrt(x).unwrap().data(), &[5.0, 6.0]);
        assert_eq!(g.wrt(unused).unwrap().data(), &[0.0, 0.0, 0.0]);
        assert!(g.wrt(c).is_none());
        assert!(g.wrt(y).is_none());
    }

    #[test]
    fn abs_subgradient_zero_at_zero() {
        let mut t = Tape::new();
        let x = t.variable(Tensor::vector(vec![-2.0, 0.0, 3.0]));
        let a = t.abs(x);
        let s = t.sum(a);
        let g = t.backward(s).unwrap();
        assert_eq!(g.wrt(x).unwrap().data(), &[-1.0, 0.0, 1.0]);
    }
}
