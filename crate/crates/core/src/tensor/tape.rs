use std::sync::atomic::{AtomicU32, Ordering};

use super::ops::{self, Reduction};
use super::{Tensor, TensorError};

static NEXT_TAPE: AtomicU32 = AtomicU32::new(1);

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u32,
    index: u32,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    LeakyRelu(Var, f64),
    Exp(Var),
    Log(Var),
    Softmax(Var),
    MaskedSoftmaxRows(Var),
    Reduce(Var, Reduction, Option<usize>),
    Concat(Vec<Var>, usize),
    Transpose(Var),
    SliceRows(Var, usize),
    Reshape(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Records operations for one forward pass.
///
/// Nodes are appended in evaluation order, so the node list is already a
/// topological order of the computation DAG.
#[derive(Debug)]
pub struct Tape {
    id: u32,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn check(&self, v: Var) -> Result<&Node, TensorError> {
        if v.tape != self.id {
            return Err(TensorError::ForeignVar);
        }
        Ok(&self.nodes[v.index as usize])
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        let index = self.nodes.len() as u32;
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var {
            tape: self.id,
            index,
        }
    }

    fn grad_any(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.index as usize].needs_grad)
    }

    /// Registers a differentiable leaf (a parameter or input of interest).
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Registers a constant; no gradient flows into it.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        assert_eq!(v.tape, self.id, "variable belongs to a different tape");
        &self.nodes[v.index as usize].value
    }

    fn unary(
        &mut self,
        a: Var,
        f: impl FnOnce(&Tensor) -> Result<Tensor, TensorError>,
        op: Op,
    ) -> Result<Var, TensorError> {
        let node = self.check(a)?;
        let value = f(&node.value)?;
        let g = node.needs_grad;
        Ok(self.push(value, op, g))
    }

    fn binary(
        &mut self,
        a: Var,
        b: Var,
        f: impl FnOnce(&Tensor, &Tensor) -> Result<Tensor, TensorError>,
        op: Op,
    ) -> Result<Var, TensorError> {
        let value = f(&self.check(a)?.value, &self.check(b)?.value)?;
        let g = self.grad_any(&[a, b]);
        Ok(self.push(value, op, g))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary(a, b, ops::matmul, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary(a, b, ops::add, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary(a, b, ops::sub, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary(a, b, ops::mul, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var, TensorError> {
        self.unary(a, |t| Ok(ops::scale(t, c)), Op::Scale(a, c))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, TensorError> {
        self.unary(a, |t| Ok(ops::relu(t)), Op::Relu(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var, TensorError> {
        self.unary(a, |t| Ok(ops::leaky_relu(t, slope)), Op::LeakyRelu(a, slope))
    }

    pub fn exp(&mut self, a: Var) -> Result<Var, TensorError> {
        self.unary(a, |t| Ok(t.map(f64::exp)), Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Result<Var, TensorError> {
        self.unary(a, |t| Ok(t.map(f64::ln)), Op::Log(a))
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var, TensorError> {
        self.unary(a, ops::softmax, Op::Softmax(a))
    }

    /// Row-wise softmax over entries where `mask` is nonzero. The mask is a
    /// constant.
    pub fn masked_softmax_rows(&mut self, a: Var, mask: &Tensor) -> Result<Var, TensorError> {
        self.unary(
            a,
            |t| ops::masked_softmax_rows(t, mask),
            Op::MaskedSoftmaxRows(a),
        )
    }

    pub fn reduce(
        &mut self,
        a: Var,
        kind: Reduction,
        axis: Option<usize>,
    ) -> Result<Var, TensorError> {
        self.unary(a, |t| ops::reduce(t, kind, axis), Op::Reduce(a, kind, axis))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var, TensorError> {
        self.reduce(a, Reduction::Sum, None)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var, TensorError> {
        self.reduce(a, Reduction::Mean, None)
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var, TensorError> {
        let mut values = Vec::with_capacity(parts.len());
        for &p in parts {
            values.push(&self.check(p)?.value);
        }
        let value = ops::concat(&values, axis)?;
        let g = self.grad_any(parts);
        Ok(self.push(value, Op::Concat(parts.to_vec(), axis), g))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, TensorError> {
        self.unary(a, ops::transpose, Op::Transpose(a))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var, TensorError> {
        self.unary(
            a,
            |t| ops::slice_rows(t, start, len),
            Op::SliceRows(a, start),
        )
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var, TensorError> {
        self.unary(a, |t| t.reshape(shape), Op::Reshape(a))
    }

    /// Reverse-mode sweep from a one-element `output`.
    ///
    /// Takes `&self`, so the same tape can be swept repeatedly with identical
    /// results.
    pub fn backward(&self, output: Var) -> Result<Gradients, TensorError> {
        let out = self.check(output)?;
        if out.value.len() != 1 {
            return Err(TensorError::NotScalar(out.value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[output.index as usize] = Some(Tensor::filled(out.value.shape(), 1.0));

        for idx in (0..=output.index as usize).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if node.needs_grad {
                self.propagate(node, &g, &mut grads)?;
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients {
            tape: self.id,
            grads,
        })
    }

    fn propagate(
        &self,
        node: &Node,
        g: &Tensor,
        grads: &mut [Option<Tensor>],
    ) -> Result<(), TensorError> {
        let val = |v: Var| &self.nodes[v.index as usize].value;
        let mut acc = |v: Var, contrib: Tensor| -> Result<(), TensorError> {
            let i = v.index as usize;
            if !self.nodes[i].needs_grad {
                return Ok(());
            }
            grads[i] = Some(match grads[i].take() {
                Some(prev) => ops::add(&prev, &contrib)?,
                None => contrib,
            });
            Ok(())
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                acc(*a, ops::matmul(g, &ops::transpose(val(*b))?)?)?;
                acc(*b, ops::matmul(&ops::transpose(val(*a))?, g)?)?;
            }
            Op::Add(a, b) => {
                acc(*a, unbroadcast(g.clone(), val(*a)))?;
                acc(*b, unbroadcast(g.clone(), val(*b)))?;
            }
            Op::Sub(a, b) => {
                acc(*a, unbroadcast(g.clone(), val(*a)))?;
                acc(*b, unbroadcast(ops::scale(g, -1.0), val(*b)))?;
            }
            Op::Mul(a, b) => {
                acc(*a, unbroadcast(ops::mul(g, val(*b))?, val(*a)))?;
                acc(*b, unbroadcast(ops::mul(g, val(*a))?, val(*b)))?;
            }
            Op::Scale(a, c) => acc(*a, ops::scale(g, *c))?,
            Op::Relu(a) => {
                let mask = val(*a).map(|x| if x > 0.0 { 1.0 } else { 0.0 });
                acc(*a, ops::mul(g, &mask)?)?;
            }
            Op::LeakyRelu(a, slope) => {
                let s = *slope;
                let mask = val(*a).map(|x| if x > 0.0 { 1.0 } else { s });
                acc(*a, ops::mul(g, &mask)?)?;
            }
            Op::Exp(a) => acc(*a, ops::mul(g, &node.value)?)?,
            Op::Log(a) => acc(*a, ops::zip_broadcast("log", g, val(*a), |g, x| g / x)?)?,
            Op::Softmax(a) => {
                let y = node.value.data();
                let dot: f64 = g.data().iter().zip(y).map(|(g, y)| g * y).sum();
                let dx = y.iter().zip(g.data()).map(|(y, g)| y * (g - dot)).collect();
                acc(*a, Tensor::vector(dx))?;
            }
            Op::MaskedSoftmaxRows(a) => {
                let cols = node.value.shape()[1];
                let mut dx = vec![0.0; node.value.len()];
                for ((drow, yrow), grow) in dx
                    .chunks_mut(cols.max(1))
                    .zip(node.value.data().chunks(cols.max(1)))
                    .zip(g.data().chunks(cols.max(1)))
                {
                    let dot: f64 = grow.iter().zip(yrow).map(|(g, y)| g * y).sum();
                    for ((d, &y), &gv) in drow.iter_mut().zip(yrow).zip(grow) {
                        *d = y * (gv - dot);
                    }
                }
                acc(*a, Tensor::new(node.value.shape().to_vec(), dx)?)?;
            }
            Op::Reduce(a, kind, axis) => {
                let x = val(*a);
                let n = match axis {
                    None => x.len(),
                    Some(ax) => x.shape()[*ax],
                };
                let factor = match kind {
                    Reduction::Sum => 1.0,
                    Reduction::Mean => 1.0 / n as f64,
                };
                let mut dx = vec![0.0; x.len()];
                match axis {
                    Some(ax) if x.rank() == 2 => {
                        let c = x.shape()[1];
                        for (k, d) in dx.iter_mut().enumerate() {
                            let slot = if *ax == 0 { k % c } else { k / c };
                            *d = g.data()[slot] * factor;
                        }
                    }
                    _ => dx.iter_mut().for_each(|d| *d = g.data()[0] * factor),
                }
                acc(*a, Tensor::new(x.shape().to_vec(), dx)?)?;
            }
            Op::Concat(parts, axis) => {
                let outer: usize = node.value.shape()[..*axis].iter().product();
                let row: usize = node.value.shape()[*axis..].iter().product();
                let mut offset = 0;
                for &p in parts {
                    let pv = val(p);
                    let block: usize = pv.shape()[*axis..].iter().product();
                    let mut d = Vec::with_capacity(pv.len());
                    for o in 0..outer {
                        let start = o * row + offset;
                        d.extend_from_slice(&g.data()[start..start + block]);
                    }
                    offset += block;
                    acc(p, Tensor::new(pv.shape().to_vec(), d)?)?;
                }
            }
            Op::Transpose(a) => acc(*a, ops::transpose(g)?)?,
            Op::SliceRows(a, start) => {
                let x = val(*a);
                let block: usize = x.shape()[1..].iter().product();
                let mut dx = Tensor::zeros(x.shape());
                dx.data_mut()[start * block..start * block + g.len()].copy_from_slice(g.data());
                acc(*a, dx)?;
            }
            Op::Reshape(a) => acc(*a, g.reshape(val(*a).shape())?)?,
        }
        Ok(())
    }
}

/// Sums a gradient back down to a one-element operand that was broadcast.
fn unbroadcast(g: Tensor, operand: &Tensor) -> Tensor {
    if g.shape() == operand.shape() {
        g
    } else {
        let s: f64 = g.data().iter().sum();
        Tensor::filled(operand.shape(), s)
    }
}

/// Gradients produced by [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    tape: u32,
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient with respect to `v`; a zero tensor when `v` did not influence
    /// the output.
    pub fn get(&self, tape: &Tape, v: Var) -> Tensor {
        assert_eq!(v.tape, self.tape, "variable belongs to a different tape");
        match self.grads.get(v.index as usize).and_then(Option::as_ref) {
            Some(g) => g.clone(),
            None => Tensor::zeros(tape.value(v).shape()),
        }
    }
}

/// Central-difference gradient of `f` at `params`, one coordinate at a time.
pub fn finite_diff_gradient<F>(mut f: F, params: &[Tensor], h: f64) -> Vec<Tensor>
where
    F: FnMut(&[Tensor]) -> f64,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut work = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for p in 0..params.len() {
        let mut grad = Tensor::zeros(params[p].shape());
        for k in 0..params[p].len() {
            let orig = work[p].data()[k];
            work[p].data_mut()[k] = orig + h;
            let plus = f(&work);
            work[p].data_mut()[k] = orig - h;
            let minus = f(&work);
            work[p].data_mut()[k] = orig;
            grad.data_mut()[k] = (plus - minus) / (2.0 * h);
        }
        out.push(grad);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_and_square() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::scalar(2.0));
        let y = t.scale(x, 3.0).unwrap();
        let g = t.backward(y).unwrap();
        assert_eq!(g.get(&t, x).data(), &[3.0]);

        let mut t = Tape::new();
        let x = t.leaf(Tensor::scalar(5.0));
        let y = t.mul(x, x).unwrap();
        let g = t.backward(y).unwrap();
        assert_eq!(g.get(&t, x).data(), &[10.0]);
    }

    #[test]
    fn softmax_first_component_gradient() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::vector(vec![0.7, 0.7]));
        let p = t.softmax(x).unwrap();
        let p0 = t.slice_rows(p, 0, 1).unwrap();
        let g = t.backward(p0).unwrap();
        let gx = g.get(&t, x);
        assert!((gx.data()[0] - 0.25).abs() < 1e-15);
        assert!((gx.data()[1] + 0.25).abs() < 1e-15);
    }

    #[test]
    fn non_scalar_output_is_rejected() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::vector(vec![1.0, 2.0]));
        assert!(matches!(t.backward(x), Err(TensorError::NotScalar(_))));
    }

    #[test]
    fn untouched_leaf_gets_zero_gradient() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::scalar(1.0));
        let unused = t.leaf(Tensor::zeros(&[2, 3]));
        let y = t.scale(x, 2.0).unwrap();
        let g = t.backward(y).unwrap();
        assert_eq!(g.get(&t, unused), Tensor::zeros(&[2, 3]));
    }

    #[test]
    fn foreign_variables_are_rejected() {
        let mut a = Tape::new();
        let mut b = Tape::new();
        let x = a.leaf(Tensor::scalar(1.0));
        assert_eq!(b.relu(x), Err(TensorError::ForeignVar));
    }

    #[test]
    fn finite_differences_of_square_and_constant() {
        let g = finite_diff_gradient(|p| p[0].data()[0].powi(2), &[Tensor::scalar(3.0)], 1e-5);
        assert!((g[0].data()[0] - 6.0).abs() < 1e-8);
        let g = finite_diff_gradient(|_| 4.2, &[Tensor::vector(vec![1.0, -1.0])], 1e-5);
        assert_eq!(g[0].data(), &[0.0, 0.0]);
    }
}
