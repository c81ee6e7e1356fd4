use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{ParamId, ParamStore};
use crate::tensor::{Tape, TensorError, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    None,
    Relu,
}

/// Fully connected layer `activation(x W + b)` on a `1 x in` row.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub input_dim: usize,
    pub output_dim: usize,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        output_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        Self {
            weight: store.add_uniform(format!("{prefix}.weight"), input_dim, output_dim, rng),
            bias: store.add_zeros(format!("{prefix}.bias"), &[1, output_dim]),
            input_dim,
            output_dim,
            activation,
        }
    }

    pub fn forward(&self, tape: &mut Tape, params: &[Var], x: Var) -> Result<Var, TensorError> {
        dense_forward(tape, params[self.weight.0], params[self.bias.0], x, self.activation)
    }
}

pub fn dense_forward(
    tape: &mut Tape,
    weight: Var,
    bias: Var,
    x: Var,
    activation: Activation,
) -> Result<Var, TensorError> {
    let xw = tape.matmul(x, weight)?;
    let y = tape.add(xw, bias)?;
    match activation {
        Activation::None => Ok(y),
        Activation::Relu => tape.relu(y),
    }
}

/// Stack of dense layers: relu on hidden layers, linear output.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
}

impl Mlp {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden: &[usize],
        output_dim: usize,
        rng: &mut R,
    ) -> Self {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(output_dim);
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let act = if l == last {
                    Activation::None
                } else {
                    Activation::Relu
                };
                DenseLayer::new(store, &format!("{prefix}.{l}"), w[0], w[1], act, rng)
            })
            .collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim
    }

    pub fn forward(&self, tape: &mut Tape, params: &[Var], x: Var) -> Result<Var, TensorError> {
        self.layers
            .iter()
            .try_fold(x, |h, layer| layer.forward(tape, params, h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn run(w: Tensor, b: Tensor, x: Tensor, act: Activation) -> Vec<f64> {
        let mut t = Tape::new();
        let (w, b, x) = (t.leaf(w), t.leaf(b), t.leaf(x));
        let y = dense_forward(&mut t, w, b, x, act).unwrap();
        t.value(y).data().to_vec()
    }

    #[test]
    fn dense_examples() {
        let x = Tensor::from_rows(&[vec![-1.0, 1.0]]);
        let zero_b = Tensor::zeros(&[1, 2]);
        assert_eq!(run(Tensor::identity(2), zero_b.clone(), x.clone(), Activation::None), vec![-1.0, 1.0]);
        assert_eq!(run(Tensor::identity(2), zero_b, x, Activation::Relu), vec![0.0, 1.0]);
        let w = Tensor::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0]]);
        let b = Tensor::from_rows(&[vec![1.0, 1.0]]);
        let x = Tensor::from_rows(&[vec![1.0, 1.0]]);
        assert_eq!(run(w, b, x, Activation::None), vec![3.0, 3.0]);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut t = Tape::new();
        let w = t.leaf(Tensor::zeros(&[3, 2]));
        let b = t.leaf(Tensor::zeros(&[1, 2]));
        let x = t.leaf(Tensor::zeros(&[1, 2]));
        assert!(dense_forward(&mut t, w, b, x, Activation::None).is_err());
    }
}
