//! Pure tensor kernels. The tape records these and their adjoints.

use super::{Tensor, TensorError};

fn require_rank(op: &'static str, t: &Tensor, rank: usize) -> Result<(), TensorError> {
    if t.rank() != rank {
        return Err(TensorError::Rank {
            op,
            expected: rank,
            shape: t.shape().to_vec(),
        });
    }
    Ok(())
}

pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    require_rank("matmul", a, 2)?;
    require_rank("matmul", b, 2)?;
    let (m, k) = (a.shape()[0], a.shape()[1]);
    let (k2, n) = (b.shape()[0], b.shape()[1]);
    if k != k2 {
        return Err(TensorError::Shape {
            op: "matmul",
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = ad[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &bd[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Tensor::new(vec![m, n], out)
}

pub fn transpose(a: &Tensor) -> Result<Tensor, TensorError> {
    require_rank("transpose", a, 2)?;
    let (r, c) = (a.shape()[0], a.shape()[1]);
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = a.data()[i * c + j];
        }
    }
    Tensor::new(vec![c, r], out)
}

/// Applies `f` elementwise, broadcasting a one-element operand over the other.
pub(crate) fn zip_broadcast(
    op: &'static str,
    a: &Tensor,
    b: &Tensor,
    f: impl Fn(f64, f64) -> f64,
) -> Result<Tensor, TensorError> {
    if a.shape() == b.shape() {
        let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
        return Tensor::new(a.shape().to_vec(), data);
    }
    if b.len() == 1 {
        let y = b.data()[0];
        return Ok(a.map(|x| f(x, y)));
    }
    if a.len() == 1 {
        let x = a.data()[0];
        return Ok(b.map(|y| f(x, y)));
    }
    Err(TensorError::Shape {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    })
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    zip_broadcast("add", a, b, |x, y| x + y)
}

pub fn sub(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    zip_broadcast("sub", a, b, |x, y| x - y)
}

pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    zip_broadcast("mul", a, b, |x, y| x * y)
}

pub fn scale(a: &Tensor, c: f64) -> Tensor {
    a.map(|x| x * c)
}

pub fn relu(a: &Tensor) -> Tensor {
    a.map(|x| if x > 0.0 { x } else { 0.0 })
}

pub fn leaky_relu(a: &Tensor, slope: f64) -> Tensor {
    a.map(|x| if x > 0.0 { x } else { slope * x })
}

/// Numerically stable softmax of a rank-1 tensor.
pub fn softmax(x: &Tensor) -> Result<Tensor, TensorError> {
    require_rank("softmax", x, 1)?;
    if x.is_empty() {
        return Err(TensorError::Contract("softmax of an empty vector"));
    }
    Ok(Tensor::vector(softmax_slice(x.data())))
}

pub(crate) fn softmax_slice(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|&v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Row-wise softmax of a matrix restricted to entries where `mask` is nonzero.
/// Masked-out entries are 0; a row with no admissible entries is all 0.
pub fn masked_softmax_rows(x: &Tensor, mask: &Tensor) -> Result<Tensor, TensorError> {
    require_rank("masked_softmax_rows", x, 2)?;
    if x.shape() != mask.shape() {
        return Err(TensorError::Shape {
            op: "masked_softmax_rows",
            lhs: x.shape().to_vec(),
            rhs: mask.shape().to_vec(),
        });
    }
    let cols = x.shape()[1];
    let mut out = vec![0.0; x.len()];
    for (r, orow) in out.chunks_mut(cols.max(1)).enumerate() {
        let xrow = &x.data()[r * cols..(r + 1) * cols];
        let mrow = &mask.data()[r * cols..(r + 1) * cols];
        let max = xrow
            .iter()
            .zip(mrow)
            .filter(|(_, &m)| m != 0.0)
            .map(|(&v, _)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            continue;
        }
        let mut total = 0.0;
        for ((o, &v), &m) in orow.iter_mut().zip(xrow).zip(mrow) {
            if m != 0.0 {
                *o = (v - max).exp();
                total += *o;
            }
        }
        for o in orow.iter_mut() {
            *o /= total;
        }
    }
    Tensor::new(x.shape().to_vec(), out)
}

/// Reduction kind for [`reduce`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reduction {
    Sum,
    Mean,
}

/// Reduces along `axis`, dropping that axis. `None` reduces everything to a
/// one-element tensor.
pub fn reduce(x: &Tensor, kind: Reduction, axis: Option<usize>) -> Result<Tensor, TensorError> {
    let Some(axis) = axis else {
        let s: f64 = x.data().iter().sum();
        let v = match kind {
            Reduction::Sum => s,
            Reduction::Mean => s / x.len() as f64,
        };
        return Ok(Tensor::scalar(v));
    };
    if axis >= x.rank() || x.rank() > 2 {
        return Err(TensorError::Axis {
            axis,
            shape: x.shape().to_vec(),
        });
    }
    if x.rank() == 1 {
        return reduce(x, kind, None);
    }
    let (r, c) = (x.shape()[0], x.shape()[1]);
    let (out_len, n) = if axis == 0 { (c, r) } else { (r, c) };
    let mut out = vec![0.0; out_len];
    for i in 0..r {
        for j in 0..c {
            let slot = if axis == 0 { j } else { i };
            out[slot] += x.data()[i * c + j];
        }
    }
    if kind == Reduction::Mean {
        for o in &mut out {
            *o /= n as f64;
        }
    }
    Ok(Tensor::vector(out))
}

/// Concatenates along `axis`. All other axes must agree.
pub fn concat(parts: &[&Tensor], axis: usize) -> Result<Tensor, TensorError> {
    let first = parts
        .first()
        .ok_or(TensorError::Contract("concat of zero tensors"))?;
    let rank = first.rank();
    if axis >= rank {
        return Err(TensorError::Axis {
            axis,
            shape: first.shape().to_vec(),
        });
    }
    for p in parts {
        let compatible = p.rank() == rank
            && p.shape()
                .iter()
                .zip(first.shape())
                .enumerate()
                .all(|(ax, (a, b))| ax == axis || a == b);
        if !compatible {
            return Err(TensorError::Shape {
                op: "concat",
                lhs: first.shape().to_vec(),
                rhs: p.shape().to_vec(),
            });
        }
    }
    let mut shape = first.shape().to_vec();
    shape[axis] = parts.iter().map(|p| p.shape()[axis]).sum();
    // rows of the outer index, each row is the contiguous block from every part
    let outer: usize = first.shape()[..axis].iter().product();
    let mut data = Vec::with_capacity(shape.iter().product());
    for o in 0..outer {
        for p in parts {
            let block: usize = p.shape()[axis..].iter().product();
            data.extend_from_slice(&p.data()[o * block..(o + 1) * block]);
        }
    }
    Tensor::new(shape, data)
}

/// Rows `start..start + len` along axis 0.
pub fn slice_rows(x: &Tensor, start: usize, len: usize) -> Result<Tensor, TensorError> {
    if x.rank() == 0 || start + len > x.shape()[0] {
        return Err(TensorError::Contract("slice out of bounds"));
    }
    let block: usize = x.shape()[1..].iter().product();
    let mut shape = x.shape().to_vec();
    shape[0] = len;
    Tensor::new(shape, x.data()[start * block..(start + len) * block].to_vec())
}
