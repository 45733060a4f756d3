use alloc::format;
use alloc::vec;

use crate::error::{Error, Result};
use crate::gemm::{matmul, matmul_bt, transpose};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

fn check(input: &Tensor, weights: &Tensor) -> Result<(usize, usize, usize)> {
    let (n, f) = input.dims2()?;
    let (wf, g) = weights.dims2()?;
    if wf != f {
        return Err(Error::ShapeMismatch(format!("dense input has {f} features, weights expect {wf}")));
    }
    Ok((n, f, g))
}

/// Affine map `input · weights + bias` for `input: [N, F]`, `weights: [F, G]`.
pub fn dense(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (n, f, g) = check(input, weights)?;
    bias.ensure_shape(&[g], "dense bias")?;
    let mut out = vec![0.0; n * g];
    matmul(input.data(), weights.data(), &mut out, n, f, g);
    for row in out.chunks_exact_mut(g) {
        for (v, b) in row.iter_mut().zip(bias.data()) {
            *v += b;
        }
    }
    Tensor::new(&[n, g], out)
}

pub fn dense_backward(input: &Tensor, weights: &Tensor, grad_output: &Tensor) -> Result<DenseGrads> {
    let (n, f, g) = check(input, weights)?;
    grad_output.ensure_shape(&[n, g], "dense grad_output")?;
    let mut gi = vec![0.0; n * f];
    matmul_bt(grad_output.data(), weights.data(), &mut gi, n, g, f);
    let xt = transpose(input.data(), n, f);
    let mut gw = vec![0.0; f * g];
    matmul(&xt, grad_output.data(), &mut gw, f, n, g);
    let mut gb = vec![0.0; g];
    for row in grad_output.data().chunks_exact(g) {
        for (b, v) in gb.iter_mut().zip(row) {
            *b += v;
        }
    }
    Ok(DenseGrads {
        input: Tensor::new(&[n, f], gi)?,
        weights: Tensor::new(&[f, g], gw)?,
        bias: Tensor::new(&[g], gb)?,
    })
}
