use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolKind {
    Max,
    Avg,
}

fn pooled_extent(len: usize, window: usize, stride: usize) -> Result<usize> {
    if window == 0 || stride == 0 {
        return Err(Error::ConfigInvalid("pool window and stride must be positive".into()));
    }
    if window > len {
        return Err(Error::DegenerateOutput(format!("pool window {window} exceeds input extent {len}")));
    }
    Ok((len - window) / stride + 1)
}

pub fn pool2d(input: &Tensor, kind: PoolKind, window: (usize, usize), stride: (usize, usize)) -> Result<Tensor> {
    pool2d_with_indices(input, kind, window, stride).map(|(t, _)| t)
}

/// Pooling that also returns, for max pooling, the flat input index routed to
/// each output. Ties go to the first element in row-major window order.
pub fn pool2d_with_indices(
    input: &Tensor,
    kind: PoolKind,
    window: (usize, usize),
    stride: (usize, usize),
) -> Result<(Tensor, Vec<usize>)> {
    let (n, c, h, w) = input.dims4()?;
    let ho = pooled_extent(h, window.0, stride.0)?;
    let wo = pooled_extent(w, window.1, stride.1)?;
    let x = input.data();
    let count = (window.0 * window.1) as f64;
    let mut out = Vec::with_capacity(n * c * ho * wo);
    let mut argmax = Vec::new();
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..ho {
            for ox in 0..wo {
                let (y0, x0) = (oy * stride.0, ox * stride.1);
                match kind {
                    PoolKind::Max => {
                        let mut best = base + y0 * w + x0;
                        for dy in 0..window.0 {
                            for dx in 0..window.1 {
                                let idx = base + (y0 + dy) * w + x0 + dx;
                                if x[idx] > x[best] {
                                    best = idx;
                                }
                            }
                        }
                        out.push(x[best]);
                        argmax.push(best);
                    }
                    PoolKind::Avg => {
                        let mut acc = 0.0;
                        for dy in 0..window.0 {
                            for dx in 0..window.1 {
                                acc += x[base + (y0 + dy) * w + x0 + dx];
                            }
                        }
                        out.push(acc / count);
                    }
                }
            }
        }
    }
    Ok((Tensor::new(&[n, c, ho, wo], out)?, argmax))
}

pub fn pool2d_backward(
    input_shape: &[usize],
    kind: PoolKind,
    window: (usize, usize),
    stride: (usize, usize),
    argmax: &[usize],
    grad_output: &Tensor,
) -> Result<Tensor> {
    let probe = Tensor::zeros(input_shape);
    let (n, c, h, w) = probe.dims4()?;
    let ho = pooled_extent(h, window.0, stride.0)?;
    let wo = pooled_extent(w, window.1, stride.1)?;
    grad_output.ensure_shape(&[n, c, ho, wo], "pool grad_output")?;
    let mut grad = probe.into_data();
    let g = grad_output.data();
    match kind {
        PoolKind::Max => {
            if argmax.len() != g.len() {
                return Err(Error::ShapeMismatch("max-pool routing does not match grad_output".into()));
            }
            for (&idx, &v) in argmax.iter().zip(g) {
                grad[idx] += v;
            }
        }
        PoolKind::Avg => {
            let count = (window.0 * window.1) as f64;
            for plane in 0..n * c {
                let base = plane * h * w;
                for oy in 0..ho {
                    for ox in 0..wo {
                        let v = g[(plane * ho + oy) * wo + ox] / count;
                        for dy in 0..window.0 {
                            for dx in 0..window.1 {
                                grad[base + (oy * stride.0 + dy) * w + ox * stride.1 + dx] += v;
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::new(input_shape, grad)
}

/// Per-channel spatial mean: `[N, C, H, W] -> [N, C]`.
pub fn global_avg_pool(input: &Tensor) -> Result<Tensor> {
    let (n, c, h, w) = input.dims4()?;
    let plane = h * w;
    let data = input.data().chunks_exact(plane).map(|p| p.iter().sum::<f64>() / plane as f64).collect();
    Tensor::new(&[n, c], data)
}

pub fn global_avg_pool_backward(input_shape: &[usize], grad_output: &Tensor) -> Result<Tensor> {
    let probe = Tensor::zeros(input_shape);
    let (n, c, h, w) = probe.dims4()?;
    grad_output.ensure_shape(&[n, c], "global_avg_pool grad_output")?;
    let plane = h * w;
    let mut grad = vec![0.0; n * c * plane];
    for (chunk, &g) in grad.chunks_exact_mut(plane).zip(grad_output.data()) {
        chunk.fill(g / plane as f64);
    }
    Tensor::new(input_shape, grad)
}
