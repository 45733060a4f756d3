use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Interpolation taps along one axis: output sample `i` reads
/// `(1 - frac) * src[lo] + frac * src[hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisTap {
    pub lo: usize,
    pub hi: usize,
    pub frac: f64,
}

/// Corner-aligned sampling: `src = dst * (src_len - 1) / (dst_len - 1)`, and a
/// single output sample maps to source 0.
pub fn axis_taps(src_len: usize, dst_len: usize) -> Vec<AxisTap> {
    (0..dst_len)
        .map(|i| {
            if dst_len == 1 || src_len == 1 {
                return AxisTap { lo: 0, hi: 0, frac: 0.0 };
            }
            let pos = (i * (src_len - 1)) as f64 / (dst_len - 1) as f64;
            let lo = (libm::floor(pos) as usize).min(src_len - 1);
            let hi = (lo + 1).min(src_len - 1);
            AxisTap { lo, hi, frac: pos - lo as f64 }
        })
        .collect()
}

/// Bilinear resize of every `[H, W]` plane of an `[N, C, H, W]` tensor.
pub fn resize_bilinear(input: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (n, c, h, w) = input.dims4()?;
    if out_h == 0 || out_w == 0 {
        return Err(Error::DegenerateOutput("resize target must be at least 1x1".into()));
    }
    let ty = axis_taps(h, out_h);
    let tx = axis_taps(w, out_w);
    let mut out = Vec::with_capacity(n * c * out_h * out_w);
    for plane in input.data().chunks_exact(h * w) {
        for y in &ty {
            let r0 = &plane[y.lo * w..(y.lo + 1) * w];
            let r1 = &plane[y.hi * w..(y.hi + 1) * w];
            for x in &tx {
                let top = (1.0 - x.frac) * r0[x.lo] + x.frac * r0[x.hi];
                let bottom = (1.0 - x.frac) * r1[x.lo] + x.frac * r1[x.hi];
                out.push((1.0 - y.frac) * top + y.frac * bottom);
            }
        }
    }
    Tensor::new(&[n, c, out_h, out_w], out)
}

pub fn resize_bilinear_backward(input_shape: &[usize], grad_output: &Tensor) -> Result<Tensor> {
    let probe = Tensor::zeros(input_shape);
    let (n, c, h, w) = probe.dims4()?;
    let (gn, gc, out_h, out_w) = grad_output.dims4()?;
    if (gn, gc) != (n, c) {
        return Err(Error::ShapeMismatch("resize grad_output batch/channels differ from input".into()));
    }
    let ty = axis_taps(h, out_h);
    let tx = axis_taps(w, out_w);
    let mut grad = vec![0.0; n * c * h * w];
    for (plane, g) in grad.chunks_exact_mut(h * w).zip(grad_output.data().chunks_exact(out_h * out_w)) {
        for (oy, y) in ty.iter().enumerate() {
            for (ox, x) in tx.iter().enumerate() {
                let v = g[oy * out_w + ox];
                let top = (1.0 - y.frac) * v;
                let bottom = y.frac * v;
                plane[y.lo * w + x.lo] += (1.0 - x.frac) * top;
                plane[y.lo * w + x.hi] += x.frac * top;
                plane[y.hi * w + x.lo] += (1.0 - x.frac) * bottom;
                plane[y.hi * w + x.hi] += x.frac * bottom;
            }
        }
    }
    Tensor::new(input_shape, grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_interpolation() {
        let x = Tensor::new(&[1, 1, 1, 2], vec![0.0, 10.0]).unwrap();
        let y = resize_bilinear(&x, 1, 3).unwrap();
        assert_eq!(y.data(), &[0.0, 5.0, 10.0]);
    }

    #[test]
    fn same_size_is_identity() {
        let x = Tensor::new(&[1, 2, 2, 3], (0..12).map(|i| i as f64 * 0.3).collect()).unwrap();
        assert_eq!(resize_bilinear(&x, 2, 3).unwrap(), x);
    }

    #[test]
    fn backward_is_adjoint() {
        let x = Tensor::new(&[1, 1, 4, 5], (0..20).map(|i| ((i * 7) % 11) as f64 - 5.0).collect()).unwrap();
        let g = Tensor::new(&[1, 1, 3, 2], vec![0.5, -1.0, 2.0, 0.25, 1.5, -0.75]).unwrap();
        let lhs = resize_bilinear(&x, 3, 2).unwrap().dot(&g).unwrap();
        let rhs = x.dot(&resize_bilinear_backward(x.shape(), &g).unwrap()).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
