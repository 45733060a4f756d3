use alloc::borrow::Cow;
use alloc::format;
use alloc::vec;

use crate::error::{Error, Result};
use crate::gemm::{matmul, matmul_bt, transpose};
use crate::tensor::Tensor;

/// Geometry of a 2-D convolution. Padding is always zero padding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub padding: (usize, usize),
    pub dilation: (usize, usize),
}

impl ConvSpec {
    /// Square `k×k` kernel, stride 1, no padding, no dilation.
    pub fn new(in_channels: usize, out_channels: usize, k: usize) -> Self {
        ConvSpec {
            in_channels,
            out_channels,
            kernel: (k, k),
            stride: (1, 1),
            padding: (0, 0),
            dilation: (1, 1),
        }
    }

    /// Spatially preserving `k×k` convolution (odd `k`) with the given dilation.
    pub fn same(in_channels: usize, out_channels: usize, k: usize, dilation: usize) -> Self {
        let pad = dilation * (k - 1) / 2;
        Self::new(in_channels, out_channels, k).with_padding(pad).with_dilation(dilation)
    }

    pub fn with_stride(mut self, s: usize) -> Self {
        self.stride = (s, s);
        self
    }

    pub fn with_padding(mut self, p: usize) -> Self {
        self.padding = (p, p);
        self
    }

    pub fn with_dilation(mut self, d: usize) -> Self {
        self.dilation = (d, d);
        self
    }

    pub fn weight_shape(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels, self.kernel.0, self.kernel.1]
    }

    /// `floor((H + 2p - d(k-1) - 1) / s) + 1` per axis.
    pub fn output_dims(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let axis = |len: usize, k: usize, s: usize, p: usize, d: usize| -> Result<usize> {
            if k == 0 || s == 0 || d == 0 {
                return Err(Error::ConfigInvalid(format!(
                    "kernel, stride and dilation must be positive in {self:?}"
                )));
            }
            let span = (len + 2 * p) as isize - (d * (k - 1)) as isize - 1;
            if span < 0 {
                return Err(Error::DegenerateOutput(format!(
                    "input extent {len} with padding {p} is smaller than dilated kernel extent {}",
                    d * (k - 1) + 1
                )));
            }
            Ok(span as usize / s + 1)
        };
        Ok((
            axis(h, self.kernel.0, self.stride.0, self.padding.0, self.dilation.0)?,
            axis(w, self.kernel.1, self.stride.1, self.padding.1, self.dilation.1)?,
        ))
    }
}

/// Gradients of a convolution-like op with respect to its input and parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

/// Unrolling geometry between an image `c×h×w` and its patch matrix
/// `(c·kh·kw) × (ho·wo)`.
#[derive(Clone, Copy)]
struct Unroll {
    c: usize,
    h: usize,
    w: usize,
    ho: usize,
    wo: usize,
    spec: ConvSpec,
}

impl Unroll {
    fn rows(&self) -> usize {
        self.c * self.spec.kernel.0 * self.spec.kernel.1
    }

    fn cols(&self) -> usize {
        self.ho * self.wo
    }

    fn is_pointwise(&self) -> bool {
        let s = &self.spec;
        s.kernel == (1, 1) && s.stride == (1, 1) && s.padding == (0, 0)
    }

    /// Source pixel for output coordinate `o` and kernel tap `t` along one axis.
    #[inline]
    fn src(o: usize, t: usize, s: usize, p: usize, d: usize, len: usize) -> Option<usize> {
        let pos = (o * s + t * d) as isize - p as isize;
        (pos >= 0 && (pos as usize) < len).then_some(pos as usize)
    }

    fn im2col<'a>(&self, x: &'a [f64]) -> Cow<'a, [f64]> {
        if self.is_pointwise() {
            return Cow::Borrowed(x);
        }
        let ConvSpec { kernel: (kh, kw), stride: (sh, sw), padding: (ph, pw), dilation: (dh, dw), .. } =
            self.spec;
        let p = self.cols();
        let mut col = vec![0.0; self.rows() * p];
        for ci in 0..self.c {
            let plane = &x[ci * self.h * self.w..(ci + 1) * self.h * self.w];
            for ky in 0..kh {
                for kx in 0..kw {
                    let row = &mut col[((ci * kh + ky) * kw + kx) * p..][..p];
                    for oy in 0..self.ho {
                        let Some(iy) = Self::src(oy, ky, sh, ph, dh, self.h) else { continue };
                        let src_row = &plane[iy * self.w..(iy + 1) * self.w];
                        let dst = &mut row[oy * self.wo..(oy + 1) * self.wo];
                        for (ox, v) in dst.iter_mut().enumerate() {
                            if let Some(ix) = Self::src(ox, kx, sw, pw, dw, self.w) {
                                *v = src_row[ix];
                            }
                        }
                    }
                }
            }
        }
        Cow::Owned(col)
    }

    /// Scatter-adds a patch matrix back onto an image buffer.
    fn col2im(&self, col: &[f64], x: &mut [f64]) {
        if self.is_pointwise() {
            for (a, b) in x.iter_mut().zip(col) {
                *a += b;
            }
            return;
        }
        let ConvSpec { kernel: (kh, kw), stride: (sh, sw), padding: (ph, pw), dilation: (dh, dw), .. } =
            self.spec;
        let p = self.cols();
        for ci in 0..self.c {
            let plane = &mut x[ci * self.h * self.w..(ci + 1) * self.h * self.w];
            for ky in 0..kh {
                for kx in 0..kw {
                    let row = &col[((ci * kh + ky) * kw + kx) * p..][..p];
                    for oy in 0..self.ho {
                        let Some(iy) = Self::src(oy, ky, sh, ph, dh, self.h) else { continue };
                        let src = &row[oy * self.wo..(oy + 1) * self.wo];
                        for (ox, &v) in src.iter().enumerate() {
                            if let Some(ix) = Self::src(ox, kx, sw, pw, dw, self.w) {
                                plane[iy * self.w + ix] += v;
                            }
                        }
                    }
                }
            }
        }
    }
}

fn check_conv(input: &Tensor, weights: &Tensor, spec: &ConvSpec) -> Result<Unroll> {
    let (_, c, h, w) = input.dims4()?;
    if c != spec.in_channels {
        return Err(Error::ShapeMismatch(format!(
            "conv2d expects {} input channels, got {c}",
            spec.in_channels
        )));
    }
    weights.ensure_shape(&spec.weight_shape(), "conv2d weights")?;
    let (ho, wo) = spec.output_dims(h, w)?;
    Ok(Unroll { c, h, w, ho, wo, spec: *spec })
}

fn add_bias(out: &mut [f64], bias: &[f64], plane: usize) {
    for (chunk, &b) in out.chunks_exact_mut(plane).zip(bias) {
        for v in chunk {
            *v += b;
        }
    }
}

fn bias_grad(grad_output: &Tensor, channels: usize) -> Tensor {
    let (n, _, h, w) = grad_output.dims4().expect("rank checked by caller");
    let plane = h * w;
    let mut gb = vec![0.0; channels];
    for i in 0..n {
        for (co, g) in gb.iter_mut().enumerate() {
            let start = (i * channels + co) * plane;
            *g += grad_output.data()[start..start + plane].iter().sum::<f64>();
        }
    }
    Tensor::new(&[channels], gb).expect("bias shape")
}

/// 2-D cross-correlation (no kernel flip) with zero padding, stride and dilation.
pub fn conv2d(input: &Tensor, weights: &Tensor, bias: &Tensor, spec: &ConvSpec) -> Result<Tensor> {
    let u = check_conv(input, weights, spec)?;
    bias.ensure_shape(&[spec.out_channels], "conv2d bias")?;
    let (n, ..) = input.dims4()?;
    let (k, p, m) = (u.rows(), u.cols(), spec.out_channels);
    let in_len = u.c * u.h * u.w;
    let mut out = vec![0.0; n * m * p];
    for i in 0..n {
        let col = u.im2col(&input.data()[i * in_len..(i + 1) * in_len]);
        let dst = &mut out[i * m * p..(i + 1) * m * p];
        matmul(weights.data(), &col, dst, m, k, p);
        add_bias(dst, bias.data(), p);
    }
    Tensor::new(&[n, m, u.ho, u.wo], out)
}

/// Gradients of `<conv2d(input, weights, bias), grad_output>`.
pub fn conv2d_backward(
    input: &Tensor,
    weights: &Tensor,
    spec: &ConvSpec,
    grad_output: &Tensor,
) -> Result<ConvGrads> {
    let u = check_conv(input, weights, spec)?;
    let (n, ..) = input.dims4()?;
    let (k, p, m) = (u.rows(), u.cols(), spec.out_channels);
    grad_output.ensure_shape(&[n, m, u.ho, u.wo], "conv2d grad_output")?;
    let in_len = u.c * u.h * u.w;
    let wt = transpose(weights.data(), m, k);
    let mut grad_in = vec![0.0; input.len()];
    let mut grad_w = vec![0.0; m * k];
    let mut tmp_w = vec![0.0; m * k];
    let mut grad_col = vec![0.0; k * p];
    for i in 0..n {
        let x = &input.data()[i * in_len..(i + 1) * in_len];
        let gy = &grad_output.data()[i * m * p..(i + 1) * m * p];
        let col = u.im2col(x);
        matmul_bt(gy, &col, &mut tmp_w, m, p, k);
        for (a, b) in grad_w.iter_mut().zip(&tmp_w) {
            *a += b;
        }
        matmul(&wt, gy, &mut grad_col, k, m, p);
        u.col2im(&grad_col, &mut grad_in[i * in_len..(i + 1) * in_len]);
    }
    Ok(ConvGrads {
        input: Tensor::new(input.shape(), grad_in)?,
        weights: Tensor::new(weights.shape(), grad_w)?,
        bias: bias_grad(grad_output, m),
    })
}

fn check_transpose(
    input: &Tensor,
    weights: &Tensor,
    stride: (usize, usize),
    padding: (usize, usize),
) -> Result<Unroll> {
    let (_, cin, h, w) = input.dims4()?;
    let (wc, cout, kh, kw) = weights.dims4()?;
    if wc != cin {
        return Err(Error::ShapeMismatch(format!(
            "conv2d_transpose weights expect {wc} input channels, got {cin}"
        )));
    }
    if stride.0 == 0 || stride.1 == 0 {
        return Err(Error::ConfigInvalid("stride must be positive".into()));
    }
    let axis = |len: usize, s: usize, p: usize, k: usize| -> Result<usize> {
        let out = ((len - 1) * s + k) as isize - 2 * p as isize;
        if out < 1 {
            return Err(Error::DegenerateOutput(format!(
                "transposed convolution output extent {out} < 1"
            )));
        }
        Ok(out as usize)
    };
    let ho = axis(h, stride.0, padding.0, kh)?;
    let wo = axis(w, stride.1, padding.1, kw)?;
    // The adjoint conv2d maps the (cout, ho, wo) output image back to (cin, h, w).
    let spec = ConvSpec {
        in_channels: cout,
        out_channels: cin,
        kernel: (kh, kw),
        stride,
        padding,
        dilation: (1, 1),
    };
    Ok(Unroll { c: cout, h: ho, w: wo, ho: h, wo: w, spec })
}

/// Transposed convolution: the adjoint of [`conv2d`] for weights laid out
/// `[Cin, Cout, kh, kw]`, plus a per-output-channel bias.
pub fn conv2d_transpose(
    input: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    stride: (usize, usize),
    padding: (usize, usize),
) -> Result<Tensor> {
    let u = check_transpose(input, weights, stride, padding)?;
    let (n, cin, ..) = input.dims4()?;
    let cout = u.c;
    bias.ensure_shape(&[cout], "conv2d_transpose bias")?;
    let (k, p) = (u.rows(), u.cols());
    let out_plane = u.h * u.w;
    let wt = transpose(weights.data(), cin, k);
    let mut col = vec![0.0; k * p];
    let mut out = vec![0.0; n * cout * out_plane];
    for i in 0..n {
        let x = &input.data()[i * cin * p..(i + 1) * cin * p];
        matmul(&wt, x, &mut col, k, cin, p);
        let dst = &mut out[i * cout * out_plane..(i + 1) * cout * out_plane];
        u.col2im(&col, dst);
        add_bias(dst, bias.data(), out_plane);
    }
    Tensor::new(&[n, cout, u.h, u.w], out)
}

/// Gradients of `<conv2d_transpose(input, weights, bias), grad_output>`.
pub fn conv2d_transpose_backward(
    input: &Tensor,
    weights: &Tensor,
    stride: (usize, usize),
    padding: (usize, usize),
    grad_output: &Tensor,
) -> Result<ConvGrads> {
    let u = check_transpose(input, weights, stride, padding)?;
    let (n, cin, ..) = input.dims4()?;
    let cout = u.c;
    grad_output.ensure_shape(&[n, cout, u.h, u.w], "conv2d_transpose grad_output")?;
    let (k, p) = (u.rows(), u.cols());
    let out_len = cout * u.h * u.w;
    let mut grad_in = vec![0.0; input.len()];
    let mut grad_w = vec![0.0; cin * k];
    let mut tmp_w = vec![0.0; cin * k];
    for i in 0..n {
        let gy = &grad_output.data()[i * out_len..(i + 1) * out_len];
        let x = &input.data()[i * cin * p..(i + 1) * cin * p];
        let col = u.im2col(gy);
        matmul(weights.data(), &col, &mut grad_in[i * cin * p..(i + 1) * cin * p], cin, k, p);
        matmul_bt(x, &col, &mut tmp_w, cin, p, k);
        for (a, b) in grad_w.iter_mut().zip(&tmp_w) {
            *a += b;
        }
    }
    Ok(ConvGrads {
        input: Tensor::new(input.shape(), grad_in)?,
        weights: Tensor::new(weights.shape(), grad_w)?,
        bias: bias_grad(grad_output, cout),
    })
}

#[cfg(test)]
fn conv2d_reference(input: &Tensor, weights: &Tensor, bias: &Tensor, spec: &ConvSpec) -> Tensor {
    let (n, c, h, w) = input.dims4().unwrap();
    let (ho, wo) = spec.output_dims(h, w).unwrap();
    let (kh, kw) = spec.kernel;
    let mut out = alloc::vec::Vec::with_capacity(n * spec.out_channels * ho * wo);
    for i in 0..n {
        for co in 0..spec.out_channels {
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut acc = 0.0;
                    for ci in 0..c {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (oy * spec.stride.0 + ky * spec.dilation.0) as isize
                                    - spec.padding.0 as isize;
                                let ix = (ox * spec.stride.1 + kx * spec.dilation.1) as isize
                                    - spec.padding.1 as isize;
                                let x = if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                    input.data()[((i * c + ci) * h + iy as usize) * w + ix as usize]
                                } else {
                                    0.0
                                };
                                acc += weights.data()[((co * c + ci) * kh + ky) * kw + kx] * x;
                            }
                        }
                    }
                    out.push(acc + bias.data()[co]);
                }
            }
        }
    }
    Tensor::new(&[n, spec.out_channels, ho, wo], out).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn random(rng: &mut Rng, shape: &[usize]) -> Tensor {
        let len = shape.iter().product();
        Tensor::new(shape, (0..len).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap()
    }

    #[test]
    fn identity_kernel_is_identity() {
        let mut rng = Rng::new(1);
        let x = random(&mut rng, &[2, 1, 5, 4]);
        let y = conv2d(&x, &Tensor::full(&[1, 1, 1, 1], 1.0), &Tensor::zeros(&[1]), &ConvSpec::new(1, 1, 1))
            .unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn all_ones_three_by_three_sums_to_nine() {
        let x = Tensor::full(&[1, 1, 3, 3], 1.0);
        let y = conv2d(&x, &Tensor::full(&[1, 1, 3, 3], 1.0), &Tensor::zeros(&[1]), &ConvSpec::new(1, 1, 3))
            .unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert_eq!(y.data(), &[9.0]);
    }

    #[test]
    fn dilated_output_extent() {
        let spec = ConvSpec::new(1, 1, 3).with_dilation(2);
        assert_eq!(spec.output_dims(7, 7).unwrap(), (3, 3));
        let y = conv2d(&Tensor::zeros(&[1, 1, 7, 7]), &Tensor::zeros(&[1, 1, 3, 3]), &Tensor::zeros(&[1]), &spec)
            .unwrap();
        assert_eq!(y.shape(), &[1, 1, 3, 3]);
        assert!(matches!(spec.output_dims(4, 7), Err(Error::DegenerateOutput(_))));
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let spec = ConvSpec::new(2, 1, 1);
        let err = conv2d(&Tensor::zeros(&[1, 3, 2, 2]), &Tensor::zeros(&[1, 2, 1, 1]), &Tensor::zeros(&[1]), &spec);
        assert!(matches!(err, Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn matches_direct_loop_exactly() {
        let mut rng = Rng::new(7);
        for trial in 0..30 {
            let cin = 1 + trial % 3;
            let cout = 1 + trial % 4;
            let k = [1, 3, 5][trial % 3];
            let s = 1 + trial % 2;
            let d = 1 + (trial / 3) % 3;
            let spec = ConvSpec::new(cin, cout, k).with_stride(s).with_padding(trial % 3).with_dilation(d);
            let h = d * (k - 1) + 1 + trial % 5;
            let x = random(&mut rng, &[2, cin, h, h + 1]);
            let w = random(&mut rng, &spec.weight_shape());
            let b = random(&mut rng, &[cout]);
            assert_eq!(conv2d(&x, &w, &b, &spec).unwrap(), conv2d_reference(&x, &w, &b, &spec));
        }
    }

    #[test]
    fn transpose_scatters_blocks() {
        let x = Tensor::new(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let w = Tensor::full(&[1, 1, 2, 2], 1.0);
        let y = conv2d_transpose(&x, &w, &Tensor::zeros(&[1]), (2, 2), (0, 0)).unwrap();
        assert_eq!(y.shape(), &[1, 1, 4, 4]);
        #[rustfmt::skip]
        let expected = [
            1.0, 1.0, 2.0, 2.0,
            1.0, 1.0, 2.0, 2.0,
            3.0, 3.0, 4.0, 4.0,
            3.0, 3.0, 4.0, 4.0,
        ];
        assert_eq!(y.data(), &expected);
    }

    #[test]
    fn transpose_identity_kernel() {
        let mut rng = Rng::new(3);
        let x = random(&mut rng, &[1, 1, 3, 3]);
        let y = conv2d_transpose(&x, &Tensor::full(&[1, 1, 1, 1], 1.0), &Tensor::zeros(&[1]), (1, 1), (0, 0))
            .unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn transpose_degenerate_output() {
        let r = conv2d_transpose(&Tensor::zeros(&[1, 1, 1, 1]), &Tensor::zeros(&[1, 1, 1, 1]), &Tensor::zeros(&[1]), (1, 1), (1, 1));
        assert!(matches!(r, Err(Error::DegenerateOutput(_))));
    }

    #[test]
    fn constant_shift_leaves_weight_free_gradients_unchanged() {
        let mut rng = Rng::new(11);
        let spec = ConvSpec::same(2, 3, 3, 1);
        let x = random(&mut rng, &[1, 2, 5, 5]);
        let shifted = x.map(|v| v + 4.0);
        let w = random(&mut rng, &spec.weight_shape());
        let gy = random(&mut rng, &[1, 3, 5, 5]);
        let a = conv2d_backward(&x, &w, &spec, &gy).unwrap();
        let b = conv2d_backward(&shifted, &w, &spec, &gy).unwrap();
        assert_eq!(a.input, b.input);
        assert_eq!(a.bias, b.bias);
    }
}
