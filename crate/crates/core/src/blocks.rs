//! Composite blocks: squeeze-and-excitation channel attention, atrous spatial
//! pyramid pooling, and stacks of same-padded 3×3 convolutions.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::layer::{visit_child, visit_child_mut, Act, Conv2d, Dense, GlobalAvgPool, GradSink, Layer, LayerGradients};
use crate::ops::ConvSpec;
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeConfig {
    pub channels: usize,
    pub reduction: usize,
}

impl SeConfig {
    pub fn new(channels: usize, reduction: usize) -> Self {
        SeConfig { channels, reduction }
    }

    /// Hidden width of the excitation MLP, never below 1.
    pub fn bottleneck(&self) -> usize {
        (self.channels / self.reduction.max(1)).max(1)
    }
}

/// Squeeze-and-excitation: global average pool, `dense → relu → dense →
/// sigmoid`, then every channel is scaled by its gate in `(0, 1)`.
#[derive(Clone, Debug)]
pub struct SeBlock {
    pub cfg: SeConfig,
    pool: GlobalAvgPool,
    pub squeeze: Dense,
    relu: Act,
    pub excite: Dense,
    gate: Act,
    state: Option<(Tensor, Tensor)>,
}

impl SeBlock {
    pub fn new(cfg: SeConfig, rng: &mut Rng) -> Result<Self> {
        if cfg.channels == 0 || cfg.reduction == 0 {
            return Err(Error::ConfigInvalid(format!("bad squeeze-excitation config {cfg:?}")));
        }
        let hidden = cfg.bottleneck();
        Ok(SeBlock {
            cfg,
            pool: GlobalAvgPool::new(),
            squeeze: Dense::new(cfg.channels, hidden, rng),
            relu: Act::relu(),
            excite: Dense::new(hidden, cfg.channels, rng),
            gate: Act::sigmoid(),
            state: None,
        })
    }

    /// Per-channel gates `[N, C]` from the last forward pass.
    pub fn gates(&self) -> Option<&Tensor> {
        self.state.as_ref().map(|(_, g)| g)
    }
}

impl Layer for SeBlock {
    fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let (_, c, h, w) = input.dims4()?;
        if c != self.cfg.channels {
            return Err(Error::ShapeMismatch(format!(
                "squeeze-excitation expects {} channels, got {c}",
                self.cfg.channels
            )));
        }
        let squeezed = self.pool.forward(input)?;
        let hidden = self.relu.forward(&self.squeeze.forward(&squeezed)?)?;
        let gates = self.gate.forward(&self.excite.forward(&hidden)?)?;
        let plane = h * w;
        let mut out = input.clone();
        for (chunk, &g) in out.data_mut().chunks_exact_mut(plane).zip(gates.data()) {
            for v in chunk {
                *v *= g;
            }
        }
        self.state = Some((input.clone(), gates));
        Ok(out)
    }

    fn backward(&self, grad_output: &Tensor) -> Result<LayerGradients> {
        let (input, gates) = self.state.as_ref().ok_or(Error::StateMissing)?;
        grad_output.ensure_shape(input.shape(), "squeeze-excitation grad_output")?;
        let (n, c, h, w) = input.dims4()?;
        let plane = h * w;
        let mut grad_in = grad_output.clone();
        let mut grad_gates = vec![0.0; n * c];
        for (((gi, x), &g), gg) in grad_in
            .data_mut()
            .chunks_exact_mut(plane)
            .zip(input.data().chunks_exact(plane))
            .zip(gates.data())
            .zip(grad_gates.iter_mut())
        {
            let mut acc = 0.0;
            for (gv, &xv) in gi.iter_mut().zip(x) {
                acc += *gv * xv;
                *gv *= g;
            }
            *gg = acc;
        }
        let mut sink = GradSink::new();
        let g = self.gate.backward(&Tensor::new(&[n, c], grad_gates)?)?.grad_input;
        let g = sink.absorb("excite", self.excite.backward(&g)?);
        let g = self.relu.backward(&g)?.grad_input;
        let g = sink.absorb("squeeze", self.squeeze.backward(&g)?);
        let via_pool = self.pool.backward(&g)?.grad_input;
        grad_in.add_assign(&via_pool)?;
        Ok(sink.finish(grad_in))
    }

    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        visit_child(&self.squeeze, "squeeze", f);
        visit_child(&self.excite, "excite", f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        visit_child_mut(&mut self.squeeze, "squeeze", f);
        visit_child_mut(&mut self.excite, "excite", f);
    }

    fn record_switches(&self, out: &mut Vec<u64>) {
        self.relu.record_switches(out);
    }
}

/// `depth` repetitions of (3×3 conv, same padding, stride 1, relu). A dilation
/// above 1 widens the taps while still preserving the spatial extent.
#[derive(Clone, Debug)]
pub struct ConvBlock {
    pub convs: Vec<Conv2d>,
    acts: Vec<Act>,
}

impl ConvBlock {
    pub fn new(in_channels: usize, out_channels: usize, depth: usize, dilation: usize, rng: &mut Rng) -> Result<Self> {
        if depth == 0 || in_channels == 0 || out_channels == 0 || dilation == 0 {
            return Err(Error::ConfigInvalid(format!(
                "conv block needs positive depth, channels and dilation (depth {depth}, {in_channels}->{out_channels}, dilation {dilation})"
            )));
        }
        let convs = (0..depth)
            .map(|i| {
                let cin = if i == 0 { in_channels } else { out_channels };
                Conv2d::new(ConvSpec::same(cin, out_channels, 3, dilation), rng)
            })
            .collect();
        Ok(ConvBlock { convs, acts: (0..depth).map(|_| Act::relu()).collect() })
    }

    pub fn out_channels(&self) -> usize {
        self.convs.last().expect("depth >= 1").spec.out_channels
    }
}

impl Layer for ConvBlock {
    fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let mut x = input.clone();
        for (conv, act) in self.convs.iter_mut().zip(&mut self.acts) {
            x = act.forward(&conv.forward(&x)?)?;
        }
        Ok(x)
    }

    fn backward(&self, grad_output: &Tensor) -> Result<LayerGradients> {
        let mut sink = GradSink::new();
        let mut g = grad_output.clone();
        for (i, (conv, act)) in self.convs.iter().zip(&self.acts).enumerate().rev() {
            g = act.backward(&g)?.grad_input;
            g = sink.absorb(&format!("conv{i}"), conv.backward(&g)?);
        }
        Ok(sink.finish(g))
    }

    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        for (i, conv) in self.convs.iter().enumerate() {
            visit_child(conv, &format!("conv{i}"), f);
        }
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        for (i, conv) in self.convs.iter_mut().enumerate() {
            visit_child_mut(conv, &format!("conv{i}"), f);
        }
    }

    fn record_switches(&self, out: &mut Vec<u64>) {
        for act in &self.acts {
            act.record_switches(out);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AsppConfig {
    pub in_channels: usize,
    pub branch_channels: usize,
    pub rates: Vec<usize>,
    pub include_image_pool: bool,
}

impl AsppConfig {
    pub fn new(in_channels: usize, branch_channels: usize) -> Self {
        AsppConfig { in_channels, branch_channels, rates: vec![1, 2, 4], include_image_pool: true }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.branch_channels == 0 {
            return Err(Error::ConfigInvalid("ASPP channel counts must be positive".into()));
        }
        if self.rates.is_empty()
            || self.rates[0] < 1
            || self.rates.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::ConfigInvalid(format!(
                "ASPP rates must be non-empty, strictly increasing and >= 1, got {:?}",
                self.rates
            )));
        }
        Ok(())
    }

    fn branch_count(&self) -> usize {
        1 + self.rates.len() + usize::from(self.include_image_pool)
    }
}

/// Image-level branch: global average pool, 1×1 conv, relu, broadcast back.
#[derive(Clone, Debug)]
struct ImagePoolBranch {
    pool: GlobalAvgPool,
    conv: Conv2d,
    act: Act,
    spatial: Option<(usize, usize)>,
}

impl Layer for ImagePoolBranch {
    fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let (n, c, h, w) = input.dims4()?;
        let pooled = self.pool.forward(input)?.reshape(&[n, c, 1, 1])?;
        let y = self.act.forward(&self.conv.forward(&pooled)?)?;
        let mut out = Vec::with_capacity(y.len() * h * w);
        for &v in y.data() {
            out.extend(core::iter::repeat_n(v, h * w));
        }
        self.spatial = Some((h, w));
        Tensor::new(&[n, self.conv.spec.out_channels, h, w], out)
    }

    fn backward(&self, grad_output: &Tensor) -> Result<LayerGradients> {
        let (h, w) = self.spatial.ok_or(Error::StateMissing)?;
        let (n, c, gh, gw) = grad_output.dims4()?;
        if (gh, gw) != (h, w) {
            return Err(Error::ShapeMismatch("image-pool grad_output spatial dims".into()));
        }
        let summed = grad_output.data().chunks_exact(h * w).map(|p| p.iter().sum()).collect();
        let g = self.act.backward(&Tensor::new(&[n, c, 1, 1], summed)?)?.grad_input;
        let mut sink = GradSink::new();
        let g = sink.absorb("conv", self.conv.backward(&g)?);
        let cin = self.conv.spec.in_channels;
        let g = self.pool.backward(&g.reshape(&[n, cin])?)?.grad_input;
        Ok(sink.finish(g))
    }

    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        visit_child(&self.conv, "conv", f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        visit_child_mut(&mut self.conv, "conv", f);
    }

    fn record_switches(&self, out: &mut Vec<u64>) {
        self.act.record_switches(out);
    }
}

/// Atrous spatial pyramid pooling: a 1×1 branch, one 3×3 branch per dilation
/// rate (padding = rate), an optional image-pool branch, each relu-activated,
/// concatenated and fused by a 1×1 conv + relu. Spatial extent is preserved.
#[derive(Clone, Debug)]
pub struct Aspp {
    pub cfg: AsppConfig,
    pointwise: Conv2d,
    atrous: Vec<Conv2d>,
    branch_acts: Vec<Act>,
    image_pool: Option<ImagePoolBranch>,
    pub fuse: Conv2d,
    fuse_act: Act,
}

impl Aspp {
    pub fn new(cfg: AsppConfig, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        let (cin, cb) = (cfg.in_channels, cfg.branch_channels);
        let pointwise = Conv2d::new(ConvSpec::new(cin, cb, 1), rng);
        let atrous = cfg.rates.iter().map(|&r| Conv2d::new(ConvSpec::same(cin, cb, 3, r), rng)).collect();
        let image_pool = cfg.include_image_pool.then(|| ImagePoolBranch {
            pool: GlobalAvgPool::new(),
            conv: Conv2d::new(ConvSpec::new(cin, cb, 1), rng),
            act: Act::relu(),
            spatial: None,
        });
        let fuse = Conv2d::new(ConvSpec::new(cb * cfg.branch_count(), cb, 1), rng);
        let branch_acts = (0..1 + cfg.rates.len()).map(|_| Act::relu()).collect();
        Ok(Aspp { cfg, pointwise, atrous, branch_acts, image_pool, fuse, fuse_act: Act::relu() })
    }

    fn convs(&self) -> impl Iterator<Item = (alloc::string::String, &Conv2d)> {
        core::iter::once((alloc::string::String::from("b1x1"), &self.pointwise))
            .chain(self.cfg.rates.iter().zip(&self.atrous).map(|(r, c)| (format!("rate{r}"), c)))
    }
}

impl Layer for Aspp {
    fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let (_, c, ..) = input.dims4()?;
        if c != self.cfg.in_channels {
            return Err(Error::ShapeMismatch(format!("ASPP expects {} channels, got {c}", self.cfg.in_channels)));
        }
        let mut branches = Vec::with_capacity(self.cfg.branch_count());
        let convs = core::iter::once(&mut self.pointwise).chain(self.atrous.iter_mut());
        for (conv, act) in convs.zip(&mut self.branch_acts) {
            branches.push(act.forward(&conv.forward(input)?)?);
        }
        if let Some(pool) = &mut self.image_pool {
            branches.push(pool.forward(input)?);
        }
        let refs: Vec<&Tensor> = branches.iter().collect();
        let cat = Tensor::cat_channels(&refs)?;
        self.fuse_act.forward(&self.fuse.forward(&cat)?)
    }

    fn backward(&self, grad_output: &Tensor) -> Result<LayerGradients> {
        let mut sink = GradSink::new();
        let g = self.fuse_act.backward(grad_output)?.grad_input;
        let g = sink.absorb("fuse", self.fuse.backward(&g)?);
        let parts = g.split_channel_groups(&vec![self.cfg.branch_channels; self.cfg.branch_count()])?;
        let mut grad_in: Option<Tensor> = None;
        let mut accumulate = |t: Tensor| -> Result<()> {
            match &mut grad_in {
                Some(acc) => acc.add_assign(&t),
                None => {
                    grad_in = Some(t);
                    Ok(())
                }
            }
        };
        for (((name, conv), act), part) in self.convs().zip(&self.branch_acts).zip(&parts) {
            let g = act.backward(part)?.grad_input;
            accumulate(sink.absorb(&name, conv.backward(&g)?))?;
        }
        if let Some(pool) = &self.image_pool {
            accumulate(sink.absorb("pool", pool.backward(parts.last().expect("pool branch"))?))?;
        }
        Ok(sink.finish(grad_in.expect("at least one branch")))
    }

    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        for (name, conv) in self.convs() {
            visit_child(conv, &name, f);
        }
        if let Some(pool) = &self.image_pool {
            visit_child(pool, "pool", f);
        }
        visit_child(&self.fuse, "fuse", f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        visit_child_mut(&mut self.pointwise, "b1x1", f);
        for (r, conv) in self.cfg.rates.iter().zip(&mut self.atrous) {
            visit_child_mut(conv, &format!("rate{r}"), f);
        }
        if let Some(pool) = &mut self.image_pool {
            visit_child_mut(pool, "pool", f);
        }
        visit_child_mut(&mut self.fuse, "fuse", f);
    }

    fn record_switches(&self, out: &mut Vec<u64>) {
        for act in &self.branch_acts {
            act.record_switches(out);
        }
        if let Some(pool) = &self.image_pool {
            pool.record_switches(out);
        }
        self.fuse_act.record_switches(out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::grad_check;

    fn random(rng: &mut Rng, shape: &[usize]) -> Tensor {
        let len = shape.iter().product();
        Tensor::new(shape, (0..len).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap()
    }

    #[test]
    fn saturated_gate_passes_input_through() {
        let mut rng = Rng::new(2);
        let mut se = SeBlock::new(SeConfig::new(4, 2), &mut rng).unwrap();
        se.excite.weight = Tensor::zeros(se.excite.weight.shape());
        se.excite.bias = Tensor::full(&[4], 20.0);
        let x = random(&mut rng, &[2, 4, 3, 3]);
        let y = se.forward(&x).unwrap();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_excitation_halves_input() {
        let mut rng = Rng::new(3);
        let mut se = SeBlock::new(SeConfig::new(3, 8), &mut rng).unwrap();
        assert_eq!(se.cfg.bottleneck(), 1);
        se.excite.weight = Tensor::zeros(se.excite.weight.shape());
        se.excite.bias = Tensor::zeros(&[3]);
        let x = random(&mut rng, &[1, 3, 2, 2]);
        let y = se.forward(&x).unwrap();
        assert_eq!(y, x.map(|v| v * 0.5));
    }

    #[test]
    fn se_rejects_wrong_channels() {
        let mut se = SeBlock::new(SeConfig::new(3, 1), &mut Rng::new(0)).unwrap();
        assert!(matches!(se.forward(&Tensor::zeros(&[1, 2, 2, 2])), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn aspp_zero_weights_give_relu_of_fuse_bias() {
        let mut rng = Rng::new(4);
        let mut aspp = Aspp::new(AsppConfig::new(2, 3), &mut rng).unwrap();
        aspp.visit_params_mut(&mut |_, t| t.data_mut().fill(0.0));
        aspp.fuse.bias = Tensor::new(&[3], vec![0.7, -0.2, 0.0]).unwrap();
        let y = aspp.forward(&random(&mut rng, &[1, 2, 5, 5])).unwrap();
        for (c, expect) in [0.7, 0.0, 0.0].iter().enumerate() {
            assert!(y.data()[c * 25..(c + 1) * 25].iter().all(|v| v == expect));
        }
    }

    #[test]
    fn aspp_preserves_spatial_extent() {
        let mut rng = Rng::new(5);
        let mut aspp = Aspp::new(AsppConfig::new(4, 2), &mut rng).unwrap();
        let y = aspp.forward(&random(&mut rng, &[1, 4, 9, 9])).unwrap();
        assert_eq!(y.shape(), &[1, 2, 9, 9]);
    }

    #[test]
    fn aspp_rate_validation() {
        for rates in [vec![], vec![2, 2], vec![0, 1], vec![4, 2]] {
            let cfg = AsppConfig { rates, ..AsppConfig::new(1, 1) };
            assert!(matches!(cfg.validate(), Err(Error::ConfigInvalid(_))));
        }
    }

    #[test]
    fn conv_block_zero_weights() {
        let mut rng = Rng::new(6);
        let mut block = ConvBlock::new(2, 3, 1, 1, &mut rng).unwrap();
        block.visit_params_mut(&mut |_, t| t.data_mut().fill(0.0));
        let y = block.forward(&random(&mut rng, &[1, 2, 4, 4])).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
        assert!(ConvBlock::new(2, 3, 0, 1, &mut rng).is_err());
    }

    #[test]
    fn blocks_pass_gradient_check() {
        let mut rng = Rng::new(8);
        let x = random(&mut rng, &[2, 4, 5, 5]);
        let mut se = SeBlock::new(SeConfig::new(4, 2), &mut rng).unwrap();
        let r = grad_check(&mut se, &x, 1e-5).unwrap();
        assert!(r.max_rel_error < 1e-6, "{r:?}");
        let mut block = ConvBlock::new(4, 3, 2, 2, &mut rng).unwrap();
        let r = grad_check(&mut block, &x, 1e-5).unwrap();
        assert!(r.max_rel_error < 1e-6, "{r:?}");
        let mut aspp = Aspp::new(AsppConfig::new(4, 2), &mut rng).unwrap();
        let r = grad_check(&mut aspp, &x, 1e-5).unwrap();
        assert!(r.max_rel_error < 1e-6, "{r:?}");
    }
}
