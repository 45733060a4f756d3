use alloc::format;
use alloc::vec::Vec;

use crate::blocks::{ConvBlock, SeBlock, SeConfig};
use crate::error::{Error, Result};
use crate::layer::{visit_child, visit_child_mut, Act, Conv2d, ConvTranspose2d, GradSink, Layer, LayerGradients, Pool2d};
use crate::ops::{resize_bilinear, resize_bilinear_backward, ConvSpec, PoolKind};
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct XUnetConfig {
    /// Encoder levels; a bottleneck sits below the deepest one.
    pub depth: usize,
    /// Channels at level 0, doubling per level.
    pub base_channels: usize,
    /// Pyramid inputs: the image itself plus `input_levels - 1` bilinear halvings,
    /// concatenated onto encoder levels `1..input_levels`.
    pub input_levels: usize,
    pub se_reduction: usize,
    /// 3×3 convolutions per stage.
    pub block_depth: usize,
    pub in_channels: usize,
}

impl Default for XUnetConfig {
    fn default() -> Self {
        XUnetConfig { depth: 3, base_channels: 16, input_levels: 3, se_reduction: 8, block_depth: 1, in_channels: 3 }
    }
}

impl XUnetConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.depth, self.base_channels, self.input_levels, self.se_reduction, self.block_depth, self.in_channels];
        if positive.contains(&0) {
            return Err(Error::ConfigInvalid(format!("X-Unet sizes must be positive: {self:?}")));
        }
        if self.input_levels > self.depth {
            return Err(Error::ConfigInvalid(format!(
                "input_levels {} exceeds depth {}",
                self.input_levels, self.depth
            )));
        }
        Ok(())
    }

    pub fn channels(&self, level: usize) -> usize {
        self.base_channels << level
    }

    /// Spatial dims must be divisible by this.
    pub fn granularity(&self) -> usize {
        1 << self.depth
    }

    fn injects_pyramid(&self, level: usize) -> bool {
        level > 0 && level < self.input_levels
    }
}

#[derive(Clone, Debug)]
struct Stage {
    block: ConvBlock,
    se: SeBlock,
}

impl Stage {
    fn new(cin: usize, cout: usize, cfg: &XUnetConfig, rng: &mut Rng) -> Result<Self> {
        Ok(Stage {
            block: ConvBlock::new(cin, cout, cfg.block_depth, 1, rng)?,
            se: SeBlock::new(SeConfig::new(cout, cfg.se_reduction), rng)?,
        })
    }

    fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let y = self.block.forward(x)?;
        self.se.forward(&y)
    }

    fn backward(&self, g: &Tensor, prefix: &str, sink: &mut GradSink) -> Result<Tensor> {
        let g = sink.absorb(&format!("{prefix}.se"), self.se.backward(g)?);
        Ok(sink.absorb(&format!("{prefix}.block"), self.block.backward(&g)?))
    }

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor)) {
        visit_child(&self.block, &format!("{prefix}.block"), f);
        visit_child(&self.se, &format!("{prefix}.se"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        visit_child_mut(&mut self.block, &format!("{prefix}.block"), f);
        visit_child_mut(&mut self.se, &format!("{prefix}.se"), f);
    }

    fn switches(&self, out: &mut Vec<u64>) {
        self.block.record_switches(out);
        self.se.record_switches(out);
    }
}

/// Multi-input U-Net with squeeze-and-excitation after every stage and
/// transposed-convolution upsampling, regressing one channel in `(0, 1)`.
#[derive(Clone, Debug)]
pub struct XUnet {
    pub cfg: XUnetConfig,
    encoder: Vec<Stage>,
    pools: Vec<Pool2d>,
    bottleneck: Stage,
    ups: Vec<ConvTranspose2d>,
    decoder: Vec<Stage>,
    head: Conv2d,
    head_act: Act,
    pyramid_shapes: Option<Vec<Vec<usize>>>,
}

impl XUnet {
    pub fn new(cfg: XUnetConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = Rng::new(seed);
        let mut encoder = Vec::with_capacity(cfg.depth);
        for level in 0..cfg.depth {
            let mut cin = if level == 0 { cfg.in_channels } else { cfg.channels(level - 1) };
            if cfg.injects_pyramid(level) {
                cin += cfg.in_channels;
            }
            encoder.push(Stage::new(cin, cfg.channels(level), &cfg, &mut rng)?);
        }
        let bottleneck = Stage::new(cfg.channels(cfg.depth - 1), cfg.channels(cfg.depth), &cfg, &mut rng)?;
        let mut ups = Vec::with_capacity(cfg.depth);
        let mut decoder = Vec::with_capacity(cfg.depth);
        for level in 0..cfg.depth {
            let c = cfg.channels(level);
            ups.push(ConvTranspose2d::new(cfg.channels(level + 1), c, 2, 2, &mut rng));
            decoder.push(Stage::new(2 * c, c, &cfg, &mut rng)?);
        }
        let head = Conv2d::new(ConvSpec::new(cfg.channels(0), 1, 1), &mut rng);
        Ok(XUnet {
            pools: (0..cfg.depth).map(|_| Pool2d::new(PoolKind::Max, 2, 2)).collect(),
            cfg,
            encoder,
            bottleneck,
            ups,
            decoder,
            head,
            head_act: Act::sigmoid(),
            pyramid_shapes: None,
        })
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        let (_, c, h, w) = input.dims4()?;
        let g = self.cfg.granularity();
        if c != self.cfg.in_channels || h % g != 0 || w % g != 0 {
            return Err(Error::ShapeMismatch(format!(
                "X-Unet needs {} channels with spatial dims divisible by {g}, got {:?}",
                self.cfg.in_channels,
                input.shape()
            )));
        }
        Ok(())
    }
}

impl Layer for XUnet {
    fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        self.check_input(input)?;
        let (_, _, h, w) = input.dims4()?;
        let mut pyramid = Vec::with_capacity(self.cfg.input_levels);
        pyramid.push(input.clone());
        for level in 1..self.cfg.input_levels {
            let prev = pyramid.last().expect("level 0 present");
            pyramid.push(resize_bilinear(prev, h >> level, w >> level)?);
        }
        let mut skips = Vec::with_capacity(self.cfg.depth);
        let mut x = input.clone();
        for level in 0..self.cfg.depth {
            if self.cfg.injects_pyramid(level) {
                x = Tensor::concat_channels(&x, &pyramid[level])?;
            }
            let y = self.encoder[level].forward(&x)?;
            x = self.pools[level].forward(&y)?;
            skips.push(y);
        }
        x = self.bottleneck.forward(&x)?;
        for level in (0..self.cfg.depth).rev() {
            let up = self.ups[level].forward(&x)?;
            x = self.decoder[level].forward(&Tensor::concat_channels(&up, &skips[level])?)?;
        }
        let out = self.head_act.forward(&self.head.forward(&x)?)?;
        self.pyramid_shapes = Some(pyramid.iter().map(|t| t.shape().to_vec()).collect());
        Ok(out)
    }

    fn backward(&self, grad_output: &Tensor) -> Result<LayerGradients> {
        let shapes = self.pyramid_shapes.as_ref().ok_or(Error::StateMissing)?;
        let mut sink = GradSink::new();
        let g = self.head_act.backward(grad_output)?.grad_input;
        let mut g = sink.absorb("head", self.head.backward(&g)?);
        let mut skip_grads = Vec::with_capacity(self.cfg.depth);
        for level in 0..self.cfg.depth {
            let gcat = self.decoder[level].backward(&g, &format!("dec{level}"), &mut sink)?;
            let (g_up, g_skip) = gcat.split_channels(self.cfg.channels(level))?;
            skip_grads.push(g_skip);
            g = sink.absorb(&format!("dec{level}.up"), self.ups[level].backward(&g_up)?);
        }
        g = self.bottleneck.backward(&g, "bottleneck", &mut sink)?;
        let mut pyramid_grads: Vec<Option<Tensor>> = (0..self.cfg.input_levels).map(|_| None).collect();
        for level in (0..self.cfg.depth).rev() {
            let mut gy = self.pools[level].backward(&g)?.grad_input;
            gy.add_assign(&skip_grads[level])?;
            g = self.encoder[level].backward(&gy, &format!("enc{level}"), &mut sink)?;
            if self.cfg.injects_pyramid(level) {
                let (g_feat, g_pyr) = g.split_channels(self.cfg.channels(level - 1))?;
                g = g_feat;
                pyramid_grads[level] = Some(g_pyr);
            }
        }
        let mut carried: Option<Tensor> = None;
        for level in (1..self.cfg.input_levels).rev() {
            let mut here = pyramid_grads[level].take().expect("injected level");
            if let Some(c) = carried.take() {
                here.add_assign(&c)?;
            }
            carried = Some(resize_bilinear_backward(&shapes[level - 1], &here)?);
        }
        if let Some(c) = carried {
            g.add_assign(&c)?;
        }
        Ok(sink.finish(g))
    }

    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        for (level, stage) in self.encoder.iter().enumerate() {
            stage.visit(&format!("enc{level}"), f);
        }
        self.bottleneck.visit("bottleneck", f);
        for (level, (up, stage)) in self.ups.iter().zip(&self.decoder).enumerate() {
            visit_child(up, &format!("dec{level}.up"), f);
            stage.visit(&format!("dec{level}"), f);
        }
        visit_child(&self.head, "head", f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        for (level, stage) in self.encoder.iter_mut().enumerate() {
            stage.visit_mut(&format!("enc{level}"), f);
        }
        self.bottleneck.visit_mut("bottleneck", f);
        for (level, (up, stage)) in self.ups.iter_mut().zip(&mut self.decoder).enumerate() {
            visit_child_mut(up, &format!("dec{level}.up"), f);
            stage.visit_mut(&format!("dec{level}"), f);
        }
        visit_child_mut(&mut self.head, "head", f);
    }

    fn record_switches(&self, out: &mut Vec<u64>) {
        for (stage, pool) in self.encoder.iter().zip(&self.pools) {
            stage.switches(out);
            pool.record_switches(out);
        }
        self.bottleneck.switches(out);
        for stage in &self.decoder {
            stage.switches(out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::grad_check;
    use alloc::collections::BTreeSet;
    use alloc::string::String;

    fn image(n: usize, c: usize, side: usize, seed: u64) -> Tensor {
        let mut rng = Rng::new(seed);
        Tensor::new(&[n, c, side, side], (0..n * c * side * side).map(|_| rng.next_f64()).collect()).unwrap()
    }

    fn tiny() -> XUnetConfig {
        XUnetConfig { depth: 2, base_channels: 2, input_levels: 2, se_reduction: 2, block_depth: 1, in_channels: 3 }
    }

    #[test]
    fn default_maps_image_to_unit_interval() {
        let mut net = XUnet::new(XUnetConfig::default(), 1).unwrap();
        let y = net.forward(&image(1, 3, 64, 2)).unwrap();
        assert_eq!(y.shape(), &[1, 1, 64, 64]);
        assert!(y.data().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn seeded_construction_is_reproducible() {
        let a = XUnet::new(tiny(), 5).unwrap().named_params();
        assert_eq!(a, XUnet::new(tiny(), 5).unwrap().named_params());
        assert_ne!(a, XUnet::new(tiny(), 6).unwrap().named_params());
    }

    #[test]
    fn parameter_names_are_unique() {
        let params = XUnet::new(XUnetConfig::default(), 0).unwrap().named_params();
        let names: BTreeSet<&String> = params.iter().map(|(n, _)| n).collect();
        assert_eq!(names.len(), params.len());
    }

    #[test]
    fn rejects_indivisible_input() {
        let mut net = XUnet::new(tiny(), 0).unwrap();
        assert!(matches!(net.forward(&image(1, 3, 10, 0)), Err(Error::ShapeMismatch(_))));
        assert!(matches!(net.forward(&image(1, 2, 8, 0)), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn batch_items_are_independent() {
        let mut net = XUnet::new(tiny(), 3).unwrap();
        let one = image(1, 3, 8, 4);
        let pair = Tensor::concat_batch(&[&one, &one]).unwrap();
        let y = net.forward(&pair).unwrap();
        assert_eq!(y.batch_item(0), y.batch_item(1));
        assert_eq!(y.batch_item(0), net.forward(&one).unwrap());
    }

    // Deep coordinates of this net have gradients near 1e-9, where the central
    // difference is dominated by roundoff, so the bound here is absolute.
    #[test]
    fn tiny_network_gradients() {
        let mut net = XUnet::new(tiny(), 11).unwrap();
        let r = grad_check(&mut net, &image(1, 3, 16, 12), 1e-5).unwrap();
        assert!(r.max_abs_error < 1e-10, "{r:?}");
        assert!(r.checked > r.skipped_at_kinks, "{r:?}");
    }

    #[test]
    fn config_validation() {
        assert!(XUnet::new(XUnetConfig { depth: 0, ..tiny() }, 0).is_err());
        assert!(XUnet::new(XUnetConfig { input_levels: 3, ..tiny() }, 0).is_err());
    }
}
