use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::blocks::{Aspp, AsppConfig, ConvBlock};
use crate::error::{Error, Result};
use crate::layer::{visit_child, visit_child_mut, Act, Conv2d, Dense, GlobalAvgPool, GradSink, Layer, LayerGradients};
use crate::ops::{sigmoid, ConvSpec};
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassifierConfig {
    pub in_channels: usize,
    /// One 3×3 conv + relu per entry, with that stride.
    pub stem_strides: Vec<usize>,
    pub stem_width: usize,
    /// One dilated 3×3 conv block per entry.
    pub body_rates: Vec<usize>,
    pub body_width: usize,
    pub aspp: AsppConfig,
    /// Hidden units of an optional dense + relu layer before the logit; 0 for none.
    pub head_width: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            in_channels: 3,
            stem_strides: vec![2, 2],
            stem_width: 16,
            body_rates: vec![1, 2, 4],
            body_width: 16,
            aspp: AsppConfig::new(16, 16),
            head_width: 0,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.stem_width == 0 || self.body_width == 0 {
            return Err(Error::ConfigInvalid(format!("classifier widths must be positive: {self:?}")));
        }
        if self.stem_strides.is_empty() || self.body_rates.is_empty() {
            return Err(Error::ConfigInvalid("classifier needs at least one stem stage and one body block".into()));
        }
        if self.stem_strides.contains(&0) || self.body_rates.contains(&0) {
            return Err(Error::ConfigInvalid("strides and dilation rates must be positive".into()));
        }
        if self.aspp.in_channels != self.body_width {
            return Err(Error::ConfigInvalid(format!(
                "ASPP input channels {} must equal body width {}",
                self.aspp.in_channels, self.body_width
            )));
        }
        self.aspp.validate()
    }

    /// Overall downsampling factor of the stem.
    pub fn downsampling(&self) -> usize {
        self.stem_strides.iter().product()
    }
}

/// Dilated-convolution classifier: strided stem, dilated body, ASPP, then a
/// global average pool and a dense layer emitting one logit per image.
#[derive(Clone, Debug)]
pub struct Classifier {
    pub cfg: ClassifierConfig,
    stem: Vec<(Conv2d, Act)>,
    body: Vec<ConvBlock>,
    aspp: Aspp,
    pool: GlobalAvgPool,
    hidden: Option<(Dense, Act)>,
    pub output: Dense,
}

impl Classifier {
    pub fn new(cfg: ClassifierConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = Rng::new(seed);
        let mut cin = cfg.in_channels;
        let mut stem = Vec::with_capacity(cfg.stem_strides.len());
        for &s in &cfg.stem_strides {
            let spec = ConvSpec::new(cin, cfg.stem_width, 3).with_stride(s).with_padding(1);
            stem.push((Conv2d::new(spec, &mut rng), Act::relu()));
            cin = cfg.stem_width;
        }
        let mut body = Vec::with_capacity(cfg.body_rates.len());
        for &r in &cfg.body_rates {
            body.push(ConvBlock::new(cin, cfg.body_width, 1, r, &mut rng)?);
            cin = cfg.body_width;
        }
        let aspp = Aspp::new(cfg.aspp.clone(), &mut rng)?;
        let mut features = cfg.aspp.branch_channels;
        let hidden = (cfg.head_width > 0).then(|| {
            let d = Dense::new(features, cfg.head_width, &mut rng);
            features = cfg.head_width;
            (d, Act::relu())
        });
        let output = Dense::new(features, 1, &mut rng);
        Ok(Classifier { cfg, stem, body, aspp, pool: GlobalAvgPool::new(), hidden, output })
    }

    pub fn check_input(&self, input: &Tensor) -> Result<()> {
        let (_, c, h, w) = input.dims4()?;
        if c != self.cfg.in_channels {
            return Err(Error::ShapeMismatch(format!(
                "classifier expects {} channels, got {c}",
                self.cfg.in_channels
            )));
        }
        let min = self.cfg.downsampling();
        if h < min || w < min {
            return Err(Error::InputTooSmall(format!("{h}x{w} input, stem needs at least {min}x{min}")));
        }
        Ok(())
    }

    /// Glaucoma probability for every image of the batch.
    pub fn predict(&mut self, images: &Tensor) -> Result<Vec<f64>> {
        Ok(self.forward(images)?.data().iter().map(|&z| sigmoid(z)).collect())
    }
}

impl Layer for Classifier {
    fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        self.check_input(input)?;
        let mut x = input.clone();
        for (conv, act) in &mut self.stem {
            x = act.forward(&conv.forward(&x)?)?;
        }
        for block in &mut self.body {
            x = block.forward(&x)?;
        }
        x = self.aspp.forward(&x)?;
        x = self.pool.forward(&x)?;
        if let Some((dense, act)) = &mut self.hidden {
            x = act.forward(&dense.forward(&x)?)?;
        }
        self.output.forward(&x)
    }

    fn backward(&self, grad_output: &Tensor) -> Result<LayerGradients> {
        let mut sink = GradSink::new();
        let mut g = sink.absorb("output", self.output.backward(grad_output)?);
        if let Some((dense, act)) = &self.hidden {
            let gh = act.backward(&g)?.grad_input;
            g = sink.absorb("hidden", dense.backward(&gh)?);
        }
        g = self.pool.backward(&g)?.grad_input;
        g = sink.absorb("aspp", self.aspp.backward(&g)?);
        for (i, block) in self.body.iter().enumerate().rev() {
            g = sink.absorb(&format!("body{i}"), block.backward(&g)?);
        }
        for (i, (conv, act)) in self.stem.iter().enumerate().rev() {
            let gs = act.backward(&g)?.grad_input;
            g = sink.absorb(&format!("stem{i}"), conv.backward(&gs)?);
        }
        Ok(sink.finish(g))
    }

    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        for (i, (conv, _)) in self.stem.iter().enumerate() {
            visit_child(conv, &format!("stem{i}"), f);
        }
        for (i, block) in self.body.iter().enumerate() {
            visit_child(block, &format!("body{i}"), f);
        }
        visit_child(&self.aspp, "aspp", f);
        if let Some((dense, _)) = &self.hidden {
            visit_child(dense, "hidden", f);
        }
        visit_child(&self.output, "output", f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        for (i, (conv, _)) in self.stem.iter_mut().enumerate() {
            visit_child_mut(conv, &format!("stem{i}"), f);
        }
        for (i, block) in self.body.iter_mut().enumerate() {
            visit_child_mut(block, &format!("body{i}"), f);
        }
        visit_child_mut(&mut self.aspp, "aspp", f);
        if let Some((dense, _)) = &mut self.hidden {
            visit_child_mut(dense, "hidden", f);
        }
        visit_child_mut(&mut self.output, "output", f);
    }

    fn record_switches(&self, out: &mut Vec<u64>) {
        for (_, act) in &self.stem {
            act.record_switches(out);
        }
        for block in &self.body {
            block.record_switches(out);
        }
        self.aspp.record_switches(out);
        if let Some((_, act)) = &self.hidden {
            act.record_switches(out);
        }
    }
}
