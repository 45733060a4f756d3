//! Stateful layers: `forward` caches what `backward` needs, `backward` returns
//! exact gradients of `<forward(input), grad_output>` for the cached input.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::ops::{
    self, conv2d_backward, conv2d_transpose_backward, dense_backward, Activation, ConvSpec, PoolKind,
};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Gradients with respect to a layer's input and each named parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerGradients {
    pub grad_input: Tensor,
    pub grad_params: BTreeMap<String, Tensor>,
}

impl LayerGradients {
    pub fn new(grad_input: Tensor) -> Self {
        LayerGradients { grad_input, grad_params: BTreeMap::new() }
    }

    pub fn with_param(mut self, name: &str, grad: Tensor) -> Self {
        self.grad_params.insert(name.to_string(), grad);
        self
    }
}

/// Accumulates parameter gradients of nested layers under dotted prefixes.
#[derive(Default)]
pub struct GradSink(BTreeMap<String, Tensor>);

impl GradSink {
    pub fn new() -> Self {
        Self::default()
    }

    /// Files `child`'s parameter gradients under `prefix` and hands back its
    /// input gradient.
    pub fn absorb(&mut self, prefix: &str, child: LayerGradients) -> Tensor {
        for (name, g) in child.grad_params {
            let key = format!("{prefix}.{name}");
            match self.0.get_mut(&key) {
                Some(existing) => existing.add_assign(&g).expect("same parameter, same shape"),
                None => {
                    self.0.insert(key, g);
                }
            }
        }
        child.grad_input
    }

    pub fn finish(self, grad_input: Tensor) -> LayerGradients {
        LayerGradients { grad_input, grad_params: self.0 }
    }
}

pub trait Layer {
    fn forward(&mut self, input: &Tensor) -> Result<Tensor>;

    fn backward(&self, grad_output: &Tensor) -> Result<LayerGradients>;

    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor));

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor));

    /// Appends the state of every non-smooth branch taken by the last forward
    /// pass (relu signs, max-pool winners). Two inputs with equal switch state
    /// lie on the same smooth piece of the layer.
    fn record_switches(&self, _out: &mut Vec<u64>) {}

    fn named_params(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        self.visit_params(&mut |name, t| out.push((name.to_string(), t.clone())));
        out
    }

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |_, t| n += t.len());
        n
    }
}

pub(crate) fn visit_child(child: &dyn Layer, prefix: &str, f: &mut dyn FnMut(&str, &Tensor)) {
    child.visit_params(&mut |name, t| f(&format!("{prefix}.{name}"), t));
}

pub(crate) fn visit_child_mut(child: &mut dyn Layer, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
    child.visit_params_mut(&mut |name, t| f(&format!("{prefix}.{name}"), t));
}

/// Uniform in `(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut Rng) -> Tensor {
    let a = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
    let len = shape.iter().product();
    Tensor::new(shape, (0..len).map(|_| rng.uniform(-a, a)).collect()).expect("init shape")
}

fn cached(state: &Option<Tensor>) -> Result<&Tensor> {
    state.as_ref().ok_or(Error::StateMissing)
}

#[derive(Clone, Debug)]
pub struct Conv2d {
    pub spec: ConvSpec,
    pub weight: Tensor,
    pub bias: Tensor,
    input: Option<Tensor>,
}

impl Conv2d {
    pub fn new(spec: ConvSpec, rng: &mut Rng) -> Self {
        let taps = spec.kernel.0 * spec.kernel.1;
        let weight = glorot_uniform(&spec.weight_shape(), spec.in_channels * taps, spec.out_channels * taps, rng);
        Self::from_parts(spec, weight, Tensor::zeros(&[spec.out_channels]))
    }

    pub fn from_parts(spec: ConvSpec, weight: Tensor, bias: Tensor) -> Self {
        Conv2d { spec, weight, bias, input: None }
    }
}

impl Layer for Conv2d {
    fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let out = ops::conv2d(input, &self.weight, &self.bias, &self.spec)?;
        self.input = Some(input.clone());
        Ok(out)
    }

    fn backward(&self, grad_output: &Tensor) -> Result<LayerGradients> {
        let g = conv2d_backward(cached(&self.input)?, &self.weight, &self.spec, grad_output)?;
        Ok(LayerGradients::new(g.input).with_param("weight", g.weights).with_param("bias", g.bias))
    }

    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        f("weight", &self.weight);
        f("bias", &self.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f("weight", &mut self.weight);
        f("bias", &mut self.bias);
    }
}

/// Transposed convolution with weights `[Cin, Cout, kh, kw]`.
#[derive(Clone, Debug)]
pub struct ConvTranspose2d {
    pub weight: Tensor,
    pub bias: Tensor,
    pub stride: (usize, usize),
    pub padding: (usize, usize),
    input: Option<Tensor>,
}

impl ConvTranspose2d {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, rng: &mut Rng) -> Self {
        let taps = kernel * kernel;
        let weight = glorot_uniform(
            &[in_channels, out_channels, kernel, kernel],
            in_channels * taps,
            out_channels * taps,
            rng,
        );
        ConvTranspose2d {
            weight,
            bias: Tensor::zeros(&[out_channels]),
            stride: (stride, stride),
            padding: (0, 0),
            input: None,
        }
    }
}

impl Layer for ConvTranspose2d {
    fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let out = ops::conv2d_transpose(input, &self.weight, &self.bias, self.stride, self.padding)?;
        self.input = Some(input.clone());
        Ok(out)
    }

    fn backward(&self, grad_output: &Tensor) -> Result<LayerGradients> {
        let g =
            conv2d_transpose_backward(cached(&self.input)?, &self.weight, self.stride, self.padding, grad_output)?;
        Ok(LayerGradients::new(g.input).with_param("weight", g.weights).with_param("bias", g.bias))
    }

    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        f("weight", &self.weight);
        f("bias", &self.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f("weight", &mut self.weight);
        f("bias", &mut self.bias);
    }
}

/// Fully connected layer, `[N, F] -> [N, G]`.
#[derive(Clone, Debug)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
    input: Option<Tensor>,
}

impl Dense {
    pub fn new(features: usize, outputs: usize, rng: &mut Rng) -> Self {
        let weight = glorot_uniform(&[features, outputs], features, outputs, rng);
        Self::from_parts(weight, Tensor::zeros(&[outputs]))
    }

    pub fn from_parts(weight: Tensor, bias: Tensor) -> Self {
        Dense { weight, bias, input: None }
    }
}

impl Layer for Dense {
    fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let out = ops::dense(input, &self.weight, &self.bias)?;
        self.input = Some(input.clone());
        Ok(out)
    }

    fn backward(&self, grad_output: &Tensor) -> Result<LayerGradients> {
        let g = dense_backward(cached(&self.input)?, &self.weight, grad_output)?;
        Ok(LayerGradients::new(g.input).with_param("weight", g.weights).with_param("bias", g.bias))
    }

    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        f("weight", &self.weight);
        f("bias", &self.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f("weight", &mut self.weight);
        f("bias", &mut self.bias);
    }
}

#[derive(Clone, Debug)]
pub struct Pool2d {
    pub kind: PoolKind,
    pub window: (usize, usize),
    pub stride: (usize, usize),
    state: Option<(Vec<usize>, Vec<usize>)>,
}

impl Pool2d {
    pub fn new(kind: PoolKind, window: usize, stride: usize) -> Self {
        Pool2d { kind, window: (window, window), stride: (stride, stride), state: None }
    }
}

impl Layer for Pool2d {
    fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let (out, argmax) = ops::pool2d_with_indices(input, self.kind, self.window, self.stride)?;
        self.state = Some((input.shape().to_vec(), argmax));
        Ok(out)
    }

    fn backward(&self, grad_output: &Tensor) -> Result<LayerGradients> {
        let (shape, argmax) = self.state.as_ref().ok_or(Error::StateMissing)?;
        let g = ops::pool2d_backward(shape, self.kind, self.window, self.stride, argmax, grad_output)?;
        Ok(LayerGradients::new(g))
    }

    fn visit_params(&self, _f: &mut dyn FnMut(&str, &Tensor)) {}

    fn visit_params_mut(&mut self, _f: &mut dyn FnMut(&str, &mut Tensor)) {}

    fn record_switches(&self, out: &mut Vec<u64>) {
        if let Some((_, argmax)) = &self.state {
            out.extend(argmax.iter().map(|&i| i as u64));
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct GlobalAvgPool {
    input_shape: Option<Vec<usize>>,
}

impl GlobalAvgPool {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Layer for GlobalAvgPool {
    fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let out = ops::global_avg_pool(input)?;
        self.input_shape = Some(input.shape().to_vec());
        Ok(out)
    }

    fn backward(&self, grad_output: &Tensor) -> Result<LayerGradients> {
        let shape = self.input_shape.as_ref().ok_or(Error::StateMissing)?;
        Ok(LayerGradients::new(ops::global_avg_pool_backward(shape, grad_output)?))
    }

    fn visit_params(&self, _f: &mut dyn FnMut(&str, &Tensor)) {}

    fn visit_params_mut(&mut self, _f: &mut dyn FnMut(&str, &mut Tensor)) {}
}

#[derive(Clone, Debug)]
pub struct Act {
    pub kind: Activation,
    state: Option<(Tensor, Tensor)>,
}

impl Act {
    pub fn new(kind: Activation) -> Self {
        Act { kind, state: None }
    }

    pub fn relu() -> Self {
        Self::new(Activation::Relu)
    }

    pub fn sigmoid() -> Self {
        Self::new(Activation::Sigmoid)
    }
}

impl Layer for Act {
    fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let out = ops::activate(input, self.kind);
        self.state = Some((input.clone(), out.clone()));
        Ok(out)
    }

    fn backward(&self, grad_output: &Tensor) -> Result<LayerGradients> {
        let (input, output) = self.state.as_ref().ok_or(Error::StateMissing)?;
        Ok(LayerGradients::new(ops::activate_backward(input, output, self.kind, grad_output)?))
    }

    fn visit_params(&self, _f: &mut dyn FnMut(&str, &Tensor)) {}

    fn visit_params_mut(&mut self, _f: &mut dyn FnMut(&str, &mut Tensor)) {}

    fn record_switches(&self, out: &mut Vec<u64>) {
        if let (Activation::Relu, Some((input, _))) = (self.kind, &self.state) {
            push_signs(input, out);
        }
    }
}

/// Packs `x > 0` flags, 64 per word.
pub(crate) fn push_signs(t: &Tensor, out: &mut Vec<u64>) {
    for chunk in t.data().chunks(64) {
        let mut word = 0u64;
        for (bit, &x) in chunk.iter().enumerate() {
            if x > 0.0 {
                word |= 1 << bit;
            }
        }
        out.push(word);
    }
}
