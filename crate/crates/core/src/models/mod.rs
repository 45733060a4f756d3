//! The two networks and their persistence as a flat list of named tensors.
//!
//! Architecture hyperparameters travel alongside the weights under the
//! reserved `arch/` prefix, so a tensor list alone is enough to rebuild a
//! model.

mod classifier;
mod xunet;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

pub use classifier::{Classifier, ClassifierConfig};
pub use xunet::{XUnet, XUnetConfig};

use crate::blocks::AsppConfig;
use crate::error::{Error, Result};
use crate::layer::{Layer, LayerGradients};
use crate::tensor::Tensor;

pub const ARCH_PREFIX: &str = "arch/";

#[derive(Clone, Debug)]
pub enum Model {
    XUnet(XUnet),
    Classifier(Classifier),
}

pub fn build_xunet(cfg: XUnetConfig, seed: u64) -> Result<Model> {
    XUnet::new(cfg, seed).map(Model::XUnet)
}

pub fn build_classifier(cfg: ClassifierConfig, seed: u64) -> Result<Model> {
    Classifier::new(cfg, seed).map(Model::Classifier)
}

/// Regression map `[N, 1, H, W]` in `(0, 1)` for images `[N, 3, H, W]`.
pub fn xunet_forward(model: &mut Model, image: &Tensor) -> Result<Tensor> {
    match model {
        Model::XUnet(net) => net.forward(image),
        Model::Classifier(_) => Err(Error::ConfigInvalid("expected an X-Unet model".into())),
    }
}

/// Glaucoma probability per batch item.
pub fn classifier_predict(model: &mut Model, image: &Tensor) -> Result<Vec<f64>> {
    match model {
        Model::Classifier(net) => net.predict(image),
        Model::XUnet(_) => Err(Error::ConfigInvalid("expected a classifier model".into())),
    }
}

impl Layer for Model {
    fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        match self {
            Model::XUnet(m) => m.forward(input),
            Model::Classifier(m) => m.forward(input),
        }
    }

    fn backward(&self, grad_output: &Tensor) -> Result<LayerGradients> {
        match self {
            Model::XUnet(m) => m.backward(grad_output),
            Model::Classifier(m) => m.backward(grad_output),
        }
    }

    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        match self {
            Model::XUnet(m) => m.visit_params(f),
            Model::Classifier(m) => m.visit_params(f),
        }
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        match self {
            Model::XUnet(m) => m.visit_params_mut(f),
            Model::Classifier(m) => m.visit_params_mut(f),
        }
    }

    fn record_switches(&self, out: &mut Vec<u64>) {
        match self {
            Model::XUnet(m) => m.record_switches(out),
            Model::Classifier(m) => m.record_switches(out),
        }
    }
}

fn int_tensor(values: &[usize]) -> Tensor {
    Tensor::new(&[values.len()], values.iter().map(|&v| v as f64).collect()).expect("validated configs have no empty lists")
}

fn ints(t: &Tensor, name: &str) -> Result<Vec<usize>> {
    t.data()
        .iter()
        .map(|&v| {
            if v >= 0.0 && libm::trunc(v) == v && v < 1e9 {
                Ok(v as usize)
            } else {
                Err(Error::ConfigInvalid(format!("{name} holds non-integer value {v}")))
            }
        })
        .collect()
}

impl Model {
    pub fn is_xunet(&self) -> bool {
        matches!(self, Model::XUnet(_))
    }

    /// Architecture record followed by every parameter, in visiting order.
    pub fn to_tensors(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        match self {
            Model::XUnet(m) => {
                let c = &m.cfg;
                out.push((
                    "arch/xunet".to_string(),
                    int_tensor(&[c.depth, c.base_channels, c.input_levels, c.se_reduction, c.block_depth, c.in_channels]),
                ));
            }
            Model::Classifier(m) => {
                let c = &m.cfg;
                out.push((
                    "arch/classifier".to_string(),
                    int_tensor(&[
                        c.in_channels,
                        c.stem_width,
                        c.body_width,
                        c.aspp.branch_channels,
                        usize::from(c.aspp.include_image_pool),
                        c.head_width,
                    ]),
                ));
                out.push(("arch/classifier/stem_strides".to_string(), int_tensor(&c.stem_strides)));
                out.push(("arch/classifier/body_rates".to_string(), int_tensor(&c.body_rates)));
                out.push(("arch/classifier/aspp_rates".to_string(), int_tensor(&c.aspp.rates)));
            }
        }
        self.visit_params(&mut |name, t| out.push((name.to_string(), t.clone())));
        out
    }

    /// Rebuilds a model from [`Model::to_tensors`] output. Tensors outside the
    /// model (other prefixes such as optimizer state) are ignored; every model
    /// parameter must be present with its exact shape.
    pub fn from_tensors(tensors: &[(String, Tensor)]) -> Result<Model> {
        let map: BTreeMap<&str, &Tensor> = tensors.iter().map(|(n, t)| (n.as_str(), t)).collect();
        let get = |name: &str| -> Result<&Tensor> {
            map.get(name).copied().ok_or_else(|| Error::ConfigInvalid(format!("missing tensor {name}")))
        };
        let mut model = if let Some(arch) = map.get("arch/xunet") {
            let v = ints(arch, "arch/xunet")?;
            let [depth, base_channels, input_levels, se_reduction, block_depth, in_channels] = v[..] else {
                return Err(Error::ConfigInvalid("arch/xunet must hold 6 values".into()));
            };
            let cfg = XUnetConfig { depth, base_channels, input_levels, se_reduction, block_depth, in_channels };
            build_xunet(cfg, 0)?
        } else if let Some(arch) = map.get("arch/classifier") {
            let v = ints(arch, "arch/classifier")?;
            let [in_channels, stem_width, body_width, branch_channels, image_pool, head_width] = v[..] else {
                return Err(Error::ConfigInvalid("arch/classifier must hold 6 values".into()));
            };
            let cfg = ClassifierConfig {
                in_channels,
                stem_strides: ints(get("arch/classifier/stem_strides")?, "stem_strides")?,
                stem_width,
                body_rates: ints(get("arch/classifier/body_rates")?, "body_rates")?,
                body_width,
                aspp: AsppConfig {
                    in_channels: body_width,
                    branch_channels,
                    rates: ints(get("arch/classifier/aspp_rates")?, "aspp_rates")?,
                    include_image_pool: image_pool != 0,
                },
                head_width,
            };
            build_classifier(cfg, 0)?
        } else {
            return Err(Error::ConfigInvalid("no architecture record (arch/xunet or arch/classifier)".into()));
        };
        let mut failure = None;
        model.visit_params_mut(&mut |name, t| {
            if failure.is_some() {
                return;
            }
            match map.get(name) {
                Some(src) if src.shape() == t.shape() => t.data_mut().copy_from_slice(src.data()),
                Some(src) => {
                    failure = Some(Error::ShapeMismatch(format!(
                        "{name}: stored {:?}, model needs {:?}",
                        src.shape(),
                        t.shape()
                    )))
                }
                None => failure = Some(Error::ConfigInvalid(format!("missing parameter {name}"))),
            }
        });
        match failure {
            Some(e) => Err(e),
            None => Ok(model),
        }
    }
}
