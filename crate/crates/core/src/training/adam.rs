use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::layer::Layer;
use crate::tensor::Tensor;

/// Reserved tensor-name prefix for optimizer state in checkpoints.
pub const OPT_PREFIX: &str = "opt/";

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: BTreeMap<String, Tensor>,
    pub v: BTreeMap<String, Tensor>,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamState {
    fn default() -> Self {
        AdamState::new(1e-4)
    }
}

impl AdamState {
    pub fn new(lr: f64) -> Self {
        AdamState { m: BTreeMap::new(), v: BTreeMap::new(), t: 0, lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    /// `opt/hyper` = `[t, lr, beta1, beta2, eps]`, then `opt/m/<param>` and `opt/v/<param>`.
    pub fn to_tensors(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::with_capacity(1 + 2 * self.m.len());
        let hyper = alloc::vec![self.t as f64, self.lr, self.beta1, self.beta2, self.eps];
        out.push((format!("{OPT_PREFIX}hyper"), Tensor::new(&[5], hyper).expect("five values")));
        for (name, t) in &self.m {
            out.push((format!("{OPT_PREFIX}m/{name}"), t.clone()));
        }
        for (name, t) in &self.v {
            out.push((format!("{OPT_PREFIX}v/{name}"), t.clone()));
        }
        out
    }

    /// Reads the state written by [`AdamState::to_tensors`]; `None` when the
    /// list carries no optimizer state.
    pub fn from_tensors(tensors: &[(String, Tensor)]) -> Result<Option<AdamState>> {
        let Some((_, hyper)) = tensors.iter().find(|(n, _)| n == &format!("{OPT_PREFIX}hyper")) else {
            return Ok(None);
        };
        let &[t, lr, beta1, beta2, eps] = hyper.data() else {
            return Err(Error::ConfigInvalid("opt/hyper must hold 5 values".into()));
        };
        if !(t >= 0.0 && libm::trunc(t) == t) {
            return Err(Error::ConfigInvalid(format!("opt/hyper step counter {t} is not a count")));
        }
        let mut state = AdamState { t: t as u64, lr, beta1, beta2, eps, ..AdamState::default() };
        for (name, tensor) in tensors {
            if let Some(p) = name.strip_prefix(OPT_PREFIX).and_then(|r| r.strip_prefix("m/")) {
                state.m.insert(p.to_string(), tensor.clone());
            } else if let Some(p) = name.strip_prefix(OPT_PREFIX).and_then(|r| r.strip_prefix("v/")) {
                if tensor.data().iter().any(|&x| x < 0.0) {
                    return Err(Error::ConfigInvalid(format!("negative second moment for {p}")));
                }
                state.v.insert(p.to_string(), tensor.clone());
            }
        }
        Ok(Some(state))
    }
}

/// One bias-corrected Adam update of every parameter of `model`. All
/// gradients are validated before any parameter changes.
pub fn adam_step(model: &mut dyn Layer, grads: &BTreeMap<String, Tensor>, state: &mut AdamState) -> Result<()> {
    let mut problem = None;
    model.visit_params(&mut |name, p| {
        if problem.is_some() {
            return;
        }
        match grads.get(name) {
            None => problem = Some(format!("no gradient for parameter {name}")),
            Some(g) if g.shape() != p.shape() => {
                problem = Some(format!("gradient for {name} has shape {:?}, parameter {:?}", g.shape(), p.shape()))
            }
            Some(_) => {
                for (moments, what) in [(&state.m, "first"), (&state.v, "second")] {
                    if let Some(mt) = moments.get(name) {
                        if mt.shape() != p.shape() {
                            problem = Some(format!("{what} moment of {name} has shape {:?}", mt.shape()));
                        }
                    }
                }
            }
        }
    });
    if let Some(msg) = problem {
        return Err(Error::ShapeMismatch(msg));
    }

    state.t += 1;
    let AdamState { m, v, t, lr, beta1, beta2, eps } = state;
    let c1 = 1.0 - libm::pow(*beta1, *t as f64);
    let c2 = 1.0 - libm::pow(*beta2, *t as f64);
    model.visit_params_mut(&mut |name, p| {
        let g = &grads[name];
        let mt = m.entry(name.to_string()).or_insert_with(|| Tensor::zeros(p.shape()));
        let vt = v.entry(name.to_string()).or_insert_with(|| Tensor::zeros(p.shape()));
        for (((x, &gi), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(mt.data_mut()).zip(vt.data_mut()) {
            *mi = *beta1 * *mi + (1.0 - *beta1) * gi;
            *vi = *beta2 * *vi + (1.0 - *beta2) * gi * gi;
            *x -= *lr * (*mi / c1) / (libm::sqrt(*vi / c2) + *eps);
        }
    });
    Ok(())
}
