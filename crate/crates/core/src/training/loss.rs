use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Mean absolute error and its subgradient `sign(pred - target) / n`, with `sign(0) = 0`.
pub fn mae_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    target.ensure_shape(pred.shape(), "mae_loss target")?;
    let n = pred.len() as f64;
    let mut total = 0.0;
    let grad: Vec<f64> = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let d = p - t;
            total += libm::fabs(d);
            if d > 0.0 {
                1.0 / n
            } else if d < 0.0 {
                -1.0 / n
            } else {
                0.0
            }
        })
        .collect();
    Ok((total / n, Tensor::new(pred.shape(), grad)?))
}

/// Binary cross-entropy of `p = sigmoid(logit)` against `label`, evaluated as
/// `max(z, 0) - z·y + ln(1 + e^-|z|)`. Returns the loss and its derivative
/// with respect to the logit, `p - y`.
pub fn bce_loss(logit: f64, label: f64) -> Result<(f64, f64)> {
    if label != 0.0 && label != 1.0 {
        return Err(Error::LabelInvalid(label));
    }
    let loss = logit.max(0.0) - logit * label + libm::log1p(libm::exp(-libm::fabs(logit)));
    Ok((loss, crate::ops::sigmoid(logit) - label))
}
