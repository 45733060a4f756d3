use crate::error::Result;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
}

pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Logistic function, evaluated without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

pub fn activate(input: &Tensor, kind: Activation) -> Tensor {
    match kind {
        Activation::Relu => input.map(relu),
        Activation::Sigmoid => input.map(sigmoid),
    }
}

/// `input` is the forward input, `output` the forward output.
pub fn activate_backward(
    input: &Tensor,
    output: &Tensor,
    kind: Activation,
    grad_output: &Tensor,
) -> Result<Tensor> {
    grad_output.ensure_shape(input.shape(), "activation grad_output")?;
    let mut g = grad_output.clone();
    match kind {
        Activation::Relu => {
            for (gi, &x) in g.data_mut().iter_mut().zip(input.data()) {
                if x <= 0.0 {
                    *gi = 0.0;
                }
            }
        }
        Activation::Sigmoid => {
            for (gi, &s) in g.data_mut().iter_mut().zip(output.data()) {
                *gi *= s * (1.0 - s);
            }
        }
    }
    Ok(g)
}
