//! Differentiable primitives. Each forward op has a matching `*_backward`
//! that returns exact gradients of `<op(..), grad_output>`.

mod activation;
mod conv;
mod dense;
mod pool;
mod resample;

pub use activation::{activate, activate_backward, relu, sigmoid, Activation};
pub use conv::{conv2d, conv2d_backward, conv2d_transpose, conv2d_transpose_backward, ConvGrads, ConvSpec};
pub use dense::{dense, dense_backward, DenseGrads};
pub use pool::{
    global_avg_pool, global_avg_pool_backward, pool2d, pool2d_backward, pool2d_with_indices, PoolKind,
};
pub use resample::{axis_taps, resize_bilinear, resize_bilinear_backward, AxisTap};
