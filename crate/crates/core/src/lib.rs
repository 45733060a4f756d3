//! Numerical core for fundus image analysis: optic disc/cup segmentation posed
//! as image regression with a multi-input attention U-Net, and glaucoma
//! classification with a dilated-convolution / ASPP network.
//!
//! Everything here is `no_std` + `alloc`, runs in 64-bit floating point and is
//! bit-for-bit deterministic. File formats, datasets on disk and the command
//! line live in the companion `fundus` crate.

#![no_std]

extern crate alloc;

pub mod blocks;
pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod layer;
pub mod models;
pub mod ops;
pub mod rng;
pub mod tensor;
pub mod training;

mod gemm;

pub use error::{Error, Result};
pub use layer::{Layer, LayerGradients};
pub use tensor::Tensor;
