use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Dense row-major array of `f64`. Image tensors are laid out `[N, C, H, W]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        check_shape(shape)?;
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} holds {len} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape: shape.to_vec(), data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        check_shape(shape).expect("tensor dimensions must be positive");
        let len = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![value; len] }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor { shape: vec![1], data: vec![value] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// `(N, C, H, W)` of a rank-4 tensor.
    pub fn dims4(&self) -> Result<(usize, usize, usize, usize)> {
        match self.shape[..] {
            [n, c, h, w] => Ok((n, c, h, w)),
            _ => Err(Error::ShapeMismatch(format!("expected [N, C, H, W], got {:?}", self.shape))),
        }
    }

    /// `(N, F)` of a rank-2 tensor.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape[..] {
            [n, f] => Ok((n, f)),
            _ => Err(Error::ShapeMismatch(format!("expected [N, F], got {:?}", self.shape))),
        }
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        check_shape(shape)?;
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::ShapeMismatch(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn ensure_shape(&self, shape: &[usize], what: &str) -> Result<()> {
        if self.shape != shape {
            return Err(Error::ShapeMismatch(format!(
                "{what}: expected {shape:?}, got {:?}",
                self.shape
            )));
        }
        Ok(())
    }

    /// Inner product over all elements.
    pub fn dot(&self, other: &Tensor) -> Result<f64> {
        other.ensure_shape(&self.shape, "dot")?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        other.ensure_shape(&self.shape, "add")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for x in &mut self.data {
            *x *= factor;
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Stacks equally shaped tensors along a new leading axis, or along the
    /// existing leading axis when `items` are already batched (`[1, ...]`
    /// items become `[len, ...]`).
    pub fn concat_batch(items: &[&Tensor]) -> Result<Tensor> {
        let first = items.first().ok_or(Error::Empty)?;
        let tail = &first.shape[1..];
        let mut n = 0;
        let mut data = Vec::with_capacity(items.iter().map(|t| t.len()).sum());
        for t in items {
            if &t.shape[1..] != tail {
                return Err(Error::ShapeMismatch(format!(
                    "cannot batch {:?} with {:?}",
                    first.shape, t.shape
                )));
            }
            n += t.shape[0];
            data.extend_from_slice(&t.data);
        }
        let mut shape = first.shape.clone();
        shape[0] = n;
        Ok(Tensor { shape, data })
    }

    /// Item `index` along the leading axis, keeping a leading dimension of 1.
    pub fn batch_item(&self, index: usize) -> Tensor {
        let per = self.data.len() / self.shape[0];
        let mut shape = self.shape.clone();
        shape[0] = 1;
        Tensor { shape, data: self.data[index * per..(index + 1) * per].to_vec() }
    }

    /// Concatenates `[N, C_i, H, W]` tensors along channels, in order.
    pub fn cat_channels(parts: &[&Tensor]) -> Result<Tensor> {
        let first = parts.first().ok_or(Error::Empty)?;
        let (n, _, h, w) = first.dims4()?;
        let mut sizes = Vec::with_capacity(parts.len());
        for t in parts {
            let (tn, tc, th, tw) = t.dims4()?;
            if (tn, th, tw) != (n, h, w) {
                return Err(Error::ShapeMismatch(format!(
                    "channel concat of {:?} and {:?}",
                    first.shape, t.shape
                )));
            }
            sizes.push(tc);
        }
        let plane = h * w;
        let total: usize = sizes.iter().sum();
        let mut data = Vec::with_capacity(n * total * plane);
        for i in 0..n {
            for (t, &c) in parts.iter().zip(&sizes) {
                data.extend_from_slice(&t.data[i * c * plane..(i + 1) * c * plane]);
            }
        }
        Ok(Tensor { shape: vec![n, total, h, w], data })
    }

    /// Splits channels into consecutive groups of the given sizes.
    pub fn split_channel_groups(&self, sizes: &[usize]) -> Result<Vec<Tensor>> {
        let (n, c, h, w) = self.dims4()?;
        if sizes.iter().sum::<usize>() != c || sizes.contains(&0) {
            return Err(Error::ShapeMismatch(format!("cannot split {c} channels into {sizes:?}")));
        }
        let plane = h * w;
        let mut parts: Vec<Vec<f64>> = sizes.iter().map(|&s| Vec::with_capacity(n * s * plane)).collect();
        for i in 0..n {
            let mut offset = i * c * plane;
            for (part, &s) in parts.iter_mut().zip(sizes) {
                part.extend_from_slice(&self.data[offset..offset + s * plane]);
                offset += s * plane;
            }
        }
        Ok(parts
            .into_iter()
            .zip(sizes)
            .map(|(data, &s)| Tensor { shape: vec![n, s, h, w], data })
            .collect())
    }

    /// Concatenates two `[N, C, H, W]` tensors along channels.
    pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor> {
        Self::cat_channels(&[a, b])
    }

    /// Inverse of [`Tensor::concat_channels`]: the first `ca` channels and the rest.
    pub fn split_channels(&self, ca: usize) -> Result<(Tensor, Tensor)> {
        let (_, c, _, _) = self.dims4()?;
        let mut parts = self.split_channel_groups(&[ca, c.saturating_sub(ca)])?;
        let b = parts.pop().expect("two groups");
        let a = parts.pop().expect("two groups");
        Ok((a, b))
    }
}

fn check_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::ShapeMismatch(format!(
            "dimensions must be a non-empty list of positive sizes, got {shape:?}"
        )));
    }
    Ok(())
}
