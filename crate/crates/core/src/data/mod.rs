//! Images, label masks, ROI extraction, augmentation and the synthetic
//! fundus generator.

mod geometry;
mod synth;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

pub use geometry::{
    augment, crop_roi, crop_sample, expand_dataset, locate_disc, paste_mask, resize_image, resize_mask, roi_origin, Dihedral,
};
pub use synth::{synth_generate, synth_sample, SynthGeometry, SynthParams};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// 8-bit RGB raster, rows top to bottom, channels interleaved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != 3 * width * height {
            return Err(Error::ShapeMismatch(format!(
                "{width}x{height} RGB image needs {} bytes, got {}",
                3 * width * height,
                pixels.len()
            )));
        }
        Ok(RgbImage { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        Self::new(width, height, rgb.iter().copied().cycle().take(3 * width * height).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = 3 * (y * self.width + x);
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// `[1, 3, H, W]` with values in `[0, 1]`.
    pub fn to_tensor(&self) -> Tensor {
        let plane = self.width * self.height;
        let mut data = vec![0.0; 3 * plane];
        for (i, px) in self.pixels.chunks_exact(3).enumerate() {
            for c in 0..3 {
                data[c * plane + i] = f64::from(px[c]) / 255.0;
            }
        }
        Tensor::new(&[1, 3, self.height, self.width], data).expect("shape matches pixel count")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Region {
    Cup,
    Rim,
    Background,
}

impl Region {
    /// Regression target level.
    pub fn level(self) -> f64 {
        match self {
            Region::Cup => 0.0,
            Region::Rim => 0.5,
            Region::Background => 1.0,
        }
    }

    pub fn in_disc(self) -> bool {
        self != Region::Background
    }
}

/// Per-pixel optic cup / neuroretinal rim / background labels. The disc is
/// cup ∪ rim.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMask {
    width: usize,
    height: usize,
    regions: Vec<Region>,
}

impl LabelMask {
    pub fn new(width: usize, height: usize, regions: Vec<Region>) -> Result<Self> {
        if width == 0 || height == 0 || regions.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{width}x{height} mask needs {} labels, got {}",
                width * height,
                regions.len()
            )));
        }
        Ok(LabelMask { width, height, regions })
    }

    pub fn filled(width: usize, height: usize, region: Region) -> Result<Self> {
        Self::new(width, height, vec![region; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn get(&self, x: usize, y: usize) -> Region {
        self.regions[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, region: Region) {
        self.regions[y * self.width + x] = region;
    }

    pub fn cup(&self) -> Vec<bool> {
        self.regions.iter().map(|&r| r == Region::Cup).collect()
    }

    pub fn disc(&self) -> Vec<bool> {
        self.regions.iter().map(|r| r.in_disc()).collect()
    }
}

/// One dataset entry. Synthetic samples carry their ground-truth ratio.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: String,
    pub image: RgbImage,
    pub mask: Option<LabelMask>,
    pub glaucoma_label: Option<u8>,
    pub true_cdr: Option<f64>,
}

pub const DEFAULT_T_CUP: f64 = 0.25;
pub const DEFAULT_T_DISC: f64 = 0.75;

/// `[1, 1, H, W]` target: cup 0.0, rim 0.5, background 1.0.
pub fn encode_label(mask: &LabelMask) -> Tensor {
    Tensor::new(&[1, 1, mask.height, mask.width], mask.regions.iter().map(|r| r.level()).collect())
        .expect("shape matches label count")
}

/// Thresholds a `[1, 1, H, W]` regression map back into regions.
pub fn decode_prediction(map: &Tensor, t_cup: f64, t_disc: f64) -> Result<LabelMask> {
    if !(0.0 < t_cup && t_cup < t_disc && t_disc < 1.0) {
        return Err(Error::ThresholdInvalid { t_cup, t_disc });
    }
    let (n, c, h, w) = map.dims4()?;
    if (n, c) != (1, 1) {
        return Err(Error::ShapeMismatch(format!("expected a [1, 1, H, W] map, got {:?}", map.shape())));
    }
    let regions = map
        .data()
        .iter()
        .map(|&v| {
            if v < t_cup {
                Region::Cup
            } else if v < t_disc {
                Region::Rim
            } else {
                Region::Background
            }
        })
        .collect();
    LabelMask::new(w, h, regions)
}
