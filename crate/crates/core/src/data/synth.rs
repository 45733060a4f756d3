use alloc::format;
use alloc::vec::Vec;

use super::{LabelMask, Region, RgbImage, Sample};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthParams {
    /// Square image side in pixels.
    pub size: usize,
    /// Vertical disc semi-axis range, as a fraction of `size`.
    pub disc_radius: (f64, f64),
    /// Range of the vertical cup-to-disc ratio.
    pub cdr_range: (f64, f64),
    /// Maximum disc-centre offset from the image centre, as a fraction of `size`.
    pub jitter: f64,
    /// Amplitude of uniform per-channel pixel noise, in `[0, 1]` intensity units.
    pub noise: f64,
    /// Samples with a ratio above this are labelled glaucomatous.
    pub glaucoma_threshold: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            size: 256,
            disc_radius: (0.13, 0.18),
            cdr_range: (0.2, 0.9),
            jitter: 0.1,
            noise: 0.03,
            glaucoma_threshold: 0.6,
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let (r0, r1) = self.disc_radius;
        let (c0, c1) = self.cdr_range;
        let problem = if self.size < 8 {
            Some(format!("image size {} is below 8", self.size))
        } else if !(0.0 < r0 && r0 <= r1) {
            Some(format!("disc radius range {r0}..{r1} must be positive and ordered"))
        } else if !(0.0 < c0 && c0 <= c1 && c1 < 1.0) {
            Some(format!("cup-to-disc range {c0}..{c1} must lie inside (0, 1)"))
        } else if !(self.jitter >= 0.0 && self.jitter + r1 < 0.5) {
            Some(format!("jitter {} plus radius {r1} lets the disc leave the image", self.jitter))
        } else if !(0.0..=1.0).contains(&self.noise) {
            Some(format!("noise amplitude {} outside [0, 1]", self.noise))
        } else if !(0.0 < self.glaucoma_threshold && self.glaucoma_threshold < 1.0) {
            Some(format!("glaucoma threshold {} outside (0, 1)", self.glaucoma_threshold))
        } else {
            None
        };
        match problem {
            Some(msg) => Err(Error::ConfigInvalid(msg)),
            None => Ok(()),
        }
    }
}

/// Ground-truth ellipses behind a synthetic sample, in pixel units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthGeometry {
    pub cx: f64,
    pub cy: f64,
    pub disc_rx: f64,
    pub disc_ry: f64,
    pub cup_rx: f64,
    pub cup_ry: f64,
}

impl SynthGeometry {
    fn disc_rho(&self, x: f64, y: f64) -> f64 {
        libm::sqrt(sq((x - self.cx) / self.disc_rx) + sq((y - self.cy) / self.disc_ry))
    }

    fn in_cup(&self, x: f64, y: f64) -> bool {
        sq((x - self.cx) / self.cup_rx) + sq((y - self.cy) / self.cup_ry) <= 1.0
    }
}

fn sq(v: f64) -> f64 {
    v * v
}

fn to_u8(v: f64) -> u8 {
    libm::round(v.clamp(0.0, 1.0) * 255.0) as u8
}

/// Sample number `index`, drawn from its own stream of the master seed.
pub fn synth_sample(params: &SynthParams, index: usize) -> Result<(Sample, SynthGeometry)> {
    params.validate()?;
    let mut rng = Rng::stream(params.seed, index as u64);
    let n = params.size as f64;
    let disc_ry = rng.uniform(params.disc_radius.0, params.disc_radius.1) * n;
    let disc_rx = disc_ry * rng.uniform(0.88, 1.0);
    let cdr = rng.uniform(params.cdr_range.0, params.cdr_range.1);
    let cup_ry = cdr * disc_ry;
    let cup_rx = (cup_ry * rng.uniform(0.85, 1.05)).min(disc_rx);
    let half = (n - 1.0) / 2.0;
    let cx = half + rng.uniform(-params.jitter, params.jitter) * n;
    let cy = half + rng.uniform(-params.jitter, params.jitter) * n;
    let geo = SynthGeometry { cx, cy, disc_rx, disc_ry, cup_rx, cup_ry };

    let tint = [rng.uniform(0.50, 0.60), rng.uniform(0.24, 0.32), rng.uniform(0.08, 0.14)];
    let rim = [0.78, rng.uniform(0.58, 0.66), rng.uniform(0.26, 0.34)];
    let cup = [0.80, rng.uniform(0.82, 0.88), rng.uniform(0.58, 0.68)];
    let vignette = rng.uniform(0.3, 0.45);
    let corner = libm::sqrt(2.0) * half;

    let mut pixels = Vec::with_capacity(3 * params.size * params.size);
    let mut regions = Vec::with_capacity(params.size * params.size);
    for y in 0..params.size {
        for x in 0..params.size {
            let (fx, fy) = (x as f64, y as f64);
            let rho = geo.disc_rho(fx, fy);
            let (base, region) = if rho <= 1.0 {
                // A red peak at the disc centre marks it as the brightest spot.
                let peak = 0.14 * (1.0 - rho);
                if geo.in_cup(fx, fy) {
                    ([cup[0] + peak, cup[1], cup[2]], Region::Cup)
                } else {
                    ([rim[0] + peak, rim[1], rim[2]], Region::Rim)
                }
            } else {
                let d = libm::sqrt(sq(fx - half) + sq(fy - half)) / corner;
                let fall = 1.0 - vignette * d * d;
                ([tint[0] * fall, tint[1] * fall, tint[2] * fall], Region::Background)
            };
            for c in base {
                pixels.push(to_u8(c + rng.uniform(-params.noise, params.noise)));
            }
            regions.push(region);
        }
    }
    let sample = Sample {
        id: format!("synth{index:04}"),
        image: RgbImage::new(params.size, params.size, pixels)?,
        mask: Some(LabelMask::new(params.size, params.size, regions)?),
        glaucoma_label: Some(u8::from(cdr > params.glaucoma_threshold)),
        true_cdr: Some(cdr),
    };
    Ok((sample, geo))
}

/// `count` synthetic fundus samples. Every sample depends only on the seed
/// and its index.
pub fn synth_generate(params: &SynthParams, count: usize) -> Result<Vec<Sample>> {
    if count == 0 {
        return Err(Error::ConfigInvalid("sample count must be at least 1".into()));
    }
    (0..count).map(|i| synth_sample(params, i).map(|(s, _)| s)).collect()
}
