use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{LabelMask, RgbImage, Sample};
use crate::error::{Error, Result};
use crate::ops::axis_taps;

/// Brightest point of the box-blurred red channel, as `(x, y)`. The blur
/// clamps at the edges; ties go to the smallest row, then the smallest
/// column. An even window is widened by one.
pub fn locate_disc(image: &RgbImage, blur_window: usize) -> (usize, usize) {
    let r = blur_window / 2;
    let (w, h) = (image.width(), image.height());
    let red: Vec<u32> = image.pixels().chunks_exact(3).map(|p| u32::from(p[0])).collect();
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut rows = vec![0u32; w * h];
    for y in 0..h {
        for x in 0..w {
            rows[y * w + x] = (-(r as isize)..=r as isize).map(|d| red[y * w + clamp(x as isize + d, w)]).sum();
        }
    }
    let mut best = (0, 0);
    let mut best_sum = 0u32;
    for y in 0..h {
        for x in 0..w {
            let s: u32 = (-(r as isize)..=r as isize).map(|d| rows[clamp(y as isize + d, h) * w + x]).sum();
            if s > best_sum {
                best_sum = s;
                best = (x, y);
            }
        }
    }
    best
}

/// Top-left corner of the `size × size` window centred on `center = (x, y)`,
/// shifted to lie inside a `width × height` frame.
pub fn roi_origin(width: usize, height: usize, center: (usize, usize), size: usize) -> Result<(usize, usize)> {
    if size == 0 || size > width || size > height {
        return Err(Error::ImageTooSmall { width, height, size });
    }
    let origin = |c: usize, extent: usize| c.saturating_sub(size / 2).min(extent - size);
    Ok((origin(center.0, width), origin(center.1, height)))
}

/// `size × size` window centred on `center = (x, y)`, shifted to lie inside
/// the image when the centre is near a border.
pub fn crop_roi(image: &RgbImage, center: (usize, usize), size: usize) -> Result<RgbImage> {
    let w = image.width();
    let (x0, y0) = roi_origin(w, image.height(), center, size)?;
    let mut pixels = Vec::with_capacity(3 * size * size);
    for y in y0..y0 + size {
        pixels.extend_from_slice(&image.pixels()[3 * (y * w + x0)..3 * (y * w + x0 + size)]);
    }
    RgbImage::new(size, size, pixels)
}

fn crop_mask(mask: &LabelMask, center: (usize, usize), size: usize) -> Result<LabelMask> {
    let w = mask.width();
    let (x0, y0) = roi_origin(w, mask.height(), center, size)?;
    let mut regions = Vec::with_capacity(size * size);
    for y in y0..y0 + size {
        regions.extend_from_slice(&mask.regions()[y * w + x0..y * w + x0 + size]);
    }
    LabelMask::new(size, size, regions)
}

/// Crops image and mask with the same window.
pub fn crop_sample(sample: &Sample, center: (usize, usize), size: usize) -> Result<Sample> {
    Ok(Sample {
        image: crop_roi(&sample.image, center, size)?,
        mask: sample.mask.as_ref().map(|m| crop_mask(m, center, size)).transpose()?,
        ..sample.clone()
    })
}

/// Writes `patch` into `frame` with its top-left corner at `origin`.
pub fn paste_mask(frame: &mut LabelMask, patch: &LabelMask, origin: (usize, usize)) -> Result<()> {
    let (x0, y0) = origin;
    if x0 + patch.width() > frame.width() || y0 + patch.height() > frame.height() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} patch at ({x0}, {y0}) overruns the {}x{} frame",
            patch.width(),
            patch.height(),
            frame.width(),
            frame.height()
        )));
    }
    for y in 0..patch.height() {
        for x in 0..patch.width() {
            frame.set(x0 + x, y0 + y, patch.get(x, y));
        }
    }
    Ok(())
}

/// Corner-aligned bilinear resize, rounded back to 8 bits.
pub fn resize_image(image: &RgbImage, out_w: usize, out_h: usize) -> Result<RgbImage> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::DegenerateOutput(format!("resize target {out_w}x{out_h}")));
    }
    let tx = axis_taps(image.width(), out_w);
    let ty = axis_taps(image.height(), out_h);
    let mut pixels = Vec::with_capacity(3 * out_w * out_h);
    for y in &ty {
        for x in &tx {
            let (a, b, c, d) = (image.get(x.lo, y.lo), image.get(x.hi, y.lo), image.get(x.lo, y.hi), image.get(x.hi, y.hi));
            for ch in 0..3 {
                let top = (1.0 - x.frac) * f64::from(a[ch]) + x.frac * f64::from(b[ch]);
                let bottom = (1.0 - x.frac) * f64::from(c[ch]) + x.frac * f64::from(d[ch]);
                let v = (1.0 - y.frac) * top + y.frac * bottom;
                pixels.push(libm::round(v).clamp(0.0, 255.0) as u8);
            }
        }
    }
    RgbImage::new(out_w, out_h, pixels)
}

/// Nearest-neighbour index along one axis with corner-aligned sampling.
fn nearest(src: usize, dst: usize) -> Vec<usize> {
    axis_taps(src, dst).iter().map(|t| if t.frac < 0.5 { t.lo } else { t.hi }).collect()
}

/// Nearest-neighbour resize, so labels never blend.
pub fn resize_mask(mask: &LabelMask, out_w: usize, out_h: usize) -> Result<LabelMask> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::DegenerateOutput(format!("resize target {out_w}x{out_h}")));
    }
    let nx = nearest(mask.width(), out_w);
    let ny = nearest(mask.height(), out_h);
    let regions = ny.iter().flat_map(|&y| nx.iter().map(move |&x| mask.get(x, y))).collect();
    LabelMask::new(out_w, out_h, regions)
}

/// The eight symmetries of the square. Rotations are clockwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dihedral {
    Identity,
    Rot90,
    Rot180,
    Rot270,
    FlipH,
    FlipV,
    /// Mirror across the main diagonal.
    Transpose,
    /// Mirror across the anti-diagonal.
    AntiTranspose,
}

impl Dihedral {
    pub const ALL: [Dihedral; 8] = [
        Dihedral::Identity,
        Dihedral::Rot90,
        Dihedral::Rot180,
        Dihedral::Rot270,
        Dihedral::FlipH,
        Dihedral::FlipV,
        Dihedral::Transpose,
        Dihedral::AntiTranspose,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Dihedral::Identity => "identity",
            Dihedral::Rot90 => "rot90",
            Dihedral::Rot180 => "rot180",
            Dihedral::Rot270 => "rot270",
            Dihedral::FlipH => "flip_h",
            Dihedral::FlipV => "flip_v",
            Dihedral::Transpose => "transpose",
            Dihedral::AntiTranspose => "anti_transpose",
        }
    }

    fn needs_square(self) -> bool {
        matches!(self, Dihedral::Rot90 | Dihedral::Rot270 | Dihedral::Transpose | Dihedral::AntiTranspose)
    }

    /// Source pixel read by output pixel `(x, y)` of a `w × h` grid.
    fn source(self, x: usize, y: usize, w: usize, h: usize) -> (usize, usize) {
        match self {
            Dihedral::Identity => (x, y),
            Dihedral::Rot90 => (y, h - 1 - x),
            Dihedral::Rot180 => (w - 1 - x, h - 1 - y),
            Dihedral::Rot270 => (w - 1 - y, x),
            Dihedral::FlipH => (w - 1 - x, y),
            Dihedral::FlipV => (x, h - 1 - y),
            Dihedral::Transpose => (y, x),
            Dihedral::AntiTranspose => (w - 1 - y, h - 1 - x),
        }
    }

    fn remap<T: Copy>(self, src: &[T], w: usize, h: usize) -> Vec<T> {
        let mut out = Vec::with_capacity(src.len());
        for y in 0..h {
            for x in 0..w {
                let (sx, sy) = self.source(x, y, w, h);
                out.push(src[sy * w + sx]);
            }
        }
        out
    }
}

/// Applies `op` to image and mask alike. Non-identity ops tag the id with
/// the op name.
pub fn augment(sample: &Sample, op: Dihedral) -> Result<Sample> {
    let (w, h) = (sample.image.width(), sample.image.height());
    if op.needs_square() && w != h {
        return Err(Error::NonSquareRotation { width: w, height: h });
    }
    let px: Vec<[u8; 3]> = sample.image.pixels().chunks_exact(3).map(|p| [p[0], p[1], p[2]]).collect();
    let image = RgbImage::new(w, h, op.remap(&px, w, h).into_iter().flatten().collect())?;
    let mask = match &sample.mask {
        Some(m) => {
            if (m.width(), m.height()) != (w, h) {
                return Err(Error::ShapeMismatch(format!(
                    "mask {}x{} does not match image {w}x{h}",
                    m.width(),
                    m.height()
                )));
            }
            Some(LabelMask::new(w, h, op.remap(m.regions(), w, h))?)
        }
        None => None,
    };
    let id = if op == Dihedral::Identity { sample.id.clone() } else { format!("{}_{}", sample.id, op.name()) };
    Ok(Sample { id, image, mask, ..sample.clone() })
}

/// Every sample under all eight symmetries, grouped per sample.
pub fn expand_dataset(samples: &[Sample]) -> Result<Vec<Sample>> {
    let mut out = Vec::with_capacity(8 * samples.len());
    for s in samples {
        for op in Dihedral::ALL {
            out.push(augment(s, op)?);
        }
    }
    Ok(out)
}
