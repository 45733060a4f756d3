//! Binary PPM (`P6`) images and PGM (`P5`) label masks, 8 bits per sample.
//!
//! Mask pixels map 0 → cup, 128 → rim, 255 → background; any other value is
//! rejected.

use std::fs;
use std::path::Path;

use fundus_core::data::{LabelMask, Region, RgbImage};

use crate::error::{Error, Result};

const CUP: u8 = 0;
const RIM: u8 = 128;
const BACKGROUND: u8 = 255;

fn header(magic: &str, width: usize, height: usize) -> Vec<u8> {
    format!("{magic}\n{width} {height}\n255\n").into_bytes()
}

/// Splits a netpbm header into its four fields and the raster that follows.
/// Comments run from `#` to the end of the line.
fn parse_header<'a>(bytes: &'a [u8], magic: &str) -> Result<(usize, usize, &'a [u8])> {
    let corrupt = |msg: String| Error::FormatCorrupt(msg);
    if !bytes.starts_with(magic.as_bytes()) {
        return Err(corrupt(format!("expected {magic} magic")));
    }
    let mut pos = magic.len();
    let mut fields = [0usize; 3];
    for field in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        let digits = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *field = digits.parse().map_err(|_| corrupt(format!("bad header field {digits:?}")))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(corrupt("header must end in a single whitespace byte".into()));
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(corrupt(format!("zero image dimension {width}x{height}")));
    }
    if maxval != 255 {
        return Err(corrupt(format!("maxval {maxval}, only 255 is supported")));
    }
    Ok((width, height, &bytes[pos + 1..]))
}

fn expect_len(raster: &[u8], want: Option<usize>) -> Result<()> {
    match want {
        Some(n) if n == raster.len() => Ok(()),
        Some(n) => Err(Error::FormatCorrupt(format!("raster holds {} bytes, header promises {n}", raster.len()))),
        None => Err(Error::FormatCorrupt("image dimensions overflow".into())),
    }
}

pub fn encode_ppm(image: &RgbImage) -> Vec<u8> {
    let mut out = header("P6", image.width(), image.height());
    out.extend_from_slice(image.pixels());
    out
}

pub fn decode_ppm(bytes: &[u8]) -> Result<RgbImage> {
    let (w, h, raster) = parse_header(bytes, "P6")?;
    expect_len(raster, w.checked_mul(h).and_then(|n| n.checked_mul(3)))?;
    Ok(RgbImage::new(w, h, raster.to_vec())?)
}

pub fn encode_pgm(mask: &LabelMask) -> Vec<u8> {
    let mut out = header("P5", mask.width(), mask.height());
    out.extend(mask.regions().iter().map(|r| match r {
        Region::Cup => CUP,
        Region::Rim => RIM,
        Region::Background => BACKGROUND,
    }));
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<LabelMask> {
    let (w, h, raster) = parse_header(bytes, "P5")?;
    expect_len(raster, w.checked_mul(h))?;
    let regions = raster
        .iter()
        .map(|&v| match v {
            CUP => Ok(Region::Cup),
            RIM => Ok(Region::Rim),
            BACKGROUND => Ok(Region::Background),
            other => Err(Error::FormatCorrupt(format!("mask value {other} is not 0, 128 or 255"))),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LabelMask::new(w, h, regions)?)
}

pub fn read_ppm(path: &Path) -> Result<RgbImage> {
    decode_ppm(&fs::read(path).map_err(Error::io(path))?).map_err(|e| e.in_file(path))
}

pub fn write_ppm(image: &RgbImage, path: &Path) -> Result<()> {
    fs::write(path, encode_ppm(image)).map_err(Error::io(path))
}

pub fn read_pgm(path: &Path) -> Result<LabelMask> {
    decode_pgm(&fs::read(path).map_err(Error::io(path))?).map_err(|e| e.in_file(path))
}

pub fn write_pgm(mask: &LabelMask, path: &Path) -> Result<()> {
    fs::write(path, encode_pgm(mask)).map_err(Error::io(path))
}
