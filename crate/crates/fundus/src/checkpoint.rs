//! Checkpoint files: a flat list of named f64 tensors.
//!
//! ```text
//! "RFGC"  u32 version  u64 count
//! count × { u32 name_len, name (UTF-8), u32 rank, rank × u64 dim, f64 values }
//! ```
//!
//! All integers and floats are little-endian. Model weights and the `arch/`
//! record come from [`Model::to_tensors`], optimizer state sits under `opt/`
//! and pipeline settings under `meta/`.

use std::fs;
use std::path::Path;

use fundus_core::models::Model;
use fundus_core::training::AdamState;
use fundus_core::Tensor;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"RFGC";
pub const VERSION: u32 = 1;
const INPUT_SIZES: &str = "meta/input_sizes";

pub fn encode_tensors(tensors: &[(String, Tensor)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u64).to_le_bytes());
    for (name, t) in tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::FormatCorrupt(format!("truncated while reading {what} at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

pub fn decode_tensors(bytes: &[u8]) -> Result<Vec<(String, Tensor)>> {
    let corrupt = |msg: String| Error::FormatCorrupt(msg);
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic").ok() != Some(&MAGIC[..]) {
        return Err(corrupt("bad magic, not a checkpoint".into()));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(corrupt(format!("unsupported checkpoint version {version}")));
    }
    let count = r.u64("tensor count")?;
    let mut out = Vec::new();
    for i in 0..count {
        let name_len = r.u32("name length")? as usize;
        let name = std::str::from_utf8(r.take(name_len, "tensor name")?)
            .map_err(|_| corrupt(format!("tensor {i} name is not UTF-8")))?
            .to_string();
        let rank = r.u32("rank")? as usize;
        if rank > r.remaining() / 8 {
            return Err(corrupt(format!("{name}: rank {rank} runs past the end of the file")));
        }
        let shape = (0..rank)
            .map(|_| r.u64("dimension").map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let len = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        let Some(len) = len.filter(|&n| n <= r.remaining() / 8) else {
            return Err(corrupt(format!("{name}: payload {shape:?} truncated")));
        };
        let data = r.take(8 * len, "payload")?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        let tensor = Tensor::new(&shape, data).map_err(|e| corrupt(format!("{name}: {e}")))?;
        out.push((name, tensor));
    }
    if r.remaining() != 0 {
        return Err(corrupt(format!("{} trailing bytes after the last tensor", r.remaining())));
    }
    Ok(out)
}

/// A trained network, its optimizer state and the square input sizes it was
/// trained at.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: Model,
    pub optimizer: Option<AdamState>,
    pub input_sizes: Vec<usize>,
}

impl Checkpoint {
    pub fn to_tensors(&self) -> Vec<(String, Tensor)> {
        let mut out = self.model.to_tensors();
        if let Some(opt) = &self.optimizer {
            out.extend(opt.to_tensors());
        }
        if !self.input_sizes.is_empty() {
            let sizes = self.input_sizes.iter().map(|&s| s as f64).collect();
            out.push((INPUT_SIZES.to_string(), Tensor::new(&[self.input_sizes.len()], sizes).expect("one value per size")));
        }
        out
    }

    pub fn from_tensors(tensors: &[(String, Tensor)]) -> Result<Checkpoint> {
        let corrupt = |e: fundus_core::Error| Error::FormatCorrupt(e.to_string());
        let model = Model::from_tensors(tensors).map_err(corrupt)?;
        let optimizer = AdamState::from_tensors(tensors).map_err(corrupt)?;
        let input_sizes = match tensors.iter().find(|(n, _)| n == INPUT_SIZES) {
            None => Vec::new(),
            Some((_, t)) => t
                .data()
                .iter()
                .map(|&v| {
                    if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                        Ok(v as usize)
                    } else {
                        Err(Error::FormatCorrupt(format!("{INPUT_SIZES} holds {v}")))
                    }
                })
                .collect::<Result<_>>()?,
        };
        Ok(Checkpoint { model, optimizer, input_sizes })
    }
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<()> {
    fs::write(path, encode_tensors(&checkpoint.to_tensors())).map_err(Error::io(path))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(Error::io(path))?;
    decode_tensors(&bytes).and_then(|t| Checkpoint::from_tensors(&t)).map_err(|e| e.in_file(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_tensors() -> Vec<(String, Tensor)> {
        vec![
            ("a".into(), Tensor::new(&[2, 1], vec![1.5, -0.0]).unwrap()),
            ("grüße/b".into(), Tensor::new(&[1], vec![f64::MIN_POSITIVE]).unwrap()),
        ]
    }

    #[test]
    fn layout_is_little_endian() {
        let bytes = encode_tensors(&sample_tensors()[..1]);
        let mut want = b"RFGC".to_vec();
        want.extend([1, 0, 0, 0]);
        want.extend([1, 0, 0, 0, 0, 0, 0, 0]);
        want.extend([1, 0, 0, 0, b'a']);
        want.extend([2, 0, 0, 0]);
        want.extend([2, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0]);
        want.extend(1.5f64.to_le_bytes());
        want.extend((-0.0f64).to_le_bytes());
        assert_eq!(bytes, want);
    }

    #[test]
    fn tensors_round_trip_bit_exact() {
        let t = sample_tensors();
        let back = decode_tensors(&encode_tensors(&t)).unwrap();
        assert_eq!(back.len(), 2);
        for ((n0, t0), (n1, t1)) in t.iter().zip(&back) {
            assert_eq!(n0, n1);
            assert_eq!(t0.shape(), t1.shape());
            let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(t0), bits(t1));
        }
    }

    #[test]
    fn every_truncation_is_detected() {
        let bytes = encode_tensors(&sample_tensors());
        for cut in 0..bytes.len() {
            assert!(matches!(decode_tensors(&bytes[..cut]), Err(Error::FormatCorrupt(_))), "cut at {cut}");
        }
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(decode_tensors(&long), Err(Error::FormatCorrupt(_))));
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = encode_tensors(&sample_tensors());
        bytes[0] = b'X';
        assert!(matches!(decode_tensors(&bytes), Err(Error::FormatCorrupt(m)) if m.contains("magic")));
        bytes[0] = b'R';
        bytes[4] = 9;
        assert!(matches!(decode_tensors(&bytes), Err(Error::FormatCorrupt(m)) if m.contains("version")));
    }

    #[test]
    fn huge_declared_sizes_do_not_allocate() {
        let mut bytes = b"RFGC".to_vec();
        bytes.extend(1u32.to_le_bytes());
        bytes.extend(u64::MAX.to_le_bytes());
        bytes.extend(1u32.to_le_bytes());
        bytes.push(b'x');
        bytes.extend(2u32.to_le_bytes());
        bytes.extend(u64::MAX.to_le_bytes());
        bytes.extend(u64::MAX.to_le_bytes());
        assert!(matches!(decode_tensors(&bytes), Err(Error::FormatCorrupt(_))));
    }
}
