//! Dataset directories:
//!
//! ```text
//! images/<id>.ppm
//! masks/<id>.pgm      (optional per sample)
//! labels.csv          id,glaucoma,cdr   (empty field when unknown)
//! ```
//!
//! Prediction directories reuse `masks/` for segmentation and hold a
//! `probs.csv` (`id,prob`) for classification.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use fundus_core::data::{LabelMask, Sample};

use crate::error::{Error, Result};
use crate::netpbm::{read_pgm, read_ppm, write_pgm, write_ppm};

pub const LABELS: &str = "labels.csv";
pub const PROBS: &str = "probs.csv";

pub fn image_path(dir: &Path, id: &str) -> PathBuf {
    dir.join("images").join(format!("{id}.ppm"))
}

pub fn mask_path(dir: &Path, id: &str) -> PathBuf {
    dir.join("masks").join(format!("{id}.pgm"))
}

pub(crate) fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(Error::io(path))
}

fn check_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id != "aggregate"
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || "._-".contains(c));
    if ok {
        Ok(())
    } else {
        Err(Error::DatasetInvalid(format!("sample id {id:?} is not a plain file name")))
    }
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::IoFailure { path: path.to_path_buf(), source },
        kind => Error::FormatCorrupt(format!("{}: {kind:?}", path.display())),
    }
}

/// Rows of a CSV file with a fixed header; every row must have as many fields.
pub(crate) fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<Vec<String>>> {
    let mut reader = csv::ReaderBuilder::new().from_path(path).map_err(csv_error(path))?;
    let found: Vec<String> = reader.headers().map_err(csv_error(path))?.iter().map(str::to_string).collect();
    if found != header {
        return Err(Error::FormatCorrupt(format!("{}: header {found:?}, expected {header:?}", path.display())));
    }
    reader
        .records()
        .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()).map_err(csv_error(path)))
        .collect()
}

pub(crate) fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error(path))?;
    w.write_record(header).map_err(csv_error(path))?;
    for row in rows {
        w.write_record(row).map_err(csv_error(path))?;
    }
    w.flush().map_err(Error::io(path))
}

fn parse_field<T: std::str::FromStr>(path: &Path, id: &str, column: &str, text: &str) -> Result<Option<T>> {
    if text.is_empty() {
        return Ok(None);
    }
    text.parse()
        .map(Some)
        .map_err(|_| Error::DatasetInvalid(format!("{}: {column} {text:?} for {id} does not parse", path.display())))
}

/// Writes `samples` in the directory layout above, creating directories as needed.
pub fn write_dataset(dir: &Path, samples: &[Sample]) -> Result<()> {
    create_dir(&dir.join("images"))?;
    if samples.iter().any(|s| s.mask.is_some()) {
        create_dir(&dir.join("masks"))?;
    }
    let mut rows = Vec::with_capacity(samples.len());
    for s in samples {
        check_id(&s.id)?;
        write_ppm(&s.image, &image_path(dir, &s.id))?;
        if let Some(m) = &s.mask {
            write_pgm(m, &mask_path(dir, &s.id))?;
        }
        let opt = |v: Option<String>| v.unwrap_or_default();
        rows.push(vec![s.id.clone(), opt(s.glaucoma_label.map(|l| l.to_string())), opt(s.true_cdr.map(|c| c.to_string()))]);
    }
    write_csv(&dir.join(LABELS), &["id", "glaucoma", "cdr"], &rows)
}

/// Samples in `labels.csv` order. A mask is attached when its file exists.
pub fn read_dataset(dir: &Path) -> Result<Vec<Sample>> {
    let labels = dir.join(LABELS);
    if !labels.is_file() {
        return Err(Error::DatasetInvalid(format!("{} is missing", labels.display())));
    }
    let mut seen = BTreeSet::new();
    let mut samples = Vec::new();
    for row in read_csv(&labels, &["id", "glaucoma", "cdr"])? {
        let id = row[0].clone();
        check_id(&id)?;
        if !seen.insert(id.clone()) {
            return Err(Error::DatasetInvalid(format!("duplicate id {id} in {}", labels.display())));
        }
        let glaucoma_label: Option<u8> = parse_field(&labels, &id, "glaucoma", &row[1])?;
        if glaucoma_label.is_some_and(|l| l > 1) {
            return Err(Error::DatasetInvalid(format!("glaucoma label for {id} must be 0 or 1")));
        }
        let true_cdr = parse_field(&labels, &id, "cdr", &row[2])?;
        let image_file = image_path(dir, &id);
        if !image_file.is_file() {
            return Err(Error::DatasetInvalid(format!("{} is missing", image_file.display())));
        }
        let image = read_ppm(&image_file)?;
        let mask_file = mask_path(dir, &id);
        let mask = if mask_file.is_file() { Some(read_pgm(&mask_file)?) } else { None };
        if let Some(m) = &mask {
            if (m.width(), m.height()) != (image.width(), image.height()) {
                return Err(Error::DatasetInvalid(format!(
                    "mask of {id} is {}x{} but its image is {}x{}",
                    m.width(),
                    m.height(),
                    image.width(),
                    image.height()
                )));
            }
        }
        samples.push(Sample { id, image, mask, glaucoma_label, true_cdr });
    }
    if samples.is_empty() {
        return Err(Error::DatasetInvalid(format!("{} lists no samples", labels.display())));
    }
    Ok(samples)
}

/// Every `masks/<id>.pgm` under `dir`, keyed by id.
pub fn read_masks(dir: &Path) -> Result<BTreeMap<String, LabelMask>> {
    let masks = dir.join("masks");
    if !masks.is_dir() {
        return Err(Error::DatasetInvalid(format!("{} is missing", masks.display())));
    }
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(&masks).map_err(Error::io(&masks))? {
        let path = entry.map_err(Error::io(&masks))?.path();
        if path.extension().is_some_and(|e| e == "pgm") {
            let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            out.insert(id, read_pgm(&path)?);
        }
    }
    Ok(out)
}

pub fn write_probs(dir: &Path, probs: &[(String, f64)]) -> Result<()> {
    let rows: Vec<Vec<String>> = probs.iter().map(|(id, p)| vec![id.clone(), p.to_string()]).collect();
    write_csv(&dir.join(PROBS), &["id", "prob"], &rows)
}

pub fn read_probs(dir: &Path) -> Result<BTreeMap<String, f64>> {
    let path = dir.join(PROBS);
    if !path.is_file() {
        return Err(Error::DatasetInvalid(format!("{} is missing", path.display())));
    }
    let mut out = BTreeMap::new();
    for row in read_csv(&path, &["id", "prob"])? {
        let p: f64 = parse_field(&path, &row[0], "prob", &row[1])?
            .ok_or_else(|| Error::DatasetInvalid(format!("{}: empty prob for {}", path.display(), row[0])))?;
        if out.insert(row[0].clone(), p).is_some() {
            return Err(Error::DatasetInvalid(format!("duplicate id {} in {}", row[0], path.display())));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_must_be_plain_names() {
        for bad in ["", "../x", "a/b", ".hidden", "aggregate", "sp ace"] {
            assert!(check_id(bad).is_err(), "{bad}");
        }
        for good in ["synth0001", "img_3.rot90", "A-1"] {
            check_id(good).unwrap();
        }
    }
}
