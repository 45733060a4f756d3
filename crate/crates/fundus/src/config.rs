//! Flat `key=value` run configuration. Values come from built-in defaults,
//! then an optional file (`#` starts a comment), then `--key value` flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fundus_core::blocks::AsppConfig;
use fundus_core::data::SynthParams;
use fundus_core::models::{ClassifierConfig, XUnetConfig};
use fundus_core::training::TrainConfig;

use crate::error::{Error, Result};
use crate::pipeline::Roi;

pub struct Key {
    pub name: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

macro_rules! keys {
    ($($name:literal = $default:literal : $help:literal,)*) => {
        pub const KEYS: &[Key] = &[$(Key { name: $name, default: $default, help: $help },)*];
    };
}

keys! {
    "seed" = "0": "master seed for data generation, initialization and shuffling",
    "out" = "": "output directory",
    "data" = "": "input dataset directory",
    "pred" = "": "prediction directory to evaluate",
    "truth" = "": "ground-truth dataset directory",
    "checkpoint" = "": "checkpoint file(s), comma separated",
    "count" = "80": "number of synthetic samples",
    "size" = "256": "synthetic image side in pixels",
    "disc_radius_min" = "0.13": "smallest vertical disc semi-axis, fraction of the image side",
    "disc_radius_max" = "0.18": "largest vertical disc semi-axis, fraction of the image side",
    "cdr_min" = "0.2": "smallest synthetic cup-to-disc ratio",
    "cdr_max" = "0.9": "largest synthetic cup-to-disc ratio",
    "jitter" = "0.1": "disc centre offset range, fraction of the image side",
    "noise" = "0.03": "uniform pixel noise amplitude",
    "glaucoma_threshold" = "0.6": "cup-to-disc ratio above which a synthetic sample is glaucomatous",
    "locate_window" = "15": "box-blur window of the disc localizer",
    "crop_train" = "": "training crop side (default 120 for seg, 200 for cls)",
    "crop_eval" = "": "prediction crop side (default 100 for seg, 160 for cls)",
    "seg_input" = "64": "X-Unet input side",
    "scales" = "48,64,80": "classifier input sides",
    "shared_weights" = "false": "train one classifier on all scales instead of one per scale",
    "augment" = "true": "add the seven rotated and flipped copies of every training crop",
    "depth" = "3": "X-Unet encoder levels",
    "base_channels" = "16": "X-Unet channels at the first level",
    "input_levels" = "3": "X-Unet pyramid inputs",
    "se_reduction" = "8": "squeeze-and-excitation reduction ratio",
    "block_depth" = "1": "convolutions per X-Unet stage",
    "stem_strides" = "2,2": "classifier stem strides",
    "stem_width" = "16": "classifier stem channels",
    "body_rates" = "1,2,4": "classifier body dilation rates",
    "body_width" = "16": "classifier body channels",
    "aspp_rates" = "1,2,4": "ASPP dilation rates",
    "aspp_width" = "16": "ASPP branch channels",
    "image_pool" = "true": "ASPP image-pooling branch",
    "head_width" = "0": "hidden units before the classifier logit, 0 for none",
    "epochs" = "200": "training epochs",
    "batch_size" = "8": "mini-batch size",
    "lr" = "0.0001": "Adam learning rate",
    "shuffle" = "true": "shuffle the training order every epoch",
    "t_cup" = "0.25": "regression values below this decode to cup",
    "t_disc" = "0.75": "regression values below this (and not cup) decode to rim",
    "threshold" = "0.5": "decision threshold for sensitivity and specificity",
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Seg,
    Cls,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<&'static str, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { values: KEYS.iter().map(|k| (k.name, k.default.to_string())).collect() }
    }
}

fn key(name: &str) -> Result<&'static str> {
    KEYS.iter()
        .find(|k| k.name == name)
        .map(|k| k.name)
        .ok_or_else(|| Error::ConfigInvalid(format!("unknown key `{name}`")))
}

impl RunConfig {
    pub fn set(&mut self, name: &str, value: &str) -> Result<()> {
        self.values.insert(key(name)?, value.trim().to_string());
        Ok(())
    }

    /// Applies `key=value` lines. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::ConfigInvalid(format!("{origin}:{}: expected key=value", i + 1)))?;
            self.set(k.trim(), v).map_err(|e| match e {
                Error::ConfigInvalid(msg) => Error::ConfigInvalid(format!("{origin}:{}: {msg}", i + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(Error::io(path))?;
        self.apply_text(&text, &path.display().to_string())
    }

    pub fn raw(&self, name: &str) -> &str {
        self.values.get(name).map(String::as_str).unwrap_or_else(|| panic!("`{name}` is not a configuration key"))
    }

    pub fn get<T: FromStr>(&self, name: &str) -> Result<T> {
        let text = self.raw(name);
        text.parse().map_err(|_| Error::ConfigInvalid(format!("{name}={text} does not parse")))
    }

    pub fn flag(&self, name: &str) -> Result<bool> {
        match self.raw(name) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => Err(Error::ConfigInvalid(format!("{name}={other} is not a boolean"))),
        }
    }

    pub fn list<T: FromStr>(&self, name: &str) -> Result<Vec<T>> {
        let text = self.raw(name);
        if text.is_empty() {
            return Ok(Vec::new());
        }
        text.split(',')
            .map(|s| s.trim().parse().map_err(|_| Error::ConfigInvalid(format!("{name}={text} does not parse"))))
            .collect()
    }

    /// A path-valued key that the current command cannot do without.
    pub fn path(&self, name: &str) -> Result<PathBuf> {
        match self.raw(name) {
            "" => Err(Error::ConfigInvalid(format!("--{name} is required"))),
            p => Ok(PathBuf::from(p)),
        }
    }

    pub fn paths(&self, name: &str) -> Result<Vec<PathBuf>> {
        let list: Vec<String> = self.list(name)?;
        if list.is_empty() {
            return Err(Error::ConfigInvalid(format!("--{name} is required")));
        }
        Ok(list.into_iter().map(PathBuf::from).collect())
    }

    /// Fills the crop sizes left unset with the defaults of `task`.
    pub fn resolve(&mut self, task: Task) {
        let (train, eval) = match task {
            Task::Seg => ("120", "100"),
            Task::Cls => ("200", "160"),
        };
        for (k, v) in [("crop_train", train), ("crop_eval", eval)] {
            if self.values[k].is_empty() {
                self.values.insert(k, v.to_string());
            }
        }
    }

    /// Every key except `out` in `key=value` form, sorted by key. Runs that
    /// differ only in their output directory render identically.
    pub fn render(&self) -> String {
        self.values.iter().filter(|(k, _)| **k != "out").map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn synth_params(&self) -> Result<SynthParams> {
        let p = SynthParams {
            size: self.get("size")?,
            disc_radius: (self.get("disc_radius_min")?, self.get("disc_radius_max")?),
            cdr_range: (self.get("cdr_min")?, self.get("cdr_max")?),
            jitter: self.get("jitter")?,
            noise: self.get("noise")?,
            glaucoma_threshold: self.get("glaucoma_threshold")?,
            seed: self.get("seed")?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn xunet_config(&self) -> Result<XUnetConfig> {
        let c = XUnetConfig {
            depth: self.get("depth")?,
            base_channels: self.get("base_channels")?,
            input_levels: self.get("input_levels")?,
            se_reduction: self.get("se_reduction")?,
            block_depth: self.get("block_depth")?,
            in_channels: 3,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn classifier_config(&self) -> Result<ClassifierConfig> {
        let body_width = self.get("body_width")?;
        let c = ClassifierConfig {
            in_channels: 3,
            stem_strides: self.list("stem_strides")?,
            stem_width: self.get("stem_width")?,
            body_rates: self.list("body_rates")?,
            body_width,
            aspp: AsppConfig {
                in_channels: body_width,
                branch_channels: self.get("aspp_width")?,
                rates: self.list("aspp_rates")?,
                include_image_pool: self.flag("image_pool")?,
            },
            head_width: self.get("head_width")?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let c = TrainConfig {
            epochs: self.get("epochs")?,
            batch_size: self.get("batch_size")?,
            seed: self.get("seed")?,
            shuffle: self.flag("shuffle")?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn lr(&self) -> Result<f64> {
        let lr: f64 = self.get("lr")?;
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(Error::ConfigInvalid(format!("lr={lr} must be finite and non-negative")));
        }
        Ok(lr)
    }

    /// Crop geometry for training (`train = true`) or prediction at one input side.
    pub fn roi(&self, train: bool, input: usize) -> Result<Roi> {
        let crop = self.get(if train { "crop_train" } else { "crop_eval" })?;
        let window: usize = self.get("locate_window")?;
        if crop == 0 || input == 0 || window == 0 {
            return Err(Error::ConfigInvalid("crop, input and locate window sizes must be positive".into()));
        }
        Ok(Roi { window, crop, input })
    }

    pub fn scales(&self) -> Result<Vec<usize>> {
        let s: Vec<usize> = self.list("scales")?;
        if s.is_empty() || s.contains(&0) {
            return Err(Error::ConfigInvalid(format!("scales={} must list positive sizes", self.raw("scales"))));
        }
        Ok(s)
    }
}
