//! Subcommands of the `fundus` binary.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::path::Path;

use clap::parser::ValueSource;
use clap::{Arg, ArgMatches, Command};
use fundus_core::data::{synth_generate, Sample};
use fundus_core::eval::{ClsReport, ClsRow, SegReport, SegRow};
use fundus_core::models::{build_classifier, build_xunet, Model};
use fundus_core::training::{train_classifier_observed, train_segmentation_observed, AdamState};

use crate::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::config::{RunConfig, Task, KEYS};
use crate::dataset::{create_dir, mask_path, read_dataset, read_masks, read_probs, write_csv, write_dataset, write_probs};
use crate::error::{Error, Result};
use crate::netpbm::write_pgm;
use crate::pipeline::{cls_items, predict_mask, predict_prob, seg_items};
use crate::report::{write_cls_report, write_seg_report};

const COMMANDS: [(&str, &str); 7] = [
    ("synth", "write a synthetic fundus dataset"),
    ("train-seg", "train an X-Unet on a dataset with masks"),
    ("train-cls", "train glaucoma classifiers on a labelled dataset"),
    ("predict-seg", "write predicted masks for every image of a dataset"),
    ("predict-cls", "write ensemble glaucoma probabilities for a dataset"),
    ("eval-seg", "score predicted masks against ground truth"),
    ("eval-cls", "score predicted probabilities against ground-truth labels"),
];

pub fn command() -> Command {
    let mut args = vec![Arg::new("config").long("config").value_name("PATH").help("key=value file read before flags")];
    args.extend(KEYS.iter().map(|k| Arg::new(k.name).long(k.name).value_name("VALUE").help(k.help)));
    Command::new("fundus")
        .about("Optic disc/cup segmentation and glaucoma classification pipeline")
        .subcommand_required(true)
        .subcommands(COMMANDS.iter().map(|(name, about)| Command::new(*name).about(*about).args(args.clone())))
}

fn resolve(m: &ArgMatches) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = m.get_one::<String>("config") {
        cfg.apply_file(Path::new(path))?;
    }
    for k in KEYS {
        if m.value_source(k.name) == Some(ValueSource::CommandLine) {
            cfg.set(k.name, m.get_one::<String>(k.name).expect("flag has a value"))?;
        }
    }
    Ok(cfg)
}

/// Creates the output directory and records the resolved configuration in it.
fn prepare_out(cfg: &RunConfig) -> Result<std::path::PathBuf> {
    let out = cfg.path("out")?;
    create_dir(&out)?;
    let path = out.join("config.txt");
    fs::write(&path, cfg.render()).map_err(Error::io(&path))?;
    Ok(out)
}

/// Parses `args` (program name first) and runs the chosen subcommand.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = command().try_get_matches_from(args).map_err(|e| {
        let text = e.to_string();
        Error::ConfigInvalid(text.lines().next().unwrap_or_default().trim_start_matches("error: ").to_string())
    })?;
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let mut cfg = resolve(sub)?;
    match name {
        "synth" => synth(&cfg),
        "train-seg" => {
            cfg.resolve(Task::Seg);
            train_seg(&cfg)
        }
        "train-cls" => {
            cfg.resolve(Task::Cls);
            train_cls(&cfg)
        }
        "predict-seg" => {
            cfg.resolve(Task::Seg);
            predict_seg(&cfg)
        }
        "predict-cls" => {
            cfg.resolve(Task::Cls);
            predict_cls(&cfg)
        }
        "eval-seg" => eval_seg(&cfg),
        "eval-cls" => eval_cls(&cfg),
        _ => unreachable!("clap only accepts known subcommands"),
    }
}

/// Runs the binary: help goes to stdout, any error is one line on stderr.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<T> = args.into_iter().collect();
    if let Err(e) = command().try_get_matches_from(args.clone()) {
        if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
            print!("{}", e.render());
            return if e.kind() == clap::error::ErrorKind::DisplayHelp { 0 } else { 2 };
        }
    }
    match run(args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("fundus: {}", e.to_string().replace('\n', " "));
            e.exit_code()
        }
    }
}

fn synth(cfg: &RunConfig) -> Result<()> {
    let params = cfg.synth_params()?;
    let count: usize = cfg.get("count")?;
    let samples = synth_generate(&params, count)?;
    let out = prepare_out(cfg)?;
    write_dataset(&out, &samples)?;
    let keys = [
        "seed",
        "count",
        "size",
        "disc_radius_min",
        "disc_radius_max",
        "cdr_min",
        "cdr_max",
        "jitter",
        "noise",
        "glaucoma_threshold",
    ];
    let manifest: String = keys.iter().map(|k| format!("{k}={}\n", cfg.raw(k))).collect();
    let path = out.join("manifest.txt");
    fs::write(&path, manifest).map_err(Error::io(&path))
}

fn write_history(path: &Path, history: &[f64]) -> Result<()> {
    let rows: Vec<Vec<String>> = history.iter().enumerate().map(|(i, l)| vec![(i + 1).to_string(), l.to_string()]).collect();
    write_csv(path, &["epoch", "loss"], &rows)
}

fn progress(tag: String) -> impl FnMut(usize, f64) {
    move |epoch, loss| println!("{tag}epoch {} loss {loss:.6}", epoch + 1)
}

fn train_seg(cfg: &RunConfig) -> Result<()> {
    let train = cfg.train_config()?;
    let net = cfg.xunet_config()?;
    let lr = cfg.lr()?;
    let input = cfg.get("seg_input")?;
    let roi = cfg.roi(true, input)?;
    let samples = read_dataset(&cfg.path("data")?)?;
    if let Some(s) = samples.iter().find(|s| s.mask.is_none()) {
        return Err(Error::DatasetInvalid(format!("{} has no mask", s.id)));
    }
    let items = seg_items(&samples, roi, cfg.flag("augment")?)?;
    let out = prepare_out(cfg)?;
    let mut model = build_xunet(net, train.seed)?;
    let mut state = AdamState::new(lr);
    let history = train_segmentation_observed(&mut model, &items, &train, &mut state, &mut progress(String::new()))?;
    write_history(&out.join("loss.csv"), &history)?;
    save_checkpoint(&Checkpoint { model, optimizer: Some(state), input_sizes: vec![input] }, &out.join("model.ckpt"))
}

fn train_cls(cfg: &RunConfig) -> Result<()> {
    let train = cfg.train_config()?;
    let net = cfg.classifier_config()?;
    let lr = cfg.lr()?;
    let scales = cfg.scales()?;
    let augmented = cfg.flag("augment")?;
    let shared = cfg.flag("shared_weights")?;
    let samples = read_dataset(&cfg.path("data")?)?;
    let mut per_scale = Vec::with_capacity(scales.len());
    for &n in &scales {
        per_scale.push(cls_items(&samples, cfg.roi(true, n)?, augmented)?);
    }
    let out = prepare_out(cfg)?;
    if shared {
        let items: Vec<_> = per_scale.into_iter().flatten().collect();
        let mut model = build_classifier(net, train.seed)?;
        let mut state = AdamState::new(lr);
        let history = train_classifier_observed(&mut model, &items, &train, &mut state, &mut progress(String::new()))?;
        write_history(&out.join("loss.csv"), &history)?;
        return save_checkpoint(&Checkpoint { model, optimizer: Some(state), input_sizes: scales }, &out.join("model.ckpt"));
    }
    for (i, (&n, items)) in scales.iter().zip(&per_scale).enumerate() {
        let mut model = build_classifier(net.clone(), train.seed.wrapping_add(i as u64))?;
        let mut state = AdamState::new(lr);
        let history = train_classifier_observed(&mut model, items, &train, &mut state, &mut progress(format!("scale {n} ")))?;
        write_history(&out.join(format!("loss_{n}.csv")), &history)?;
        save_checkpoint(&Checkpoint { model, optimizer: Some(state), input_sizes: vec![n] }, &out.join(format!("model_{n}.ckpt")))?;
    }
    Ok(())
}

fn load_models(cfg: &RunConfig, want_xunet: bool) -> Result<Vec<(Model, Vec<usize>)>> {
    let mut models = Vec::new();
    for path in cfg.paths("checkpoint")? {
        let ck = load_checkpoint(&path)?;
        if ck.model.is_xunet() != want_xunet {
            let kind = if want_xunet { "an X-Unet" } else { "a classifier" };
            return Err(Error::ConfigInvalid(format!("{} does not hold {kind}", path.display())));
        }
        if ck.input_sizes.is_empty() {
            return Err(Error::FormatCorrupt(format!("{} records no input size", path.display())));
        }
        models.push((ck.model, ck.input_sizes));
    }
    Ok(models)
}

fn predict_seg(cfg: &RunConfig) -> Result<()> {
    let mut models = load_models(cfg, true)?;
    if models.len() != 1 {
        return Err(Error::ConfigInvalid("predict-seg takes exactly one checkpoint".into()));
    }
    let (model, sizes) = &mut models[0];
    let roi = cfg.roi(false, sizes[0])?;
    let (t_cup, t_disc) = (cfg.get("t_cup")?, cfg.get("t_disc")?);
    let samples = read_dataset(&cfg.path("data")?)?;
    let out = prepare_out(cfg)?;
    create_dir(&out.join("masks"))?;
    for s in &samples {
        write_pgm(&predict_mask(model, s, roi, t_cup, t_disc)?, &mask_path(&out, &s.id))?;
    }
    Ok(())
}

fn predict_cls(cfg: &RunConfig) -> Result<()> {
    let mut models = load_models(cfg, false)?;
    let (window, crop) = (cfg.get("locate_window")?, cfg.get("crop_eval")?);
    let samples = read_dataset(&cfg.path("data")?)?;
    let out = prepare_out(cfg)?;
    let probs = samples
        .iter()
        .map(|s| Ok((s.id.clone(), predict_prob(&mut models, s, window, crop)?)))
        .collect::<Result<Vec<_>>>()?;
    write_probs(&out, &probs)
}

/// Fails unless `predicted` covers exactly the ids of `truth`.
fn match_ids<'a>(truth: &[Sample], predicted: impl Iterator<Item = &'a String>) -> Result<()> {
    let predicted: BTreeSet<&String> = predicted.collect();
    if let Some(s) = truth.iter().find(|s| !predicted.contains(&s.id)) {
        return Err(Error::IdMismatch(format!("no prediction for {}", s.id)));
    }
    let known: BTreeSet<&String> = truth.iter().map(|s| &s.id).collect();
    if let Some(extra) = predicted.iter().find(|id| !known.contains(*id)) {
        return Err(Error::IdMismatch(format!("prediction {extra} has no ground truth")));
    }
    Ok(())
}

fn eval_seg(cfg: &RunConfig) -> Result<()> {
    let truth = read_dataset(&cfg.path("truth")?)?;
    let pred = read_masks(&cfg.path("pred")?)?;
    match_ids(&truth, pred.keys())?;
    let mut rows = Vec::with_capacity(truth.len());
    for s in &truth {
        let mask = s.mask.as_ref().ok_or_else(|| Error::DatasetInvalid(format!("ground truth {} has no mask", s.id)))?;
        rows.push(SegRow::score(&s.id, &pred[&s.id], mask, None)?);
    }
    let report = SegReport::new(rows)?;
    let out = prepare_out(cfg)?;
    write_seg_report(&out, &report)
}

fn eval_cls(cfg: &RunConfig) -> Result<()> {
    let threshold: f64 = cfg.get("threshold")?;
    let truth = read_dataset(&cfg.path("truth")?)?;
    let probs = read_probs(&cfg.path("pred")?)?;
    match_ids(&truth, probs.keys())?;
    let rows = truth
        .iter()
        .map(|s| {
            let label = s.glaucoma_label.ok_or_else(|| Error::DatasetInvalid(format!("ground truth {} has no label", s.id)))?;
            Ok(ClsRow { id: s.id.clone(), prob: probs[&s.id], label })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = ClsReport::new(rows, threshold)?;
    let out = prepare_out(cfg)?;
    write_cls_report(&out, &report)
}
