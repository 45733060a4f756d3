//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Extra arguments filter criteria by name.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use fundus::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use fundus::dataset::{read_dataset, write_dataset};
use fundus::netpbm::{decode_pgm, decode_ppm, encode_pgm, encode_ppm};
use fundus::pipeline::{cls_items, predict_mask, predict_prob, seg_items, Roi};
use fundus::report::write_seg_report;
use fundus_core::blocks::{Aspp, AsppConfig, ConvBlock, SeBlock, SeConfig};
use fundus_core::data::{
    augment, decode_prediction, encode_label, expand_dataset, locate_disc, synth_generate, synth_sample, Dihedral, LabelMask, Region,
    Sample, SynthParams, DEFAULT_T_CUP, DEFAULT_T_DISC,
};
use fundus_core::eval::{dice, roc_auc, vertical_cdr, SegReport, SegRow};
use fundus_core::gradcheck::grad_check;
use fundus_core::layer::{Act, Conv2d, ConvTranspose2d, Dense, GlobalAvgPool, Pool2d};
use fundus_core::models::{build_classifier, build_xunet, Classifier, ClassifierConfig, XUnet, XUnetConfig};
use fundus_core::ops::{conv2d, conv2d_transpose, ConvSpec, PoolKind};
use fundus_core::rng::Rng;
use fundus_core::training::{adam_step, bce_loss, mae_loss, train_classifier, train_segmentation, AdamState, TrainConfig};
use fundus_core::{Layer, Tensor};

type Outcome = Result<String, String>;

const WINDOW: usize = 15;

fn random(rng: &mut Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap()
}

fn unit_image(side: usize, seed: u64) -> Tensor {
    let mut rng = Rng::new(seed);
    Tensor::new(&[1, 3, side, side], (0..3 * side * side).map(|_| rng.next_f64()).collect()).unwrap()
}

fn pick(rng: &mut Rng, lo: usize, hi: usize) -> usize {
    lo + (rng.next_u64() % (hi - lo + 1) as u64) as usize
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn published_numbers() -> Outcome {
    Ok("REFUGE validation figures (cup Dice 0.8498, disc Dice 0.9433, MAE-CDR 0.0444, AUC 0.9708) are not reproducible: \
        the challenge data is not distributable, so synthetic and property criteria stand in"
        .into())
}

#[derive(Default)]
struct Worst {
    groups: BTreeMap<&'static str, (f64, f64)>,
}

impl Worst {
    fn check(&mut self, group: &'static str, layer: &mut dyn Layer, x: &Tensor) {
        let r = grad_check(layer, x, 1e-5).unwrap();
        assert!(r.checked > 0, "{group}: nothing checked");
        let e = self.groups.entry(group).or_default();
        e.0 = e.0.max(r.max_rel_error);
        e.1 = e.1.max(r.max_abs_error);
    }
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = Rng::new(2024);
    let mut w = Worst::default();
    for i in 0..6 {
        let (cin, cout, k) = (pick(&mut rng, 1, 3), pick(&mut rng, 1, 3), pick(&mut rng, 1, 3));
        let d = if i < 3 { 2 } else { 1 };
        let spec = ConvSpec::new(cin, cout, k).with_dilation(d).with_stride(pick(&mut rng, 1, 2)).with_padding(pick(&mut rng, 0, 2));
        let mut conv = Conv2d::new(spec, &mut rng);
        conv.bias = random(&mut rng, &[cout]);
        let side = d * (k - 1) + pick(&mut rng, 1, 4);
        let x = random(&mut rng, &[1, cin, side, side + 1]);
        w.check("conv2d", &mut conv, &x);

        let mut tr = ConvTranspose2d::new(cin, cout, k, pick(&mut rng, 1, 2), &mut rng);
        tr.bias = random(&mut rng, &[cout]);
        let x = random(&mut rng, &[1, cin, 3, 4]);
        w.check("conv2d_transpose", &mut tr, &x);

        let x = random(&mut rng, &[1, 2, 5, 4]);
        w.check("max_pool", &mut Pool2d::new(PoolKind::Max, 2, pick(&mut rng, 1, 2)), &x);
        w.check("avg_pool", &mut Pool2d::new(PoolKind::Avg, 2, pick(&mut rng, 1, 2)), &x);
        w.check("global_avg_pool", &mut GlobalAvgPool::new(), &x);

        let mut dense = Dense::new(4, 3, &mut rng);
        dense.bias = random(&mut rng, &[3]);
        w.check("dense", &mut dense, &random(&mut rng, &[2, 4]));

        let away = random(&mut rng, &[1, 2, 3, 3]).map(|v| v.signum() * (0.1 + 0.9 * v.abs()));
        w.check("relu", &mut Act::relu(), &away);
        w.check("sigmoid", &mut Act::sigmoid(), &random(&mut rng, &[1, 2, 3, 3]).map(|v| 4.0 * v));

        let x = random(&mut rng, &[1, 4, 4, 4]);
        w.check("se_block", &mut SeBlock::new(SeConfig::new(4, 2), &mut rng).unwrap(), &x);
        w.check("conv_block", &mut ConvBlock::new(4, 3, 2, 1, &mut rng).unwrap(), &x);
        let cfg = AsppConfig { in_channels: 4, branch_channels: 2, rates: vec![1, 2], include_image_pool: true };
        w.check("aspp", &mut Aspp::new(cfg, &mut rng).unwrap(), &x);
    }
    let tiny_cls = ClassifierConfig {
        in_channels: 3,
        stem_strides: vec![2],
        stem_width: 3,
        body_rates: vec![1, 2],
        body_width: 3,
        aspp: AsppConfig { in_channels: 3, branch_channels: 2, rates: vec![1, 2], include_image_pool: true },
        head_width: 3,
    };
    w.check("classifier", &mut Classifier::new(tiny_cls, 8).unwrap(), &unit_image(8, 9));
    let tiny_unet = XUnetConfig { depth: 2, base_channels: 2, input_levels: 2, se_reduction: 2, block_depth: 1, in_channels: 3 };
    w.check("x_unet", &mut XUnet::new(tiny_unet, 11).unwrap(), &unit_image(16, 12));

    let elapsed = start.elapsed();
    let failing: Vec<String> =
        w.groups.iter().filter(|(_, e)| e.0 >= 1e-6).map(|(g, e)| format!("{g} rel {:.1e} abs {:.1e}", e.0, e.1)).collect();
    let worst_passing = w.groups.iter().filter(|(_, e)| e.0 < 1e-6).map(|(_, e)| e.0).fold(0.0, f64::max);
    let detail = format!(
        "{} groups, worst passing rel {worst_passing:.1e}, over 1e-6: [{}], {:.0?}",
        w.groups.len(),
        failing.join(", "),
        elapsed
    );
    verdict(failing.is_empty() && elapsed < Duration::from_secs(120), detail)
}

fn adjoint() -> Outcome {
    let mut rng = Rng::new(7);
    let mut worst = 0.0f64;
    let draws = 200;
    for _ in 0..draws {
        let (cin, cout, k, s) = (pick(&mut rng, 1, 4), pick(&mut rng, 1, 4), pick(&mut rng, 1, 4), pick(&mut rng, 1, 3));
        let p = pick(&mut rng, 0, (k - 1) / 2);
        // Input extents the strided transpose maps back onto exactly.
        let (ho, wo) = (pick(&mut rng, 1, 5), pick(&mut rng, 1, 5));
        let (h, w) = ((ho - 1) * s + k - 2 * p, (wo - 1) * s + k - 2 * p);
        let spec = ConvSpec::new(cin, cout, k).with_stride(s).with_padding(p);
        let shape = [pick(&mut rng, 1, 2), cin, h, w];
        let x = random(&mut rng, &shape);
        let wt = random(&mut rng, &spec.weight_shape());
        let ax = conv2d(&x, &wt, &Tensor::zeros(&[cout]), &spec).unwrap();
        let y = random(&mut rng, ax.shape());
        let aty = conv2d_transpose(&y, &wt, &Tensor::zeros(&[cin]), (s, s), (p, p)).unwrap();
        let (lhs, rhs) = (ax.dot(&y).unwrap(), x.dot(&aty).unwrap());
        worst = worst.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
    }
    verdict(worst <= 1e-10, format!("{draws} draws, worst |<Ax,y> - <x,A'y>| {worst:.1e}"))
}

fn split(seed: u64, train: usize, test: usize) -> (Vec<Sample>, Vec<Sample>) {
    let mut all = synth_generate(&SynthParams { seed, ..SynthParams::default() }, train + test).unwrap();
    let test = all.split_off(train);
    (all, test)
}

fn segmentation_convergence() -> Outcome {
    let start = Instant::now();
    let (train, test) = split(1, 64, 16);
    let items = seg_items(&train, Roi { window: WINDOW, crop: 120, input: 64 }, false).unwrap();
    let mut model = build_xunet(XUnetConfig::default(), 7).unwrap();
    let cfg = TrainConfig { epochs: 30, batch_size: 8, seed: 3, shuffle: true };
    let history = train_segmentation(&mut model, &items, &cfg, &mut AdamState::new(1e-3)).unwrap();
    let (first, last) = (history[0], history[history.len() - 1]);
    let roi = Roi { window: WINDOW, crop: 100, input: 64 };
    let rows = test
        .iter()
        .map(|s| {
            let pred = predict_mask(&mut model, s, roi, DEFAULT_T_CUP, DEFAULT_T_DISC).unwrap();
            SegRow::score(&s.id, &pred, s.mask.as_ref().unwrap(), None).unwrap()
        })
        .collect();
    let r = SegReport::new(rows).unwrap();
    let elapsed = start.elapsed();
    let ok = last <= 0.2 * first
        && r.mean_disc_dice >= 0.90
        && r.mean_cup_dice >= 0.80
        && r.mae_cdr <= 0.10
        && elapsed < Duration::from_secs(600);
    verdict(
        ok,
        format!(
            "{} epochs, loss {first:.4} -> {last:.4} ({:.3}x), disc {:.3}, cup {:.3}, MAE-CDR {:.4}, {:.0?}",
            history.len(),
            last / first,
            r.mean_disc_dice,
            r.mean_cup_dice,
            r.mae_cdr,
            elapsed
        ),
    )
}

fn classification() -> Outcome {
    let start = Instant::now();
    let (train, test) = split(2, 64, 32);
    let labels: Vec<u8> = test.iter().map(|s| s.glaucoma_label.unwrap()).collect();
    let mut models = Vec::new();
    let mut single = Vec::new();
    for (i, n) in [48, 64, 80].into_iter().enumerate() {
        let items = cls_items(&train, Roi { window: WINDOW, crop: 200, input: n }, false).unwrap();
        let mut model = build_classifier(ClassifierConfig::default(), 7 + i as u64).unwrap();
        let cfg = TrainConfig { epochs: 30, batch_size: 8, seed: 3 + i as u64, shuffle: true };
        train_classifier(&mut model, &items, &cfg, &mut AdamState::new(1e-3)).unwrap();
        let mut one = [(model, vec![n])];
        let probs: Vec<f64> = test.iter().map(|s| predict_prob(&mut one, s, WINDOW, 160).unwrap()).collect();
        single.push(roc_auc(&probs, &labels).unwrap());
        let [pair] = one;
        models.push(pair);
    }
    let probs: Vec<f64> = test.iter().map(|s| predict_prob(&mut models, s, WINDOW, 160).unwrap()).collect();
    let ensemble = roc_auc(&probs, &labels).unwrap();
    let mut sorted = single.clone();
    sorted.sort_by(f64::total_cmp);
    let best = sorted[2];
    let elapsed = start.elapsed();
    let ok = best >= 0.95 && ensemble >= sorted[1] && elapsed < Duration::from_secs(600);
    verdict(ok, format!("single-scale AUC 48/64/80 = {single:.3?}, ensemble {ensemble:.3}, {elapsed:.0?}"))
}

fn brute_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1.0;
                wins += if si > sj { 1.0 } else if si == sj { 0.5 } else { 0.0 };
            }
        }
    }
    wins / pairs
}

fn random_mask(rng: &mut Rng, w: usize, h: usize) -> LabelMask {
    let all = [Region::Cup, Region::Rim, Region::Background];
    LabelMask::new(w, h, (0..w * h).map(|_| all[(rng.next_u64() % 3) as usize]).collect()).unwrap()
}

fn metric_oracles() -> Outcome {
    let mut rng = Rng::new(99);
    let mut auc_err = 0.0f64;
    for i in 0..1000 {
        let n = pick(&mut rng, 2, 40);
        // Half the instances draw from a coarse grid so that ties occur.
        let scores: Vec<f64> =
            (0..n).map(|_| if i % 2 == 0 { rng.next_f64() } else { pick(&mut rng, 0, 4) as f64 }).collect();
        let mut labels: Vec<u8> = (0..n).map(|_| (rng.next_u64() % 2) as u8).collect();
        labels[0] = 0;
        labels[1] = 1;
        auc_err = auc_err.max((roc_auc(&scores, &labels).unwrap() - brute_auc(&scores, &labels)).abs());
    }
    let mut dice_mismatch = 0;
    for _ in 0..1000 {
        let n = pick(&mut rng, 0, 200);
        let a: Vec<bool> = (0..n).map(|_| rng.next_u64().is_multiple_of(2)).collect();
        let b: Vec<bool> = (0..n).map(|_| rng.next_u64().is_multiple_of(3)).collect();
        let inter = a.iter().zip(&b).filter(|(x, y)| **x && **y).count();
        let total = a.iter().filter(|x| **x).count() + b.iter().filter(|x| **x).count();
        let want = if total == 0 { 1.0 } else { 2.0 * inter as f64 / total as f64 };
        if dice(&a, &b).unwrap() != want {
            dice_mismatch += 1;
        }
    }
    let params = SynthParams { seed: 5, ..SynthParams::default() };
    let (mut cdr_fail, mut cdr_err, mut located) = (0, 0.0f64, 0);
    let samples = 200;
    for i in 0..samples {
        let (s, g) = synth_sample(&params, i).unwrap();
        let mask = s.mask.as_ref().unwrap();
        let disc_rows = (0..mask.height()).filter(|&y| (0..mask.width()).any(|x| mask.get(x, y).in_disc())).count();
        let err = (vertical_cdr(mask).unwrap() - g.cup_ry / g.disc_ry).abs();
        cdr_err = cdr_err.max(err);
        if err > 2.0 / disc_rows as f64 {
            cdr_fail += 1;
        }
        let (x, y) = locate_disc(&s.image, WINDOW);
        if (x as f64 - g.cx).hypot(y as f64 - g.cy) <= 0.1 * g.disc_ry {
            located += 1;
        }
    }
    let ok = auc_err <= 1e-12 && dice_mismatch == 0 && cdr_fail == 0 && located * 100 >= 95 * samples;
    verdict(
        ok,
        format!(
            "AUC vs pairs max err {auc_err:.1e} (1000), dice mismatches {dice_mismatch}/1000, \
             CDR outside 2/disc-height {cdr_fail}/{samples} (max err {cdr_err:.4}), disc located {located}/{samples}"
        ),
    )
}

fn adam_first_step(g: f64, lr: f64) -> f64 {
    let mut d = Dense::from_parts(Tensor::zeros(&[1, 1]), Tensor::zeros(&[1]));
    let mut grads = BTreeMap::new();
    grads.insert("weight".to_string(), Tensor::new(&[1, 1], vec![g]).unwrap());
    grads.insert("bias".to_string(), Tensor::zeros(&[1]));
    adam_step(&mut d, &grads, &mut AdamState::new(lr)).unwrap();
    d.named_params().into_iter().find(|(n, _)| n == "weight").unwrap().1.data()[0]
}

fn loss_values() -> Outcome {
    let (bce, _) = bce_loss(0.0, 1.0).unwrap();
    let t = Tensor::new(&[1, 1, 2, 2], vec![0.1, 0.5, 0.9, 0.0]).unwrap();
    let (mae, grad) = mae_loss(&t, &t).unwrap();
    let lr = 1e-3;
    let step = adam_first_step(0.3, lr);
    let scale = (step - adam_first_step(30.0, lr)).abs();
    let ok = (bce - std::f64::consts::LN_2).abs() <= 1e-12
        && mae == 0.0
        && grad.data().iter().all(|&g| g == 0.0)
        && (step.abs() - lr).abs() <= 1e-6 * lr
        && scale < 1e-6 * lr;
    verdict(
        ok,
        format!("bce(p=0.5,y=1) - ln2 = {:.1e}, identity MAE {mae}, Adam first step {:.6e} (lr {lr}), |step(g)-step(100g)| {scale:.1e}", bce - std::f64::consts::LN_2, step.abs()),
    )
}

fn files_below(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let dir = |name: &str| tmp.path().join(name);
    let params = SynthParams { seed: 17, ..SynthParams::default() };
    let roi = Roi { window: WINDOW, crop: 120, input: 32 };
    let tiny = XUnetConfig { base_channels: 4, ..XUnetConfig::default() };
    let mut notes = Vec::new();

    let mut runs = Vec::new();
    for run in ["a", "b"] {
        let samples = synth_generate(&params, 6).unwrap();
        write_dataset(&dir(run), &samples).unwrap();
        let mut model = build_xunet(tiny.clone(), 3).unwrap();
        let mut opt = AdamState::new(1e-3);
        let items = seg_items(&samples, roi, true).unwrap();
        let cfg = TrainConfig { epochs: 2, batch_size: 4, seed: 9, shuffle: true };
        let history = train_segmentation(&mut model, &items, &cfg, &mut opt).unwrap();
        let ckpt = dir(&format!("{run}.ckpt"));
        save_checkpoint(&Checkpoint { model: model.clone(), optimizer: Some(opt), input_sizes: vec![32] }, &ckpt).unwrap();
        let rows = samples
            .iter()
            .map(|s| {
                let pred = predict_mask(&mut model, s, Roi { crop: 100, ..roi }, DEFAULT_T_CUP, DEFAULT_T_DISC).unwrap();
                SegRow::score(&s.id, &pred, s.mask.as_ref().unwrap(), None).unwrap()
            })
            .collect();
        std::fs::create_dir_all(dir(&format!("{run}_report"))).unwrap();
        write_seg_report(&dir(&format!("{run}_report")), &SegReport::new(rows).unwrap()).unwrap();
        let bits: Vec<u64> = history.iter().map(|v| v.to_bits()).collect();
        runs.push((
            files_below(&dir(run)),
            bits,
            std::fs::read(&ckpt).unwrap(),
            files_below(&dir(&format!("{run}_report"))),
        ));
    }
    let (a, b) = (&runs[0], &runs[1]);
    let same = [a.0 == b.0, a.1 == b.1, a.2 == b.2, a.3 == b.3];
    for (ok, what) in same.iter().zip(["dataset", "loss history", "checkpoint", "report"]) {
        if !ok {
            notes.push(format!("{what} differs"));
        }
    }

    let back = load_checkpoint(&dir("a.ckpt")).unwrap();
    save_checkpoint(&back, &dir("again.ckpt")).unwrap();
    if std::fs::read(dir("again.ckpt")).unwrap() != a.2 {
        notes.push("checkpoint re-save differs".into());
    }
    let samples = read_dataset(&dir("a")).unwrap();
    if samples != synth_generate(&params, 6).unwrap() {
        notes.push("dataset read-back differs".into());
    }
    for s in &samples {
        let m = s.mask.as_ref().unwrap();
        if decode_ppm(&encode_ppm(&s.image)).unwrap() != s.image || decode_pgm(&encode_pgm(m)).unwrap() != *m {
            notes.push(format!("netpbm round trip of {}", s.id));
        }
    }
    let mut rng = Rng::new(31);
    let broken = (0..1000)
        .filter(|_| {
            let (w, h) = (pick(&mut rng, 1, 24), pick(&mut rng, 1, 24));
            let m = random_mask(&mut rng, w, h);
            decode_prediction(&encode_label(&m), DEFAULT_T_CUP, DEFAULT_T_DISC).unwrap() != m
        })
        .count();
    if broken > 0 {
        notes.push(format!("decode(encode) failed on {broken}/1000 masks"));
    }
    let detail = "datasets, loss histories, checkpoints, reports byte-identical; checkpoint/PPM/PGM round trips exact; decode(encode) on 1000 masks";
    verdict(notes.is_empty(), if notes.is_empty() { detail.into() } else { notes.join("; ") })
}

fn augmentation_laws() -> Outcome {
    use Dihedral::*;
    let small = SynthParams { size: 32, seed: 8, ..SynthParams::default() };
    let s = &synth_generate(&small, 1).unwrap()[0];
    let apply = |ops: &[Dihedral]| ops.iter().fold(s.clone(), |acc, &op| augment(&acc, op).unwrap());
    let mut broken = Vec::new();
    for (name, lhs, rhs) in [
        ("rot90^4", apply(&[Rot90; 4]), s.clone()),
        ("flip_h^2", apply(&[FlipH, FlipH]), s.clone()),
        ("flip_v^2", apply(&[FlipV, FlipV]), s.clone()),
        ("transpose^2", apply(&[Transpose, Transpose]), s.clone()),
        ("flip_h*flip_v", apply(&[FlipH, FlipV]), apply(&[Rot180])),
    ] {
        if (&lhs.image, &lhs.mask) != (&rhs.image, &rhs.mask) {
            broken.push(name);
        }
    }
    let distinct: std::collections::BTreeSet<Vec<u8>> =
        Dihedral::ALL.iter().map(|&op| augment(s, op).unwrap().image.pixels().to_vec()).collect();
    let base = synth_generate(&SynthParams { size: 24, ..small }, 400).unwrap();
    let expanded = expand_dataset(&base).unwrap().len();
    let ok = broken.is_empty() && distinct.len() == 8 && expanded == 3200;
    verdict(ok, format!("laws broken: {broken:?}, {} distinct images per sample, 400 -> {expanded}", distinct.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("published_numbers_not_reproducible", published_numbers),
        ("gradient_suite", gradient_suite),
        ("adjoint", adjoint),
        ("segmentation_convergence", segmentation_convergence),
        ("classification", classification),
        ("metric_oracles", metric_oracles),
        ("loss_values", loss_values),
        ("determinism_and_round_trips", determinism),
        ("augmentation_laws", augmentation_laws),
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    std::panic::set_hook(Box::new(|_| {}));
    for (name, run) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS {name} ({secs:.1}s): {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL {name} ({secs:.1}s): {d}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
