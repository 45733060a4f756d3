//! Losses, the Adam optimizer and the two training loops.

mod adam;
mod loss;

use alloc::format;
use alloc::vec::Vec;

pub use adam::{adam_step, AdamState, OPT_PREFIX};
pub use loss::{bce_loss, mae_loss};

use crate::error::{Error, Result};
use crate::layer::Layer;
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 200, batch_size: 8, seed: 0, shuffle: true }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::ConfigInvalid(format!(
                "epochs and batch_size must be at least 1 (got {} and {})",
                self.epochs, self.batch_size
            )));
        }
        Ok(())
    }
}

/// One segmentation example: image `[1, C, H, W]` and regression target `[1, 1, H, W]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SegItem {
    pub input: Tensor,
    pub target: Tensor,
}

/// One classification example: image `[1, C, H, W]` and a 0/1 label.
#[derive(Clone, Debug, PartialEq)]
pub struct ClsItem {
    pub input: Tensor,
    pub label: f64,
}

/// Visiting order for one epoch: a seeded permutation, or identity without shuffling.
fn epoch_order(len: usize, cfg: &TrainConfig, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    if cfg.shuffle {
        Rng::stream(cfg.seed, epoch as u64).shuffle(&mut order);
    }
    order
}

/// Splits `order` into runs of at most `batch_size` consecutive items whose
/// input shapes agree.
fn batches(order: &[usize], shape_of: impl Fn(usize) -> Vec<usize>, batch_size: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut current_shape: Option<Vec<usize>> = None;
    for &i in order {
        let shape = shape_of(i);
        match out.last_mut() {
            Some(b) if b.len() < batch_size && current_shape.as_ref() == Some(&shape) => b.push(i),
            _ => {
                out.push(alloc::vec![i]);
                current_shape = Some(shape);
            }
        }
    }
    out
}

fn run_epochs<T>(
    model: &mut dyn Layer,
    data: &[T],
    cfg: &TrainConfig,
    state: &mut AdamState,
    input_of: impl Fn(&T) -> &Tensor,
    // Given the batch output and the batch's items, returns per-item losses
    // and the gradient of the batch objective w.r.t. the output.
    objective: impl Fn(&Tensor, &[&T]) -> Result<(Vec<f64>, Tensor)>,
    on_epoch: &mut dyn FnMut(usize, f64),
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let order = epoch_order(data.len(), cfg, epoch);
        let mut losses = alloc::vec![0.0; data.len()];
        for batch in batches(&order, |i| input_of(&data[i]).shape().to_vec(), cfg.batch_size) {
            let items: Vec<&T> = batch.iter().map(|&i| &data[i]).collect();
            let inputs: Vec<&Tensor> = items.iter().map(|t| input_of(t)).collect();
            let x = Tensor::concat_batch(&inputs)?;
            let y = model.forward(&x)?;
            let (per_item, grad) = objective(&y, &items)?;
            for (&i, l) in batch.iter().zip(per_item) {
                losses[i] = l;
            }
            let grads = model.backward(&grad)?;
            adam_step(model, &grads.grad_params, state)?;
        }
        let mean = losses.iter().sum::<f64>() / losses.len() as f64;
        on_epoch(epoch, mean);
        history.push(mean);
    }
    Ok(history)
}

/// MAE regression training. Returns the mean per-sample loss of every epoch.
pub fn train_segmentation(
    model: &mut dyn Layer,
    data: &[SegItem],
    cfg: &TrainConfig,
    state: &mut AdamState,
) -> Result<Vec<f64>> {
    train_segmentation_observed(model, data, cfg, state, &mut |_, _| {})
}

/// [`train_segmentation`] reporting `(epoch, mean loss)` as each epoch ends.
pub fn train_segmentation_observed(
    model: &mut dyn Layer,
    data: &[SegItem],
    cfg: &TrainConfig,
    state: &mut AdamState,
    on_epoch: &mut dyn FnMut(usize, f64),
) -> Result<Vec<f64>> {
    for item in data {
        if item.target.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::ConfigInvalid("segmentation targets must lie in [0, 1]".into()));
        }
    }
    run_epochs(
        model,
        data,
        cfg,
        state,
        |s| &s.input,
        |y, items| {
            let targets: Vec<&Tensor> = items.iter().map(|s| &s.target).collect();
            let t = Tensor::concat_batch(&targets)?;
            let (_, grad) = mae_loss(y, &t)?;
            let per_item = (0..items.len())
                .map(|i| mae_loss(&y.batch_item(i), &items[i].target).map(|(l, _)| l))
                .collect::<Result<Vec<f64>>>()?;
            Ok((per_item, grad))
        },
        on_epoch,
    )
}

/// Binary cross-entropy training on the model's logits.
pub fn train_classifier(
    model: &mut dyn Layer,
    data: &[ClsItem],
    cfg: &TrainConfig,
    state: &mut AdamState,
) -> Result<Vec<f64>> {
    train_classifier_observed(model, data, cfg, state, &mut |_, _| {})
}

pub fn train_classifier_observed(
    model: &mut dyn Layer,
    data: &[ClsItem],
    cfg: &TrainConfig,
    state: &mut AdamState,
    on_epoch: &mut dyn FnMut(usize, f64),
) -> Result<Vec<f64>> {
    for item in data {
        if item.label != 0.0 && item.label != 1.0 {
            return Err(Error::LabelInvalid(item.label));
        }
    }
    run_epochs(
        model,
        data,
        cfg,
        state,
        |s| &s.input,
        |logits, items| {
            if logits.len() != items.len() {
                return Err(Error::ShapeMismatch(format!(
                    "expected one logit per item, got shape {:?}",
                    logits.shape()
                )));
            }
            let n = items.len() as f64;
            let mut per_item = Vec::with_capacity(items.len());
            let mut grad = Vec::with_capacity(items.len());
            for (&z, item) in logits.data().iter().zip(items) {
                let (l, g) = bce_loss(z, item.label)?;
                per_item.push(l);
                grad.push(g / n);
            }
            Ok((per_item, Tensor::new(logits.shape(), grad)?))
        },
        on_epoch,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layer::Dense;
    use crate::models::{build_classifier, build_xunet, Classifier, ClassifierConfig, Model, XUnetConfig};
    use alloc::vec;

    fn tiny_xunet() -> Model {
        build_xunet(
            XUnetConfig { depth: 2, base_channels: 4, input_levels: 2, se_reduction: 2, block_depth: 1, in_channels: 3 },
            5,
        )
        .unwrap()
    }

    /// A bright square on a dark field, target 0 inside and 1 outside.
    fn square_item(offset: usize) -> SegItem {
        let side = 16;
        let mut img = vec![0.1; 3 * side * side];
        let mut target = vec![1.0; side * side];
        for y in 4 + offset..10 + offset {
            for x in 5..11 {
                target[y * side + x] = 0.0;
                for c in 0..3 {
                    img[c * side * side + y * side + x] = 0.9;
                }
            }
        }
        SegItem {
            input: Tensor::new(&[1, 3, side, side], img).unwrap(),
            target: Tensor::new(&[1, 1, side, side], target).unwrap(),
        }
    }

    #[test]
    fn overfits_one_sample() {
        let mut model = tiny_xunet();
        let cfg = TrainConfig { epochs: 10, batch_size: 1, seed: 1, shuffle: true };
        let h = train_segmentation(&mut model, &[square_item(0)], &cfg, &mut AdamState::new(1e-3)).unwrap();
        assert!(h.windows(2).all(|w| w[1] < w[0]), "{h:?}");
    }

    #[test]
    fn histories_are_deterministic_and_frozen_at_zero_lr() {
        let data = vec![square_item(0), square_item(2), square_item(4)];
        let cfg = TrainConfig { epochs: 3, batch_size: 2, seed: 7, shuffle: true };
        let run = |lr: f64| {
            let mut m = tiny_xunet();
            train_segmentation(&mut m, &data, &cfg, &mut AdamState::new(lr)).unwrap()
        };
        assert_eq!(run(1e-3), run(1e-3));
        let frozen = run(0.0);
        assert!(frozen.iter().all(|&l| l == frozen[0]), "{frozen:?}");
    }

    fn zero_head_classifier() -> Model {
        let cfg = ClassifierConfig { stem_strides: vec![2], body_rates: vec![1], ..ClassifierConfig::default() };
        let mut c = Classifier::new(cfg, 3).unwrap();
        c.output = Dense::from_parts(Tensor::zeros(&[16, 1]), Tensor::zeros(&[1]));
        Model::Classifier(c)
    }

    #[test]
    fn balanced_pair_starts_at_ln2() {
        let data = vec![
            ClsItem { input: square_item(0).input, label: 1.0 },
            ClsItem { input: square_item(3).input, label: 0.0 },
        ];
        let cfg = TrainConfig { epochs: 1, batch_size: 2, seed: 0, shuffle: false };
        let h = train_classifier(&mut zero_head_classifier(), &data, &cfg, &mut AdamState::default()).unwrap();
        assert!((h[0] - core::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn classifier_history_is_deterministic() {
        let data: Vec<ClsItem> = (0..4)
            .map(|i| ClsItem { input: square_item(i).input, label: (i % 2) as f64 })
            .collect();
        let cfg = TrainConfig { epochs: 3, batch_size: 3, seed: 2, shuffle: true };
        let run = || {
            let mut m = build_classifier(ClassifierConfig::default(), 1).unwrap();
            train_classifier(&mut m, &data, &cfg, &mut AdamState::new(1e-3)).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut m = tiny_xunet();
        let mut s = AdamState::default();
        assert_eq!(train_segmentation(&mut m, &[], &TrainConfig::default(), &mut s), Err(Error::EmptyDataset));
        let zero_epochs = TrainConfig { epochs: 0, ..TrainConfig::default() };
        assert!(matches!(train_segmentation(&mut m, &[square_item(0)], &zero_epochs, &mut s), Err(Error::ConfigInvalid(_))));
        let zero_batch = TrainConfig { batch_size: 0, ..TrainConfig::default() };
        assert!(matches!(train_segmentation(&mut m, &[square_item(0)], &zero_batch, &mut s), Err(Error::ConfigInvalid(_))));
        let bad = ClsItem { input: square_item(0).input, label: 0.3 };
        let mut c = zero_head_classifier();
        assert_eq!(train_classifier(&mut c, &[bad], &TrainConfig::default(), &mut s), Err(Error::LabelInvalid(0.3)));
    }

    #[test]
    fn batches_split_on_shape_changes() {
        let shapes = [vec![1, 3, 8, 8], vec![1, 3, 8, 8], vec![1, 3, 4, 4], vec![1, 3, 8, 8], vec![1, 3, 8, 8], vec![1, 3, 8, 8]];
        let b = batches(&[0, 1, 2, 3, 4, 5], |i| shapes[i].clone(), 2);
        assert_eq!(b, vec![vec![0, 1], vec![2], vec![3, 4], vec![5]]);
    }
}
