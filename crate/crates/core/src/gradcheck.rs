//! Central finite-difference check of a layer's analytic backward pass.
//!
//! The scalar probed is `L(x, θ) = <forward(x; θ), r>` for a fixed random `r`.
//! Each input and parameter coordinate is nudged by `±ε`; the numeric
//! derivative is accumulated from per-element output differences, so outputs
//! outside the receptive field of a coordinate cancel exactly.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::layer::Layer;
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Outcome of [`grad_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// Max over checked coordinates of `|a - n| / max(1e-12, |a| + |n|)`.
    pub max_rel_error: f64,
    /// Max over checked coordinates of `|a - n|`.
    pub max_abs_error: f64,
    pub checked: usize,
    /// Coordinates whose `±ε` probe changed a relu sign or max-pool winner;
    /// the central difference straddles a kink there and is not compared.
    pub skipped_at_kinks: usize,
    /// Name of the coordinate with the largest error, e.g. `input[3]`.
    pub worst: String,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-12)
}

const PROBE_SEED: u64 = 0x6772_6164;

pub fn grad_check<L: Layer + ?Sized>(layer: &mut L, input: &Tensor, epsilon: f64) -> Result<GradCheckReport> {
    if !(epsilon > 0.0) {
        return Err(Error::ConfigInvalid("epsilon must be positive".into()));
    }
    let base = layer.forward(input)?;
    let mut rng = Rng::new(PROBE_SEED);
    let probe =
        Tensor::new(base.shape(), (0..base.len()).map(|_| rng.uniform(-1.0, 1.0)).collect())?;
    let mut base_switches = Vec::new();
    layer.record_switches(&mut base_switches);
    let analytic = layer.backward(&probe)?;

    let mut report =
        GradCheckReport { max_rel_error: 0.0, max_abs_error: 0.0, checked: 0, skipped_at_kinks: 0, worst: String::new() };

    let mut x = input.clone();
    for i in 0..x.len() {
        let orig = x.data()[i];
        x.data_mut()[i] = orig + epsilon;
        let plus = eval(layer, &x)?;
        x.data_mut()[i] = orig - epsilon;
        let minus = eval(layer, &x)?;
        x.data_mut()[i] = orig;
        let a = analytic.grad_input.data()[i];
        tally(&mut report, &base_switches, plus, minus, &probe, epsilon, a, || alloc::format!("input[{i}]"));
    }

    let mut coords = Vec::new();
    layer.visit_params(&mut |name, t| coords.push((name.to_string(), t.len())));
    for (name, len) in coords {
        let grad = analytic
            .grad_params
            .get(&name)
            .ok_or_else(|| Error::ShapeMismatch(alloc::format!("no gradient for parameter {name}")))?
            .clone();
        for j in 0..len {
            let orig = read_param(layer, &name, j);
            write_param(layer, &name, j, orig + epsilon);
            let plus = eval(layer, input)?;
            write_param(layer, &name, j, orig - epsilon);
            let minus = eval(layer, input)?;
            write_param(layer, &name, j, orig);
            tally(&mut report, &base_switches, plus, minus, &probe, epsilon, grad.data()[j], || {
                alloc::format!("{name}[{j}]")
            });
        }
    }
    layer.forward(input)?;
    Ok(report)
}

fn eval<L: Layer + ?Sized>(layer: &mut L, x: &Tensor) -> Result<(Tensor, Vec<u64>)> {
    let y = layer.forward(x)?;
    let mut switches = Vec::new();
    layer.record_switches(&mut switches);
    Ok((y, switches))
}

#[allow(clippy::too_many_arguments)]
fn tally(
    report: &mut GradCheckReport,
    base_switches: &[u64],
    (plus, s_plus): (Tensor, Vec<u64>),
    (minus, s_minus): (Tensor, Vec<u64>),
    probe: &Tensor,
    epsilon: f64,
    analytic: f64,
    label: impl FnOnce() -> String,
) {
    if s_plus != base_switches || s_minus != base_switches {
        report.skipped_at_kinks += 1;
        return;
    }
    let diff: f64 = plus
        .data()
        .iter()
        .zip(minus.data())
        .zip(probe.data())
        .map(|((p, m), r)| (p - m) * r)
        .sum();
    let numeric = diff / (2.0 * epsilon);
    let err = relative_error(analytic, numeric);
    report.checked += 1;
    report.max_abs_error = report.max_abs_error.max((analytic - numeric).abs());
    if err > report.max_rel_error || report.worst.is_empty() {
        report.max_rel_error = report.max_rel_error.max(err);
        if err >= report.max_rel_error {
            report.worst = label();
        }
    }
}

fn read_param<L: Layer + ?Sized>(layer: &L, name: &str, j: usize) -> f64 {
    let mut v = 0.0;
    layer.visit_params(&mut |n, t| {
        if n == name {
            v = t.data()[j];
        }
    });
    v
}

fn write_param<L: Layer + ?Sized>(layer: &mut L, name: &str, j: usize, value: f64) {
    layer.visit_params_mut(&mut |n, t| {
        if n == name {
            t.data_mut()[j] = value;
        }
    });
}
