//! Metric reports: per-sample CSV rows, an `aggregate` row holding the column
//! means, and a `metrics.txt` with the summary statistics.

use std::fs;
use std::path::Path;

use fundus_core::eval::{ClsReport, SegReport};

use crate::dataset::write_csv;
use crate::error::{Error, Result};

pub const REPORT: &str = "report.csv";
pub const METRICS: &str = "metrics.txt";
pub const SEG_HEADER: [&str; 5] = ["id", "cup_dice", "disc_dice", "pred_cdr", "true_cdr"];
pub const CLS_HEADER: [&str; 3] = ["id", "prob", "label"];

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

fn write_metrics(dir: &Path, lines: &[(&str, String)]) -> Result<()> {
    let text: String = lines.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    let path = dir.join(METRICS);
    fs::write(&path, text).map_err(Error::io(&path))
}

pub fn write_seg_report(dir: &Path, report: &SegReport) -> Result<()> {
    let mut rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| vec![r.id.clone(), r.cup_dice.to_string(), r.disc_dice.to_string(), r.pred_cdr.to_string(), r.true_cdr.to_string()])
        .collect();
    let col = |f: fn(&fundus_core::eval::SegRow) -> f64| mean(report.rows.iter().map(f)).to_string();
    rows.push(vec!["aggregate".into(), col(|r| r.cup_dice), col(|r| r.disc_dice), col(|r| r.pred_cdr), col(|r| r.true_cdr)]);
    write_csv(&dir.join(REPORT), &SEG_HEADER, &rows)?;
    write_metrics(
        dir,
        &[
            ("samples", report.rows.len().to_string()),
            ("mean_cup_dice", report.mean_cup_dice.to_string()),
            ("mean_disc_dice", report.mean_disc_dice.to_string()),
            ("mae_cdr", report.mae_cdr.to_string()),
        ],
    )
}

pub fn write_cls_report(dir: &Path, report: &ClsReport) -> Result<()> {
    let mut rows: Vec<Vec<String>> =
        report.rows.iter().map(|r| vec![r.id.clone(), r.prob.to_string(), r.label.to_string()]).collect();
    rows.push(vec![
        "aggregate".into(),
        mean(report.rows.iter().map(|r| r.prob)).to_string(),
        mean(report.rows.iter().map(|r| f64::from(r.label))).to_string(),
    ]);
    write_csv(&dir.join(REPORT), &CLS_HEADER, &rows)?;
    write_metrics(
        dir,
        &[
            ("samples", report.rows.len().to_string()),
            ("auc", report.auc.to_string()),
            ("threshold", report.threshold.to_string()),
            ("sensitivity", report.sensitivity.to_string()),
            ("specificity", report.specificity.to_string()),
        ],
    )
}
