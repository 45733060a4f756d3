//! Segmentation and classification metrics.

use alloc::string::String;
use alloc::vec::Vec;

use crate::data::LabelMask;
use crate::error::{Error, Result};

/// `2|A ∩ B| / (|A| + |B|)`; two empty masks score 1.
pub fn dice(a: &[bool], b: &[bool]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(alloc::format!("dice of masks with {} and {} pixels", a.len(), b.len())));
    }
    let (mut both, mut total) = (0usize, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        both += usize::from(x && y);
        total += usize::from(x) + usize::from(y);
    }
    Ok(if total == 0 { 1.0 } else { 2.0 * both as f64 / total as f64 })
}

fn row_extent(mask: &LabelMask, member: impl Fn(usize, usize) -> bool) -> Option<usize> {
    let rows: Vec<usize> =
        (0..mask.height()).filter(|&y| (0..mask.width()).any(|x| member(x, y))).collect();
    Some(rows.last()? - rows.first()? + 1)
}

/// Cup row extent over disc row extent. An empty cup gives 0.
pub fn vertical_cdr(mask: &LabelMask) -> Result<f64> {
    let disc = row_extent(mask, |x, y| mask.get(x, y).in_disc()).ok_or(Error::DegenerateMask)?;
    let cup = row_extent(mask, |x, y| mask.get(x, y) == crate::data::Region::Cup).unwrap_or(0);
    Ok(cup as f64 / disc as f64)
}

fn check_pairs(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch(a, b));
    }
    if a == 0 {
        return Err(Error::Empty);
    }
    Ok(())
}

pub fn mae_cdr(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pairs(pred.len(), truth.len())?;
    Ok(pred.iter().zip(truth).map(|(p, t)| libm::fabs(p - t)).sum::<f64>() / pred.len() as f64)
}

fn check_labels(labels: &[u8]) -> Result<(usize, usize)> {
    let mut pos = 0;
    for &l in labels {
        match l {
            0 => {}
            1 => pos += 1,
            other => return Err(Error::LabelInvalid(f64::from(other))),
        }
    }
    Ok((pos, labels.len() - pos))
}

/// Mann-Whitney estimate of the area under the ROC curve, with tied scores
/// counting one half. Computed from average ranks in `O(n log n)`.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_pairs(scores.len(), labels.len())?;
    let (pos, neg) = check_labels(labels)?;
    if pos == 0 || neg == 0 {
        return Err(Error::OneClassOnly);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]));
    // Ranks are doubled so tie averages stay integral.
    let mut rank_sum2: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let avg2 = (start + 1 + end) as u128;
        let positives = order[start..end].iter().filter(|&&i| labels[i] == 1).count() as u128;
        rank_sum2 += avg2 * positives;
        start = end;
    }
    let u2 = rank_sum2 - (pos as u128) * (pos as u128 + 1);
    Ok(u2 as f64 / (2.0 * pos as f64 * neg as f64))
}

/// Fraction of positives scored `>= threshold`.
pub fn sensitivity(scores: &[f64], labels: &[u8], threshold: f64) -> Result<f64> {
    rate(scores, labels, 1, |s| s >= threshold)
}

/// Fraction of negatives scored `< threshold`.
pub fn specificity(scores: &[f64], labels: &[u8], threshold: f64) -> Result<f64> {
    rate(scores, labels, 0, |s| s < threshold)
}

fn rate(scores: &[f64], labels: &[u8], class: u8, hit: impl Fn(f64) -> bool) -> Result<f64> {
    check_pairs(scores.len(), labels.len())?;
    check_labels(labels)?;
    let (mut n, mut k) = (0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        if l == class {
            n += 1;
            k += usize::from(hit(s));
        }
    }
    if n == 0 {
        return Err(Error::OneClassOnly);
    }
    Ok(k as f64 / n as f64)
}

pub fn ensemble_mean(probabilities: &[f64]) -> Result<f64> {
    if probabilities.is_empty() {
        return Err(Error::Empty);
    }
    if let Some(&p) = probabilities.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::ConfigInvalid(alloc::format!("probability {p} outside [0, 1]")));
    }
    Ok(probabilities.iter().sum::<f64>() / probabilities.len() as f64)
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct SegRow {
    pub id: String,
    pub cup_dice: f64,
    pub disc_dice: f64,
    pub pred_cdr: f64,
    pub true_cdr: f64,
}

impl SegRow {
    /// Scores `pred` against `truth`. The reference ratio is `true_cdr` when
    /// known, otherwise measured on `truth`. A prediction without any disc
    /// pixels has ratio 0.
    pub fn score(id: &str, pred: &LabelMask, truth: &LabelMask, true_cdr: Option<f64>) -> Result<SegRow> {
        let pred_cdr = match vertical_cdr(pred) {
            Ok(v) => v,
            Err(Error::DegenerateMask) => 0.0,
            Err(e) => return Err(e),
        };
        Ok(SegRow {
            id: id.into(),
            cup_dice: dice(&pred.cup(), &truth.cup())?,
            disc_dice: dice(&pred.disc(), &truth.disc())?,
            pred_cdr,
            true_cdr: match true_cdr {
                Some(v) => v,
                None => vertical_cdr(truth)?,
            },
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SegReport {
    pub rows: Vec<SegRow>,
    pub mean_cup_dice: f64,
    pub mean_disc_dice: f64,
    pub mae_cdr: f64,
}

impl SegReport {
    pub fn new(rows: Vec<SegRow>) -> Result<SegReport> {
        if rows.is_empty() {
            return Err(Error::Empty);
        }
        let n = rows.len() as f64;
        let pred: Vec<f64> = rows.iter().map(|r| r.pred_cdr).collect();
        let truth: Vec<f64> = rows.iter().map(|r| r.true_cdr).collect();
        Ok(SegReport {
            mean_cup_dice: rows.iter().map(|r| r.cup_dice).sum::<f64>() / n,
            mean_disc_dice: rows.iter().map(|r| r.disc_dice).sum::<f64>() / n,
            mae_cdr: mae_cdr(&pred, &truth)?,
            rows,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClsRow {
    pub id: String,
    pub prob: f64,
    pub label: u8,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClsReport {
    pub rows: Vec<ClsRow>,
    pub auc: f64,
    pub threshold: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

impl ClsReport {
    pub fn new(rows: Vec<ClsRow>, threshold: f64) -> Result<ClsReport> {
        let scores: Vec<f64> = rows.iter().map(|r| r.prob).collect();
        let labels: Vec<u8> = rows.iter().map(|r| r.label).collect();
        Ok(ClsReport {
            auc: roc_auc(&scores, &labels)?,
            threshold,
            sensitivity: sensitivity(&scores, &labels, threshold)?,
            specificity: specificity(&scores, &labels, threshold)?,
            rows,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Region;
    use alloc::vec;

    fn bits(s: &str) -> Vec<bool> {
        s.bytes().map(|b| b == b'1').collect()
    }

    #[test]
    fn dice_examples() {
        assert_eq!(dice(&bits("0110"), &bits("0110")).unwrap(), 1.0);
        assert_eq!(dice(&bits("1100"), &bits("0011")).unwrap(), 0.0);
        assert_eq!(dice(&bits("11110000"), &bits("00111100")).unwrap(), 0.5);
        assert_eq!(dice(&bits("0000"), &bits("0000")).unwrap(), 1.0);
        assert_eq!(dice(&bits("0000"), &bits("0100")).unwrap(), 0.0);
        assert!(matches!(dice(&bits("01"), &bits("011")), Err(Error::ShapeMismatch(_))));
    }

    fn banded(disc_rows: core::ops::Range<usize>, cup_rows: core::ops::Range<usize>) -> LabelMask {
        let mut m = LabelMask::filled(3, 40, Region::Background).unwrap();
        for y in disc_rows {
            m.set(1, y, if cup_rows.contains(&y) { Region::Cup } else { Region::Rim });
        }
        m
    }

    #[test]
    fn vertical_cdr_examples() {
        assert_eq!(vertical_cdr(&banded(0..40, 10..20)).unwrap(), 0.25);
        assert_eq!(vertical_cdr(&banded(5..15, 5..15)).unwrap(), 1.0);
        assert_eq!(vertical_cdr(&banded(5..15, 0..0)).unwrap(), 0.0);
        assert_eq!(vertical_cdr(&banded(0..0, 0..0)), Err(Error::DegenerateMask));
    }

    #[test]
    fn mae_cdr_examples() {
        assert_eq!(mae_cdr(&[0.3, 0.6], &[0.3, 0.6]).unwrap(), 0.0);
        assert!((mae_cdr(&[0.5, 0.7], &[0.4, 0.8]).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(mae_cdr(&[0.25], &[0.5]).unwrap(), 0.25);
        assert_eq!(mae_cdr(&[0.1], &[]), Err(Error::LengthMismatch(1, 0)));
        assert_eq!(mae_cdr(&[], &[]), Err(Error::Empty));
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.2, 0.8], &[0, 1]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.4; 5], &[0, 1, 1, 0, 1]).unwrap(), 0.5);
        assert_eq!(roc_auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap(), 0.75);
        assert_eq!(roc_auc(&[0.1, 0.2], &[1, 1]), Err(Error::OneClassOnly));
        assert_eq!(roc_auc(&[0.1, 0.2], &[1, 2]), Err(Error::LabelInvalid(2.0)));
    }

    #[test]
    fn sensitivity_and_specificity() {
        assert_eq!(sensitivity(&[0.6, 0.9], &[1, 1], 0.5).unwrap(), 1.0);
        assert_eq!(sensitivity(&[0.6, 0.4], &[1, 1], 0.5).unwrap(), 0.5);
        assert_eq!(sensitivity(&[0.0, 0.3], &[1, 1], 0.0).unwrap(), 1.0);
        assert_eq!(sensitivity(&[0.5, 0.4], &[1, 0], 0.5).unwrap(), 1.0);
        assert_eq!(specificity(&[0.5, 0.4], &[0, 0], 0.5).unwrap(), 0.5);
        assert_eq!(sensitivity(&[0.5], &[0], 0.5), Err(Error::OneClassOnly));
    }

    #[test]
    fn ensemble_examples() {
        assert_eq!(ensemble_mean(&[0.3]).unwrap(), 0.3);
        assert!((ensemble_mean(&[0.2, 0.4, 0.9]).unwrap() - 0.5).abs() < 1e-15);
        assert!((ensemble_mean(&[0.7; 3]).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(ensemble_mean(&[]), Err(Error::Empty));
        assert!(ensemble_mean(&[1.5]).is_err());
    }

    #[test]
    fn reports_aggregate_rows() {
        let truth = banded(0..40, 10..20);
        let pred = banded(0..40, 10..30);
        let a = SegRow::score("a", &pred, &truth, None).unwrap();
        assert_eq!(a.true_cdr, 0.25);
        assert_eq!(a.pred_cdr, 0.5);
        assert_eq!(a.disc_dice, 1.0);
        let empty = LabelMask::filled(3, 40, Region::Background).unwrap();
        let b = SegRow::score("b", &empty, &truth, Some(0.3)).unwrap();
        assert_eq!((b.pred_cdr, b.disc_dice, b.cup_dice), (0.0, 0.0, 0.0));
        let r = SegReport::new(vec![a, b]).unwrap();
        assert!((r.mae_cdr - (0.25 + 0.3) / 2.0).abs() < 1e-15);
        assert_eq!(r.mean_disc_dice, 0.5);

        let rows = vec![
            ClsRow { id: "x".into(), prob: 0.9, label: 1 },
            ClsRow { id: "y".into(), prob: 0.2, label: 0 },
            ClsRow { id: "z".into(), prob: 0.6, label: 0 },
        ];
        let c = ClsReport::new(rows, DEFAULT_THRESHOLD).unwrap();
        assert_eq!((c.auc, c.sensitivity, c.specificity), (1.0, 1.0, 0.5));
    }
}
