// SPDX-License-Identifier: Apache-2.0

//! Binary ground segmentation metrics and terrain accuracy evaluation.
//!
//! Ground is the positive class. Truth labels from the ignore set (unlabeled,
//! outlier, vegetation) are excluded from the metrics entirely; predicted
//! outliers count as predicted non-ground so every evaluated point is scored.

use std::io::Write;

use crate::cloud::PointLabel;
use crate::config::Config;
use crate::error::{Error, Result};
use crate::grid::GridMap;

/// Ground-truth class of a semantic id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruthClass {
    Ground,
    NonGround,
    Ignored,
}

pub fn map_truth_label(id: u16, cfg: &Config) -> TruthClass {
    if cfg.ground_labels.contains(&id) {
        TruthClass::Ground
    } else if cfg.ignore_labels.contains(&id) {
        TruthClass::Ignored
    } else {
        TruthClass::NonGround
    }
}

/// Binary confusion counts; ground is positive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub true_pos: u64,
    pub false_pos: u64,
    pub true_neg: u64,
    pub false_neg: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }

    pub fn add(&mut self, predicted_ground: bool, truth: TruthClass) {
        match (predicted_ground, truth) {
            (_, TruthClass::Ignored) => {}
            (true, TruthClass::Ground) => self.true_pos += 1,
            (true, TruthClass::NonGround) => self.false_pos += 1,
            (false, TruthClass::Ground) => self.false_neg += 1,
            (false, TruthClass::NonGround) => self.true_neg += 1,
        }
    }

    /// Field-wise sum; accumulation over chunks is associative.
    pub fn merge(&mut self, other: &ConfusionCounts) {
        self.true_pos += other.true_pos;
        self.false_pos += other.false_pos;
        self.true_neg += other.true_neg;
        self.false_neg += other.false_neg;
    }
}

/// Score pipeline predictions against semantic truth ids.
pub fn accumulate_confusion(
    predicted: &[PointLabel],
    truth: &[u16],
    cfg: &Config,
) -> Result<ConfusionCounts> {
    if predicted.len() != truth.len() {
        return Err(Error::Data(format!(
            "prediction/truth length mismatch: {} vs {}",
            predicted.len(),
            truth.len()
        )));
    }
    let mut counts = ConfusionCounts::default();
    for (p, &t) in predicted.iter().zip(truth) {
        // A rejected outlier is by definition not a ground prediction.
        let predicted_ground = *p == PointLabel::Ground;
        counts.add(predicted_ground, map_truth_label(t, cfg));
    }
    Ok(counts)
}

/// Score written label files against truth files: a predicted id is ground
/// iff it belongs to the configured ground set.
pub fn accumulate_confusion_ids(
    predicted: &[u16],
    truth: &[u16],
    cfg: &Config,
) -> Result<ConfusionCounts> {
    if predicted.len() != truth.len() {
        return Err(Error::Data(format!(
            "prediction/truth length mismatch: {} vs {}",
            predicted.len(),
            truth.len()
        )));
    }
    let mut counts = ConfusionCounts::default();
    for (&p, &t) in predicted.iter().zip(truth) {
        counts.add(
            cfg.ground_labels.contains(&p),
            map_truth_label(t, cfg),
        );
    }
    Ok(counts)
}

/// The five ratio metrics. `None` marks a 0/0 case; NaN never escapes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub iou: Option<f64>,
    pub accuracy: Option<f64>,
}

pub fn compute_metrics(c: &ConfusionCounts) -> Metrics {
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    let (tp, fp, tn, fne) = (c.true_pos, c.false_pos, c.true_neg, c.false_neg);
    Metrics {
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fne),
        f1: ratio(2 * tp, 2 * tp + fp + fne),
        iou: ratio(tp, tp + fp + fne),
        accuracy: ratio(tp + tn, tp + fp + tn + fne),
    }
}

/// One metrics report row.
pub struct MetricsRow {
    pub sequence: String,
    pub metrics: Metrics,
}

/// Write the report: one row per sequence plus an `average` row taking the
/// per-sequence mean of each defined column.
pub fn write_metrics_csv(rows: &[MetricsRow], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "seq,precision,recall,f1,accuracy,iou")?;
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    for row in rows {
        let m = &row.metrics;
        writeln!(
            w,
            "{},{},{},{},{},{}",
            row.sequence,
            fmt(m.precision),
            fmt(m.recall),
            fmt(m.f1),
            fmt(m.accuracy),
            fmt(m.iou),
        )?;
    }
    let mean = |get: fn(&Metrics) -> Option<f64>| {
        let defined: Vec<f64> = rows.iter().filter_map(|r| get(&r.metrics)).collect();
        (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
    };
    writeln!(
        w,
        "average,{},{},{},{},{}",
        fmt(mean(|m| m.precision)),
        fmt(mean(|m| m.recall)),
        fmt(mean(|m| m.f1)),
        fmt(mean(|m| m.accuracy)),
        fmt(mean(|m| m.iou)),
    )
}

/// Root mean square error between the estimated elevation and truth samples
/// over masked cells. `None` when the mask is empty.
pub fn terrain_rmse(estimate: &[f64], truth: &[f64], mask: &[bool]) -> Option<f64> {
    assert_eq!(estimate.len(), truth.len());
    assert_eq!(estimate.len(), mask.len());
    let mut sum = 0.0;
    let mut n = 0u64;
    for ((&g, &t), &keep) in estimate.iter().zip(truth).zip(mask) {
        if keep {
            sum += (g - t) * (g - t);
            n += 1;
        }
    }
    (n > 0).then(|| (sum / n as f64).sqrt())
}

/// Cells whose accumulated observation density reaches
/// `min_points_per_m2` (points per square meter).
pub fn density_mask(map: &GridMap, min_points_per_m2: f64) -> Vec<bool> {
    let cell_area = map.resolution() * map.resolution();
    let threshold = min_points_per_m2 * cell_area;
    map.obs_count()
        .iter()
        .map(|&n| n as f64 >= threshold)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> Config {
        Config::default()
    }

    #[test]
    fn truth_mapping_follows_label_sets() {
        let cfg = cfg();
        assert_eq!(map_truth_label(40, &cfg), TruthClass::Ground); // road
        assert_eq!(map_truth_label(48, &cfg), TruthClass::Ground); // sidewalk
        assert_eq!(map_truth_label(70, &cfg), TruthClass::Ignored); // vegetation
        assert_eq!(map_truth_label(0, &cfg), TruthClass::Ignored);
        assert_eq!(map_truth_label(10, &cfg), TruthClass::NonGround); // car
        assert_eq!(map_truth_label(999, &cfg), TruthClass::NonGround);
    }

    #[test]
    fn all_correct_counts() {
        let cfg = cfg();
        let pred: Vec<PointLabel> = std::iter::repeat(PointLabel::Ground)
            .take(10)
            .chain(std::iter::repeat(PointLabel::NonGround).take(10))
            .collect();
        let truth: Vec<u16> = std::iter::repeat(40u16)
            .take(10)
            .chain(std::iter::repeat(10u16).take(10))
            .collect();
        let c = accumulate_confusion(&pred, &truth, &cfg).unwrap();
        assert_eq!(
            c,
            ConfusionCounts { true_pos: 10, false_pos: 0, true_neg: 10, false_neg: 0 }
        );
    }

    #[test]
    fn inverted_predictions_count() {
        let cfg = cfg();
        let pred: Vec<PointLabel> = std::iter::repeat(PointLabel::NonGround)
            .take(10)
            .chain(std::iter::repeat(PointLabel::Ground).take(10))
            .collect();
        let truth: Vec<u16> = std::iter::repeat(40u16)
            .take(10)
            .chain(std::iter::repeat(10u16).take(10))
            .collect();
        let c = accumulate_confusion(&pred, &truth, &cfg).unwrap();
        assert_eq!(
            c,
            ConfusionCounts { true_pos: 0, false_pos: 10, true_neg: 0, false_neg: 10 }
        );
    }

    #[test]
    fn predicted_outliers_score_as_non_ground_and_ignored_truth_is_excluded() {
        let cfg = cfg();
        let pred = vec![PointLabel::Outlier, PointLabel::Outlier, PointLabel::Ground];
        let truth = vec![40u16, 10, 70];
        let c = accumulate_confusion(&pred, &truth, &cfg).unwrap();
        assert_eq!(
            c,
            ConfusionCounts { true_pos: 0, false_pos: 0, true_neg: 1, false_neg: 1 }
        );
        assert_eq!(c.total(), 2);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let cfg = cfg();
        assert!(accumulate_confusion(&[PointLabel::Ground], &[40, 40], &cfg).is_err());
    }

    #[test]
    fn mixed_case_matches_brute_force_tally() {
        let cfg = cfg();
        let pred = [
            PointLabel::Ground, PointLabel::NonGround, PointLabel::Ground, PointLabel::Outlier,
            PointLabel::Ground, PointLabel::NonGround, PointLabel::Ground, PointLabel::NonGround,
            PointLabel::Outlier, PointLabel::Ground, PointLabel::NonGround, PointLabel::Ground,
            PointLabel::Ground, PointLabel::NonGround, PointLabel::Outlier, PointLabel::Ground,
            PointLabel::NonGround, PointLabel::Ground, PointLabel::NonGround, PointLabel::Ground,
        ];
        let truth = [
            40u16, 40, 10, 40, 44, 10, 70, 0, 10, 48, 49, 10, 40, 72, 70, 60, 40, 10, 11, 1,
        ];
        let got = accumulate_confusion(&pred, &truth, &cfg).unwrap();
        // Brute-force per-point tally, written out independently.
        let mut expected = ConfusionCounts::default();
        for (p, t) in pred.iter().zip(truth) {
            let tc = map_truth_label(t, &cfg);
            if tc == TruthClass::Ignored {
                continue;
            }
            let pg = *p == PointLabel::Ground;
            let tg = tc == TruthClass::Ground;
            match (pg, tg) {
                (true, true) => expected.true_pos += 1,
                (true, false) => expected.false_pos += 1,
                (false, true) => expected.false_neg += 1,
                (false, false) => expected.true_neg += 1,
            }
        }
        assert_eq!(got, expected);
    }

    #[test]
    fn metrics_formulas() {
        let m = compute_metrics(&ConfusionCounts {
            true_pos: 9,
            false_pos: 1,
            true_neg: 9,
            false_neg: 1,
        });
        assert_eq!(m.precision, Some(0.9));
        assert_eq!(m.recall, Some(0.9));
        assert_eq!(m.f1, Some(0.9));
        assert_eq!(m.accuracy, Some(0.9));
        assert!((m.iou.unwrap() - 9.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_predictions_score_one() {
        let m = compute_metrics(&ConfusionCounts {
            true_pos: 5,
            false_pos: 0,
            true_neg: 3,
            false_neg: 0,
        });
        for v in [m.precision, m.recall, m.f1, m.iou, m.accuracy] {
            assert_eq!(v, Some(1.0));
        }
    }

    #[test]
    fn zero_over_zero_is_undefined_not_nan() {
        let m = compute_metrics(&ConfusionCounts {
            true_pos: 0,
            false_pos: 0,
            true_neg: 7,
            false_neg: 0,
        });
        assert_eq!(m.precision, None);
        assert_eq!(m.recall, None);
        assert_eq!(m.f1, None);
        assert_eq!(m.iou, None);
        assert_eq!(m.accuracy, Some(1.0));
    }

    #[test]
    fn rmse_cases() {
        let truth = vec![1.0, 2.0, 3.0, 4.0];
        let mask = vec![true; 4];
        assert_eq!(terrain_rmse(&truth, &truth, &mask), Some(0.0));
        let biased: Vec<f64> = truth.iter().map(|v| v + 0.5).collect();
        assert!((terrain_rmse(&biased, &truth, &mask).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(terrain_rmse(&truth, &truth, &[false; 4]), None);
    }

    #[test]
    fn rmse_matches_direct_formula_on_random_offsets() {
        let mut offsets = Vec::new();
        let mut state = 0xfeedu64;
        for _ in 0..100 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            offsets.push(((state >> 16) % 1000) as f64 / 500.0 - 1.0);
        }
        let truth = vec![2.0; 100];
        let estimate: Vec<f64> = offsets.iter().map(|o| 2.0 + o).collect();
        let mask: Vec<bool> = (0..100).map(|k| k % 3 != 0).collect();
        let direct = {
            let masked: Vec<f64> = offsets
                .iter()
                .zip(&mask)
                .filter(|(_, &m)| m)
                .map(|(o, _)| o * o)
                .collect();
            (masked.iter().sum::<f64>() / masked.len() as f64).sqrt()
        };
        let got = terrain_rmse(&estimate, &truth, &mask).unwrap();
        assert!((got - direct).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn metrics_are_permutation_invariant(
            pairs in prop::collection::vec((0u8..3, prop::sample::select(vec![40u16, 10, 70, 48, 0])), 1..100),
            rotate in 0usize..100,
        ) {
            let cfg = cfg();
            let to_label = |v: u8| match v {
                0 => PointLabel::Ground,
                1 => PointLabel::NonGround,
                _ => PointLabel::Outlier,
            };
            let pred: Vec<PointLabel> = pairs.iter().map(|(p, _)| to_label(*p)).collect();
            let truth: Vec<u16> = pairs.iter().map(|(_, t)| *t).collect();
            let a = accumulate_confusion(&pred, &truth, &cfg).unwrap();
            let mut rotated = pairs.clone();
            rotated.rotate_left(rotate % pairs.len());
            let pred2: Vec<PointLabel> = rotated.iter().map(|(p, _)| to_label(*p)).collect();
            let truth2: Vec<u16> = rotated.iter().map(|(_, t)| *t).collect();
            let b = accumulate_confusion(&pred2, &truth2, &cfg).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn iou_f1_identity(tp in 0u64..1000, fp in 0u64..1000, fne in 0u64..1000, tn in 0u64..1000) {
            let m = compute_metrics(&ConfusionCounts {
                true_pos: tp,
                false_pos: fp,
                true_neg: tn,
                false_neg: fne,
            });
            if let (Some(f1), Some(iou)) = (m.f1, m.iou) {
                prop_assert!((iou - f1 / (2.0 - f1)).abs() < 1e-12);
                prop_assert!(f1 >= iou - 1e-15);
            }
        }
    }
}
