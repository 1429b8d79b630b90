//! Segment-level evaluation: ground-truth projection onto segments,
//! confusion matrices, per-class precision/recall/F-score, and ranking of
//! sweep results.

use crate::descriptors::FeatureConfig;
use crate::motion::Segment;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while scoring a decoded timeline.
#[derive(Debug, Error)]
pub enum EvaluateError {
    /// A segment reaches past the labeled frame range.
    #[error("frame {0} has no ground-truth label")]
    UnlabeledFrame(usize),
    /// Truth and prediction differ in length.
    #[error("length mismatch: {truth} ground-truth segments vs {predicted} predicted")]
    LengthMismatch { truth: usize, predicted: usize },
    /// A label index is outside the declared class range.
    #[error("class {class} out of range for {n_classes} classes")]
    ClassOutOfRange { class: usize, n_classes: usize },
    /// Ranking needs at least one report.
    #[error("cannot summarize an empty report list")]
    EmptyReportSet,
}

/// Majority frame label per segment. On a tie the key frame's label wins if
/// it is among the tied labels; otherwise the smallest tied label index.
pub fn segment_ground_truth(
    frame_labels: &[usize],
    segments: &[Segment],
) -> Result<Vec<usize>, EvaluateError> {
    let mut out = Vec::with_capacity(segments.len());
    for seg in segments {
        if seg.end_frame >= frame_labels.len() {
            return Err(EvaluateError::UnlabeledFrame(seg.end_frame));
        }
        let mut counts: std::collections::BTreeMap<usize, usize> = std::collections::BTreeMap::new();
        for frame in seg.start_frame..=seg.end_frame {
            *counts.entry(frame_labels[frame]).or_insert(0) += 1;
        }
        let max_count = *counts.values().max().expect("segment is non-empty");
        let tied: Vec<usize> = counts
            .iter()
            .filter(|(_, &c)| c == max_count)
            .map(|(&label, _)| label)
            .collect();
        let key_label = frame_labels[seg.key_frame];
        let label = if tied.contains(&key_label) { key_label } else { tied[0] };
        out.push(label);
    }
    Ok(out)
}

/// Ground truth in rows, predictions in columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        ConfusionMatrix { counts: vec![vec![0; n_classes]; n_classes] }
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, class: usize) -> usize {
        self.counts[class].iter().sum()
    }

    pub fn column_sum(&self, class: usize) -> usize {
        self.counts.iter().map(|row| row[class]).sum()
    }

    /// Row-normalized rendering; all-zero rows stay zero.
    pub fn normalized_rows(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let sum: usize = row.iter().sum();
                if sum == 0 {
                    vec![0.0; row.len()]
                } else {
                    row.iter().map(|&c| c as f64 / sum as f64).collect()
                }
            })
            .collect()
    }
}

/// Tallies per-segment truth against predictions.
pub fn confusion(
    truth: &[usize],
    predicted: &[usize],
    n_classes: usize,
) -> Result<ConfusionMatrix, EvaluateError> {
    if truth.len() != predicted.len() {
        return Err(EvaluateError::LengthMismatch { truth: truth.len(), predicted: predicted.len() });
    }
    let mut cm = ConfusionMatrix::new(n_classes);
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= n_classes {
            return Err(EvaluateError::ClassOutOfRange { class: t, n_classes });
        }
        if p >= n_classes {
            return Err(EvaluateError::ClassOutOfRange { class: p, n_classes });
        }
        cm.counts[t][p] += 1;
    }
    Ok(cm)
}

/// One class's scores; `support` is its ground-truth segment count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub support: usize,
}

/// Per-class and aggregate scores for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub class_labels: Vec<String>,
    pub per_class: Vec<ClassMetrics>,
    /// Averages over classes with non-zero support.
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f_score: f64,
    /// Correct segments over all segments.
    pub micro_accuracy: f64,
    /// The feature subset that produced this report, when known.
    pub features: Option<FeatureConfig>,
    /// Elementary states per activity, when known.
    pub states_per_activity: Option<usize>,
}

fn f_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Per-class precision/recall/F plus macro averages over supported classes
/// and micro accuracy.
pub fn metrics(cm: &ConfusionMatrix, class_labels: &[String]) -> MetricsReport {
    assert_eq!(class_labels.len(), cm.n_classes(), "one label per class");
    let n = cm.n_classes();
    let mut per_class = Vec::with_capacity(n);
    for i in 0..n {
        let row = cm.row_sum(i);
        let col = cm.column_sum(i);
        let hit = cm.counts[i][i];
        let precision = if col == 0 { 0.0 } else { hit as f64 / col as f64 };
        let recall = if row == 0 { 0.0 } else { hit as f64 / row as f64 };
        per_class.push(ClassMetrics {
            precision,
            recall,
            f_score: f_score(precision, recall),
            support: row,
        });
    }
    let supported: Vec<&ClassMetrics> = per_class.iter().filter(|c| c.support > 0).collect();
    let count = supported.len().max(1) as f64;
    let macro_precision = supported.iter().map(|c| c.precision).sum::<f64>() / count;
    let macro_recall = supported.iter().map(|c| c.recall).sum::<f64>() / count;
    let macro_f_score = supported.iter().map(|c| c.f_score).sum::<f64>() / count;
    let total = cm.total();
    let correct: usize = (0..n).map(|i| cm.counts[i][i]).sum();
    let micro_accuracy = if total == 0 { 0.0 } else { correct as f64 / total as f64 };
    MetricsReport {
        class_labels: class_labels.to_vec(),
        per_class,
        macro_precision,
        macro_recall,
        macro_f_score,
        micro_accuracy,
        features: None,
        states_per_activity: None,
    }
}

/// All sweep reports plus the indices of the best rows, mirroring a
/// best-F / best-recall / best-precision summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub reports: Vec<MetricsReport>,
    pub best_f_score: usize,
    pub best_recall: usize,
    pub best_precision: usize,
}

/// Ranks reports by macro F-score, recall, and precision; ties keep the
/// earliest report.
pub fn summarize_sweep(reports: Vec<MetricsReport>) -> Result<SweepSummary, EvaluateError> {
    if reports.is_empty() {
        return Err(EvaluateError::EmptyReportSet);
    }
    let argmax = |key: fn(&MetricsReport) -> f64| -> usize {
        let mut best = 0;
        for (i, r) in reports.iter().enumerate() {
            if key(r) > key(&reports[best]) {
                best = i;
            }
        }
        best
    };
    let best_f_score = argmax(|r| r.macro_f_score);
    let best_recall = argmax(|r| r.macro_recall);
    let best_precision = argmax(|r| r.macro_precision);
    Ok(SweepSummary { reports, best_f_score, best_recall, best_precision })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_segment_keeps_its_label() {
        let labels = vec![2; 10];
        let segments = vec![Segment::new(0, 9)];
        assert_eq!(segment_ground_truth(&labels, &segments).unwrap(), vec![2]);
    }

    #[test]
    fn majority_wins() {
        let labels = vec![0, 0, 0, 1, 1];
        let segments = vec![Segment::new(0, 4)];
        assert_eq!(segment_ground_truth(&labels, &segments).unwrap(), vec![0]);
    }

    #[test]
    fn tie_goes_to_the_key_frame_label() {
        // Frames 0..=3 split 2-2; the key frame of [0,3] is frame 1,
        // labeled 1.
        let labels = vec![0, 1, 1, 0];
        let segments = vec![Segment::new(0, 3)];
        assert_eq!(segment_ground_truth(&labels, &segments).unwrap(), vec![1]);
    }

    #[test]
    fn tie_without_key_frame_support_takes_the_smallest_label() {
        // Four-way frame split 2-2-1 with the key frame on the minority
        // label: fall back to the smallest tied label.
        let labels = vec![3, 3, 2, 1, 1];
        let segments = vec![Segment::new(0, 4)];
        // Key frame = 2, labeled 2, which is not among the tied {1, 3}.
        assert_eq!(segment_ground_truth(&labels, &segments).unwrap(), vec![1]);
    }

    #[test]
    fn unlabeled_frame_is_reported() {
        let labels = vec![0, 0];
        let segments = vec![Segment::new(0, 5)];
        assert!(matches!(
            segment_ground_truth(&labels, &segments),
            Err(EvaluateError::UnlabeledFrame(5))
        ));
    }

    #[test]
    fn equal_sequences_give_a_diagonal_matrix() {
        let truth = vec![0, 1, 2, 1, 0];
        let cm = confusion(&truth, &truth, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(cm.counts[i][j], 0);
                }
            }
        }
        assert_eq!(cm.counts[0][0], 2);
        assert_eq!(cm.counts[1][1], 2);
        assert_eq!(cm.counts[2][2], 1);
    }

    #[test]
    fn single_disagreement_lands_at_truth_row_predicted_column() {
        let cm = confusion(&[0], &[1], 2).unwrap();
        assert_eq!(cm.counts, vec![vec![0, 1], vec![0, 0]]);
    }

    #[test]
    fn random_pairs_match_a_tally_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(80);
        for _ in 0..10 {
            let n = 4;
            let truth: Vec<usize> = (0..50).map(|_| rng.gen_range(0..n)).collect();
            let predicted: Vec<usize> = (0..50).map(|_| rng.gen_range(0..n)).collect();
            let cm = confusion(&truth, &predicted, n).unwrap();
            // Oracle: a direct tally with a map.
            let mut tally = std::collections::HashMap::new();
            for (t, p) in truth.iter().zip(&predicted) {
                *tally.entry((*t, *p)).or_insert(0usize) += 1;
            }
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(cm.counts[i][j], *tally.get(&(i, j)).unwrap_or(&0));
                }
            }
            // Row sums track ground-truth counts regardless of predictions.
            for i in 0..n {
                let truth_count = truth.iter().filter(|&&t| t == i).count();
                assert_eq!(cm.row_sum(i), truth_count);
            }
            assert_eq!(cm.total(), truth.len());
        }
    }

    #[test]
    fn length_mismatch_is_rejected() {
        assert!(matches!(
            confusion(&[0, 1], &[0], 2),
            Err(EvaluateError::LengthMismatch { truth: 2, predicted: 1 })
        ));
    }

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{}", i)).collect()
    }

    #[test]
    fn perfect_diagonal_scores_all_ones() {
        let truth = vec![0, 1, 2, 2, 1, 0, 1];
        let cm = confusion(&truth, &truth, 3).unwrap();
        let report = metrics(&cm, &labels(3));
        for c in &report.per_class {
            assert_eq!(c.precision, 1.0);
            assert_eq!(c.recall, 1.0);
            assert_eq!(c.f_score, 1.0);
        }
        assert_eq!(report.macro_f_score, 1.0);
        assert_eq!(report.micro_accuracy, 1.0);
    }

    #[test]
    fn two_class_matrix_matches_hand_arithmetic() {
        let cm = ConfusionMatrix { counts: vec![vec![8, 2], vec![3, 7]] };
        let report = metrics(&cm, &labels(2));
        let p0 = 8.0 / 11.0;
        let r0 = 0.8;
        assert_relative_eq!(report.per_class[0].precision, p0, epsilon = 1e-12);
        assert_relative_eq!(report.per_class[0].recall, r0, epsilon = 1e-12);
        assert_relative_eq!(
            report.per_class[0].f_score,
            2.0 * p0 * r0 / (p0 + r0),
            epsilon = 1e-12
        );
        let p1 = 7.0 / 9.0;
        let r1 = 0.7;
        assert_relative_eq!(report.per_class[1].precision, p1, epsilon = 1e-12);
        assert_relative_eq!(report.per_class[1].recall, r1, epsilon = 1e-12);
        assert_relative_eq!(report.macro_precision, (p0 + p1) / 2.0, epsilon = 1e-12);
        assert_relative_eq!(report.micro_accuracy, 15.0 / 20.0, epsilon = 1e-12);
    }

    #[test]
    fn unsupported_classes_stay_out_of_the_macro_average() {
        // Class 2 never occurs in the ground truth; macro averages must
        // ignore it while its row still reports zeros.
        let cm = ConfusionMatrix { counts: vec![vec![4, 0, 0], vec![0, 4, 0], vec![0, 0, 0]] };
        let report = metrics(&cm, &labels(3));
        assert_eq!(report.per_class[2].support, 0);
        assert_eq!(report.macro_f_score, 1.0);
        assert_eq!(report.macro_precision, 1.0);
    }

    #[test]
    fn f_score_sits_between_precision_and_recall() {
        let mut rng = ChaCha8Rng::seed_from_u64(81);
        for _ in 0..50 {
            let n = rng.gen_range(2..5);
            let truth: Vec<usize> = (0..60).map(|_| rng.gen_range(0..n)).collect();
            let predicted: Vec<usize> = (0..60).map(|_| rng.gen_range(0..n)).collect();
            let cm = confusion(&truth, &predicted, n).unwrap();
            let report = metrics(&cm, &labels(n));
            for c in &report.per_class {
                assert!(c.precision >= 0.0 && c.precision <= 1.0);
                assert!(c.recall >= 0.0 && c.recall <= 1.0);
                if c.precision > 0.0 && c.recall > 0.0 {
                    let lo = c.precision.min(c.recall);
                    let hi = c.precision.max(c.recall);
                    assert!(c.f_score >= lo - 1e-12 && c.f_score <= hi + 1e-12);
                }
            }
            // Self-comparison is always perfect.
            let self_cm = confusion(&truth, &truth, n).unwrap();
            let self_report = metrics(&self_cm, &labels(n));
            assert_eq!(self_report.micro_accuracy, 1.0);
            assert_eq!(self_report.macro_f_score, 1.0);
        }
    }

    #[test]
    fn sweep_summary_agrees_with_a_recomputed_ranking() {
        let mut rng = ChaCha8Rng::seed_from_u64(82);
        let mut reports = Vec::new();
        for m in [1usize, 3] {
            for _ in 0..2 {
                let n = 3;
                let truth: Vec<usize> = (0..40).map(|_| rng.gen_range(0..n)).collect();
                let predicted: Vec<usize> = truth
                    .iter()
                    .map(|&t| if rng.gen_bool(0.7) { t } else { rng.gen_range(0..n) })
                    .collect();
                let cm = confusion(&truth, &predicted, n).unwrap();
                let mut report = metrics(&cm, &labels(n));
                report.states_per_activity = Some(m);
                reports.push(report);
            }
        }
        let summary = summarize_sweep(reports.clone()).unwrap();
        // Oracle: rescan each metric independently.
        let cases: [(usize, fn(&MetricsReport) -> f64); 3] = [
            (summary.best_f_score, |r| r.macro_f_score),
            (summary.best_recall, |r| r.macro_recall),
            (summary.best_precision, |r| r.macro_precision),
        ];
        for (pick, value) in cases {
            let best = reports.iter().map(value).fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(value(&summary.reports[pick]), best);
            // Earliest index among ties.
            let first = reports.iter().position(|r| value(r) == best).unwrap();
            assert_eq!(pick, first);
        }
        assert!(matches!(summarize_sweep(vec![]), Err(EvaluateError::EmptyReportSet)));
    }
}
