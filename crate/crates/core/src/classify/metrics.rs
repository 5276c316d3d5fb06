use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{distinct, ClassifyError};
use crate::corpus::ZeusCode;

/// Precision, recall and F1 for one class together with its averaging weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Macro (unweighted) and weighted means of per-class scores.
///
/// Weights are used as given; callers pass support fractions.
pub fn average_scores(scores: &[ClassScores]) -> (Averages, Averages) {
    let n = scores.len() as f64;
    let macro_avg = Averages {
        precision: scores.iter().map(|s| s.precision).sum::<f64>() / n,
        recall: scores.iter().map(|s| s.recall).sum::<f64>() / n,
        f1: scores.iter().map(|s| s.f1).sum::<f64>() / n,
    };
    let weighted = Averages {
        precision: scores.iter().map(|s| s.weight * s.precision).sum(),
        recall: scores.iter().map(|s| s.weight * s.recall).sum(),
        f1: scores.iter().map(|s| s.weight * s.f1).sum(),
    };
    (macro_avg, weighted)
}

fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropRule {
    /// Fewer true samples than `min_class_support`.
    LowSupport,
    /// Never predicted, so precision is undefined.
    NeverPredicted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedClass {
    pub code: ZeusCode,
    pub support: usize,
    pub predicted: usize,
    pub reason: DropRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub code: ZeusCode,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    /// Share of the support of all retained classes.
    pub support_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Row and column labels of `confusion`, sorted.
    pub classes: Vec<ZeusCode>,
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub per_class: Vec<ClassMetrics>,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    pub dropped_classes: Vec<DroppedClass>,
    pub accuracy: f64,
    pub n_samples: usize,
}

/// Confusion matrix and averaged scores.
///
/// Classes with fewer than `min_class_support` true samples, or that were
/// never predicted, are left out of the averages and listed as dropped.
pub fn evaluate(
    predictions: &[ZeusCode],
    truth: &[ZeusCode],
    min_class_support: usize,
) -> Result<MetricsReport, ClassifyError> {
    if predictions.len() != truth.len() {
        return Err(ClassifyError::LengthMismatch {
            what: "predictions",
            expected: truth.len(),
            actual: predictions.len(),
        });
    }
    if truth.is_empty() {
        return Err(ClassifyError::EmptyEvaluation);
    }
    let mut all: Vec<ZeusCode> = truth.iter().chain(predictions).copied().collect();
    all = distinct(&all);
    let k = all.len();
    let idx = |c: &ZeusCode| all.binary_search(c).expect("class collected above");
    let mut confusion = vec![vec![0usize; k]; k];
    for (t, p) in truth.iter().zip(predictions) {
        confusion[idx(t)][idx(p)] += 1;
    }

    let mut dropped = Vec::new();
    let mut retained = Vec::new();
    for (i, &code) in all.iter().enumerate() {
        let support: usize = confusion[i].iter().sum();
        let predicted: usize = confusion.iter().map(|row| row[i]).sum();
        let reason = if support < min_class_support.max(1) {
            Some(DropRule::LowSupport)
        } else if predicted == 0 {
            Some(DropRule::NeverPredicted)
        } else {
            None
        };
        match reason {
            Some(reason) => dropped.push(DroppedClass {
                code,
                support,
                predicted,
                reason,
            }),
            None => retained.push((i, code, support, predicted)),
        }
    }
    if retained.is_empty() {
        return Err(ClassifyError::NoRetainedClasses);
    }
    let retained_support: usize = retained.iter().map(|r| r.2).sum();
    let per_class: Vec<ClassMetrics> = retained
        .iter()
        .map(|&(i, code, support, predicted)| {
            let tp = confusion[i][i] as f64;
            let precision = tp / predicted as f64;
            let recall = tp / support as f64;
            ClassMetrics {
                code,
                precision,
                recall,
                f1: f1(precision, recall),
                support,
                support_fraction: support as f64 / retained_support as f64,
            }
        })
        .collect();
    let scores: Vec<ClassScores> = per_class
        .iter()
        .map(|m| ClassScores {
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            weight: m.support_fraction,
        })
        .collect();
    let (macro_avg, weighted_avg) = average_scores(&scores);
    let correct = (0..k).map(|i| confusion[i][i]).sum::<usize>();
    Ok(MetricsReport {
        classes: all,
        confusion,
        per_class,
        macro_avg,
        weighted_avg,
        dropped_classes: dropped,
        accuracy: correct as f64 / truth.len() as f64,
        n_samples: truth.len(),
    })
}

impl MetricsReport {
    /// Per-class table with support fractions, followed by the two averages.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<14} {:>9} {:>7} {:>8} {:>8}", "ZEUS_02-08", "Precision", "Recall", "F1", "Support");
        for m in &self.per_class {
            let _ = writeln!(
                out,
                "{:<14} {:>9.2} {:>7.2} {:>8.2} {:>8.2}",
                m.code.as_str(),
                m.precision,
                m.recall,
                m.f1,
                m.support_fraction
            );
        }
        for (name, a) in [("Macro Avg", &self.macro_avg), ("Weighted Avg", &self.weighted_avg)] {
            let _ = writeln!(
                out,
                "{:<14} {:>9.2} {:>7.2} {:>8.2} {:>8.2}",
                name, a.precision, a.recall, a.f1, 1.0
            );
        }
        for d in &self.dropped_classes {
            let why = match d.reason {
                DropRule::LowSupport => "too few samples",
                DropRule::NeverPredicted => "never predicted",
            };
            let _ = writeln!(out, "dropped {} ({why}, support {})", d.code, d.support);
        }
        out
    }
}

/// Side-by-side averages for several models.
pub fn render_comparison(rows: &[(String, MetricsReport)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<12} {:<14} {:>9} {:>7} {:>8}", "Model", "Average", "Precision", "Recall", "F1");
    for (name, report) in rows {
        for (label, a) in [("Macro Avg", &report.macro_avg), ("Weighted Avg", &report.weighted_avg)] {
            let _ = writeln!(
                out,
                "{:<12} {:<14} {:>9.2} {:>7.2} {:>8.2}",
                name, label, a.precision, a.recall, a.f1
            );
        }
    }
    out
}
