//! Confusion matrices, per-class precision/recall/F1 and the macro-F1
//! challenge criterion (mean of the eight per-class F1 scores).

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{ExpressionClass, CLASS_COUNT};

/// `counts[t][p]` = samples of true class `t` predicted as `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub counts: [[u64; CLASS_COUNT]; CLASS_COUNT],
}

impl ConfusionMatrix {
    pub fn add(&mut self, truth: ExpressionClass, predicted: ExpressionClass) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn col_sum(&self, class: usize) -> u64 {
        self.counts.iter().map(|row| row[class]).sum()
    }
}

pub fn confusion(
    predictions: &[ExpressionClass],
    labels: &[ExpressionClass],
) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch {
            what: "predictions vs labels",
            left: predictions.len(),
            right: labels.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &t) in predictions.iter().zip(labels) {
        cm.add(t, p);
    }
    Ok(cm)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1_from(precision: f64, recall: f64) -> f64 {
    let s = precision + recall;
    if s == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / s
    }
}

pub fn precision_per_class(cm: &ConfusionMatrix) -> [f64; CLASS_COUNT] {
    std::array::from_fn(|c| ratio(cm.counts[c][c], cm.col_sum(c)))
}

pub fn recall_per_class(cm: &ConfusionMatrix) -> [f64; CLASS_COUNT] {
    std::array::from_fn(|c| ratio(cm.counts[c][c], cm.row_sum(c)))
}

/// Per-class F1; any 0/0 is taken as 0.
pub fn f1_per_class(cm: &ConfusionMatrix) -> [f64; CLASS_COUNT] {
    let precision = precision_per_class(cm);
    let recall = recall_per_class(cm);
    std::array::from_fn(|c| f1_from(precision[c], recall[c]))
}

/// Sum of per-class F1 divided by 8, whether or not every class occurs.
pub fn macro_f1(cm: &ConfusionMatrix) -> f64 {
    f1_per_class(cm).iter().sum::<f64>() / CLASS_COUNT as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_class_precision: [f64; CLASS_COUNT],
    pub per_class_recall: [f64; CLASS_COUNT],
    pub per_class_f1: [f64; CLASS_COUNT],
    pub support: [u64; CLASS_COUNT],
    pub macro_f1: f64,
    pub samples: u64,
}

impl EvalReport {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Self {
        let per_class_f1 = f1_per_class(cm);
        Self {
            per_class_precision: precision_per_class(cm),
            per_class_recall: recall_per_class(cm),
            per_class_f1,
            support: std::array::from_fn(|c| cm.row_sum(c)),
            macro_f1: macro_f1(cm),
            samples: cm.total(),
        }
    }

    /// `key = value` lines followed by a `class,precision,recall,f1,support` table.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "macro_f1 = {}", self.macro_f1).unwrap();
        writeln!(out, "samples = {}", self.samples).unwrap();
        for c in ExpressionClass::ALL {
            writeln!(out, "f1.{} = {}", c.name(), self.per_class_f1[c.index()]).unwrap();
        }
        out.push('\n');
        out.push_str("class,precision,recall,f1,support\n");
        for c in ExpressionClass::ALL {
            let i = c.index();
            writeln!(
                out,
                "{},{},{},{},{}",
                c.name(),
                self.per_class_precision[i],
                self.per_class_recall[i],
                self.per_class_f1[i],
                self.support[i]
            )
            .unwrap();
        }
        out
    }
}

pub fn evaluate(predictions: &[ExpressionClass], labels: &[ExpressionClass]) -> Result<EvalReport> {
    confusion(predictions, labels).map(|cm| EvalReport::from_confusion(&cm))
}
