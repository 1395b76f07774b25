use serde::{Deserialize, Serialize};

use super::EvalError;

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub class_order: Vec<i64>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(class_order: Vec<i64>, counts: Vec<Vec<u64>>) -> Result<Self, EvalError> {
        let k = class_order.len();
        if counts.len() != k || counts.iter().any(|r| r.len() != k) {
            return Err(EvalError::DimensionMismatch(format!("expected {k}x{k} counts")));
        }
        Ok(Self { class_order, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }
}

pub fn confusion_matrix<T: Copy + Into<i64>>(
    y_true: &[T],
    y_pred: &[T],
    class_order: &[i64],
) -> Result<ConfusionMatrix, EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch { left: y_true.len(), right: y_pred.len() });
    }
    let mut order = class_order.to_vec();
    order.sort_unstable();
    order.dedup();
    let k = order.len();
    let idx = |v: i64| order.binary_search(&v).map_err(|_| EvalError::UnknownLabel(v));
    let mut counts = vec![vec![0u64; k]; k];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        counts[idx(t.into())?][idx(p.into())?] += 1;
    }
    Ok(ConfusionMatrix { class_order: order, counts })
}

/// A metric value; `undefined` marks a zero denominator, in which case the
/// value is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub value: f64,
    pub undefined: bool,
}

impl Metric {
    fn ratio(num: f64, den: f64) -> Metric {
        if den == 0.0 {
            Metric { value: 0.0, undefined: true }
        } else {
            Metric { value: num / den, undefined: false }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: i64,
    pub support: u64,
    pub precision: Metric,
    pub recall: Metric,
    pub f1: Metric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub total: u64,
}

pub fn classification_report(cm: &ConfusionMatrix) -> Result<ClassificationReport, EvalError> {
    let k = cm.counts.len();
    let total = cm.total();
    if k == 0 || total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let mut per_class = Vec::with_capacity(k);
    for i in 0..k {
        let tp = cm.counts[i][i] as f64;
        let row: u64 = cm.counts[i].iter().sum();
        let col: u64 = cm.counts.iter().map(|r| r[i]).sum();
        let precision = Metric::ratio(tp, col as f64);
        let recall = Metric::ratio(tp, row as f64);
        let f1 = if precision.undefined || recall.undefined {
            Metric { value: 0.0, undefined: true }
        } else {
            Metric::ratio(2.0 * precision.value * recall.value, precision.value + recall.value)
        };
        per_class.push(ClassMetrics { class: cm.class_order[i], support: row, precision, recall, f1 });
    }
    let avg = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / k as f64;
    Ok(ClassificationReport {
        accuracy: cm.trace() as f64 / total as f64,
        macro_precision: avg(|c| c.precision.value),
        macro_recall: avg(|c| c.recall.value),
        macro_f1: avg(|c| c.f1.value),
        per_class,
        total,
    })
}

/// Macro-averaged F1 over the classes present in either input; 0 when empty.
pub fn macro_f1(y_true: &[i8], y_pred: &[i8]) -> f64 {
    let mut order: Vec<i64> = y_true.iter().chain(y_pred).map(|&v| v as i64).collect();
    order.sort_unstable();
    order.dedup();
    confusion_matrix(y_true, y_pred, &order)
        .and_then(|cm| classification_report(&cm))
        .map(|r| r.macro_f1)
        .unwrap_or(0.0)
}
