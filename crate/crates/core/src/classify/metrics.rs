use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::ClassifyError;

/// Label used for out-of-scope predictions and gold answers.
pub const NONE_LABEL: &str = "None";

pub fn label_of(topic: Option<&str>) -> String {
    topic.unwrap_or(NONE_LABEL).to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub per_class: BTreeMap<String, ClassMetrics>,
    pub macro_f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy, per-class precision/recall/F1 and macro F1 over
/// `(gold, predicted)` pairs.
///
/// Per-class rows cover every label seen as gold or prediction, and macro F1
/// averages all of them, so a label that is only ever predicted counts with
/// F1 0. Labels seen in neither column play no part. Undefined ratios are 0.
pub fn evaluate(pairs: &[(String, String)]) -> Result<MetricsReport, ClassifyError> {
    if pairs.is_empty() {
        return Err(ClassifyError::EmptyEvaluation);
    }
    let classes: BTreeSet<&str> = pairs
        .iter()
        .flat_map(|(g, p)| [g.as_str(), p.as_str()])
        .collect();
    let mut per_class = BTreeMap::new();
    for c in classes {
        let tp = pairs.iter().filter(|(g, p)| g == c && p == c).count();
        let predicted = pairs.iter().filter(|(_, p)| p == c).count();
        let support = pairs.iter().filter(|(g, _)| g == c).count();
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per_class.insert(
            c.to_string(),
            ClassMetrics {
                precision,
                recall,
                f1,
                support,
            },
        );
    }
    let correct = pairs.iter().filter(|(g, p)| g == p).count();
    let macro_f1 = per_class.values().map(|m| m.f1).sum::<f64>() / per_class.len() as f64;
    Ok(MetricsReport {
        accuracy: ratio(correct, pairs.len()),
        per_class,
        macro_f1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(gold: &[&str], pred: &[&str]) -> Vec<(String, String)> {
        gold.iter()
            .zip(pred)
            .map(|(g, p)| (g.to_string(), p.to_string()))
            .collect()
    }

    #[test]
    fn hand_example() {
        let r = evaluate(&pairs(&["A", "A", "B", "B"], &["A", "B", "B", "B"])).unwrap();
        assert_eq!(r.accuracy, 0.75);
        assert!((r.per_class["A"].f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.per_class["B"].f1 - 0.8).abs() < 1e-12);
        assert!((r.macro_f1 - 0.7333).abs() < 1e-4);
    }

    #[test]
    fn perfect() {
        let r = evaluate(&pairs(&["A", "B", "C"], &["A", "B", "C"])).unwrap();
        assert_eq!((r.accuracy, r.macro_f1), (1.0, 1.0));
    }

    #[test]
    fn prediction_only_label_enters_the_mean_at_zero() {
        // A: precision 1, recall 1/2, F1 2/3. X: never gold, F1 0.
        let r = evaluate(&pairs(&["A", "A"], &["A", "X"])).unwrap();
        assert_eq!(r.per_class["X"].f1, 0.0);
        assert_eq!(r.per_class["X"].support, 0);
        assert!((r.macro_f1 - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_is_error() {
        assert!(evaluate(&[]).is_err());
    }
}
