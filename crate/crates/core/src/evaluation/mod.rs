//! Scoring, the training-set-size sweep and the cross-domain similarity
//! analysis.

mod similarity;
mod sweep;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::model::Model;

pub use similarity::{cosine, representation_similarity, vector_similarity, DomainSimilarity, SimilarityReport, DEFAULT_SAMPLE_CAP};
pub use sweep::{sample_complexity_sweep, sweep_csv, sweep_subset, SweepRow};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelStats {
    pub label: String,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub instances: usize,
    pub none_label: String,
    /// Micro scores over every label except `none_label`.
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Unweighted mean of the per-label F1 values, `none_label` excluded.
    /// This only approximates the official SemEval scorer.
    pub macro_f1: f64,
    pub per_label: Vec<LabelStats>,
    pub labels: Vec<String>,
    /// `confusion[gold][predicted]`, indexed like `labels`.
    pub confusion: Vec<Vec<usize>>,
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Scores aligned predictions against golds. Every string must belong to
/// `labels`.
pub fn score<S: AsRef<str>>(preds: &[S], golds: &[S], labels: &[String], none_label: &str) -> Result<ScoreReport> {
    if preds.len() != golds.len() {
        return Err(Error::Shape(format!("{} predictions for {} gold labels", preds.len(), golds.len())));
    }
    let index: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let lookup = |l: &str| index.get(l).copied().ok_or_else(|| Error::Validation(format!("label {l:?} outside the label set")));
    let k = labels.len();
    let mut confusion = vec![vec![0usize; k]; k];
    for (p, g) in preds.iter().zip(golds) {
        let (pi, gi) = (lookup(p.as_ref())?, lookup(g.as_ref())?);
        confusion[gi][pi] += 1;
    }

    let none = index.get(none_label).copied();
    let mut per_label = Vec::new();
    let (mut tp_all, mut pred_all, mut gold_all) = (0, 0, 0);
    for (i, label) in labels.iter().enumerate() {
        if Some(i) == none {
            continue;
        }
        let tp = confusion[i][i];
        let predicted: usize = (0..k).map(|g| confusion[g][i]).sum();
        let gold: usize = confusion[i].iter().sum();
        tp_all += tp;
        pred_all += predicted;
        gold_all += gold;
        let (p, r) = (ratio(tp, predicted), ratio(tp, gold));
        per_label.push(LabelStats {
            label: label.clone(),
            true_positives: tp,
            false_positives: predicted - tp,
            false_negatives: gold - tp,
            precision: p,
            recall: r,
            f1: f1(p, r),
        });
    }
    let (p, r) = (ratio(tp_all, pred_all), ratio(tp_all, gold_all));
    let macro_f1 = if per_label.is_empty() {
        0.0
    } else {
        per_label.iter().map(|s| s.f1).sum::<f64>() / per_label.len() as f64
    };
    Ok(ScoreReport {
        instances: preds.len(),
        none_label: none_label.to_string(),
        precision: p,
        recall: r,
        f1: f1(p, r),
        macro_f1,
        per_label,
        labels: labels.to_vec(),
        confusion,
    })
}

/// Predicts every instance of `corpus` and scores against the gold labels.
/// Gold labels unknown to the model are an error.
pub fn evaluate(model: &Model, corpus: &Corpus) -> Result<ScoreReport> {
    if corpus.is_empty() {
        return Err(Error::Precondition("cannot evaluate on an empty corpus".into()));
    }
    let mut preds = Vec::with_capacity(corpus.len());
    let mut golds = Vec::with_capacity(corpus.len());
    for inst in &corpus.instances {
        preds.push(model.predict_label(inst)?.to_string());
        golds.push(inst.label.clone());
    }
    score(&preds, &golds, &model.vocab.labels, crate::corpus::NONE_LABEL)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels() -> Vec<String> {
        ["A", "B", "None"].iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn perfect_predictions() {
        let g = ["A", "B", "None", "A"];
        let r = score(&g, &g, &labels(), "None").unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn hand_counted_case() {
        // 4 gold non-None, 3 predicted non-None, 2 correct.
        let golds = ["A", "A", "B", "B", "None"];
        let preds = ["A", "None", "B", "None", "A"];
        let r = score(&preds, &golds, &labels(), "None").unwrap();
        assert!((r.precision - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.recall, 0.5);
        assert!((r.f1 - 0.571_429).abs() < 1e-6);
        assert_eq!(r.confusion, vec![vec![1, 0, 1], vec![0, 1, 1], vec![1, 0, 0]]);
    }

    #[test]
    fn all_none_predictions() {
        let r = score(&["None", "None"], &["A", "B"], &labels(), "None").unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn unknown_label_and_length_mismatch() {
        assert!(matches!(score(&["C"], &["A"], &labels(), "None"), Err(Error::Validation(_))));
        assert!(score(&["A"], &["A", "B"], &labels(), "None").is_err());
    }
}
