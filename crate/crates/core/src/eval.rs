//! Nearest-centroid classification over frozen embeddings, and accuracy /
//! macro-F1 scoring.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::annotation::AnnotatedSet;
use crate::corpus::{Corpus, LabelSet};
use crate::error::{Error, Result};
use crate::geometry::{cosine_with_norms, norm, EmbeddingSet};

/// One mean vector per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidClassifier {
    pub dim: usize,
    pub centroids: BTreeMap<String, Vec<f64>>,
}

/// Per-class arithmetic mean of the training vectors.
pub fn fit(train: &AnnotatedSet, emb: &EmbeddingSet) -> Result<CentroidClassifier> {
    if let Some((label, _)) = train.per_class_counts().iter().find(|(_, &c)| c == 0) {
        return Err(Error::Validation(format!("class {label:?} has no training examples")));
    }
    if train.is_empty() {
        return Err(Error::Validation("no training examples".into()));
    }
    let dim = emb.dim();
    let mut sums: BTreeMap<String, (Vec<f64>, usize)> = BTreeMap::new();
    for r in train.records() {
        let v = emb.get(&r.id).ok_or_else(|| Error::UnknownId(r.id.clone()))?;
        let (sum, count) = sums
            .entry(r.label.clone())
            .or_insert_with(|| (vec![0.0; dim], 0));
        for (s, &x) in sum.iter_mut().zip(v) {
            *s += f64::from(x);
        }
        *count += 1;
    }
    let centroids = sums
        .into_iter()
        .map(|(label, (sum, count))| {
            let c = count as f64;
            (label, sum.into_iter().map(|s| s / c).collect())
        })
        .collect();
    Ok(CentroidClassifier { dim, centroids })
}

impl CentroidClassifier {
    /// Label with the highest cosine to `v`; ties go to the smaller label. A
    /// zero centroid scores 0.
    pub fn classify(&self, v: &[f64]) -> Result<&str> {
        let nv = norm(v);
        if nv == 0.0 {
            return Err(Error::Domain("cannot classify a zero vector".into()));
        }
        let mut best: Option<(&str, f64)> = None;
        for (label, c) in &self.centroids {
            let nc = norm(c);
            let s = if nc == 0.0 { 0.0 } else { cosine_with_norms(v, c, nv, nc) };
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((label, s));
            }
        }
        best.map(|(l, _)| l)
            .ok_or_else(|| Error::Validation("classifier has no classes".into()))
    }
}

pub fn predict(model: &CentroidClassifier, emb: &EmbeddingSet, ids: &[String]) -> Result<BTreeMap<String, String>> {
    ids.iter()
        .map(|id| {
            let v = emb.vector_f64(id)?;
            Ok((id.clone(), model.classify(&v)?.to_string()))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class_f1: BTreeMap<String, f64>,
    pub support: BTreeMap<String, usize>,
    /// Row and column order of `confusion`.
    pub labels: Vec<String>,
    /// `confusion[gold][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

/// One-vs-rest F1 from a confusion matrix; 0 when precision + recall is 0.
pub fn f1_from_confusion(confusion: &[Vec<usize>], class: usize) -> f64 {
    let tp = confusion[class][class] as f64;
    let predicted: usize = confusion.iter().map(|row| row[class]).sum();
    let actual: usize = confusion[class].iter().sum();
    let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
    let recall = if actual == 0 { 0.0 } else { tp / actual as f64 };
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Scores predictions against gold labels. Macro-F1 averages over every
/// class of `labels`, including classes absent from the gold data.
pub fn evaluate(predictions: &BTreeMap<String, String>, gold: &Corpus, labels: &LabelSet) -> Result<EvalReport> {
    if predictions.is_empty() {
        return Err(Error::Domain("no predictions to evaluate".into()));
    }
    let k = labels.n_classes();
    let mut confusion = vec![vec![0usize; k]; k];
    let mut missing = Vec::new();
    for (id, predicted) in predictions {
        let doc = gold.get(id).ok_or_else(|| Error::UnknownId(id.clone()))?;
        let Some(truth) = doc.gold_label.as_deref() else {
            missing.push(id.clone());
            continue;
        };
        let g = labels
            .position(truth)
            .ok_or_else(|| Error::UnknownLabel(truth.to_string()))?;
        let p = labels
            .position(predicted)
            .ok_or_else(|| Error::UnknownLabel(predicted.clone()))?;
        confusion[g][p] += 1;
    }
    if !missing.is_empty() {
        return Err(Error::MissingLabels(missing));
    }
    let total: usize = confusion.iter().flatten().sum();
    let correct: usize = (0..k).map(|i| confusion[i][i]).sum();
    let f1: Vec<f64> = (0..k).map(|c| f1_from_confusion(&confusion, c)).collect();
    let macro_f1 = if k == 0 { 0.0 } else { f1.iter().sum::<f64>() / k as f64 };
    let names = labels.labels();
    Ok(EvalReport {
        accuracy: correct as f64 / total as f64,
        macro_f1,
        per_class_f1: names.iter().cloned().zip(f1).collect(),
        support: names
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), confusion[i].iter().sum()))
            .collect(),
        labels: names.to_vec(),
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::AnnotationRecord;
    use crate::corpus::Document;

    fn emb(rows: &[(&str, &[f32])]) -> EmbeddingSet {
        EmbeddingSet::new(
            rows[0].1.len(),
            rows.iter().map(|(id, v)| (id.to_string(), v.to_vec())).collect(),
        )
        .unwrap()
    }

    fn train(pairs: &[(&str, &str)]) -> AnnotatedSet {
        AnnotatedSet::from_records(pairs.iter().map(|(id, l)| AnnotationRecord {
            id: id.to_string(),
            label: l.to_string(),
        }))
        .unwrap()
    }

    #[test]
    fn centroid_is_mean() {
        let e = emb(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0]), ("c", &[3.0, 3.0])]);
        let m = fit(&train(&[("a", "x"), ("b", "x"), ("c", "y")]), &e).unwrap();
        assert_eq!(m.centroids["x"], vec![0.5, 0.5]);
        assert_eq!(m.centroids["y"], vec![3.0, 3.0]);
    }

    #[test]
    fn missing_embedding_named() {
        let e = emb(&[("a", &[1.0, 0.0])]);
        match fit(&train(&[("a", "x"), ("zz", "y")]), &e) {
            Err(Error::UnknownId(id)) => assert_eq!(id, "zz"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn predict_ties_to_smaller_label() {
        let e = emb(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0]), ("q", &[1.0, 1.0])]);
        let m = fit(&train(&[("a", "b-label"), ("b", "a-label")]), &e).unwrap();
        let p = predict(&m, &e, &["q".to_string(), "a".to_string()]).unwrap();
        assert_eq!(p["q"], "a-label");
        assert_eq!(p["a"], "b-label");
    }

    #[test]
    fn hand_confusion_matrix() {
        let gold = Corpus::new(vec![
            Document::labeled("1", "t", "x"),
            Document::labeled("2", "t", "x"),
            Document::labeled("3", "t", "y"),
            Document::labeled("4", "t", "y"),
        ])
        .unwrap();
        let preds: BTreeMap<String, String> = [("1", "x"), ("2", "y"), ("3", "y"), ("4", "y")]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        let labels = LabelSet::new(["x", "y"]).unwrap();
        let r = evaluate(&preds, &gold, &labels).unwrap();
        assert_eq!(r.accuracy, 0.75);
        assert!((r.per_class_f1["x"] - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.per_class_f1["y"] - 0.8).abs() < 1e-12);
        assert!((r.macro_f1 - (2.0 / 3.0 + 0.8) / 2.0).abs() < 1e-12);

        let all_right: BTreeMap<String, String> = [("1", "x"), ("2", "x"), ("3", "y"), ("4", "y")]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        let r = evaluate(&all_right, &gold, &labels).unwrap();
        assert_eq!((r.accuracy, r.macro_f1), (1.0, 1.0));
    }

    #[test]
    fn prediction_outside_label_set() {
        let gold = Corpus::new(vec![Document::labeled("1", "t", "x")]).unwrap();
        let preds = BTreeMap::from([("1".to_string(), "z".to_string())]);
        let two = LabelSet::new(["x", "y"]).unwrap();
        assert!(matches!(evaluate(&preds, &gold, &two), Err(Error::UnknownLabel(_))));

        // a predicted class with no gold support only costs its own precision
        let three = LabelSet::new(["x", "y", "z"]).unwrap();
        let r = evaluate(&preds, &gold, &three).unwrap();
        assert_eq!(r.accuracy, 0.0);
        assert_eq!(r.per_class_f1["z"], 0.0);
        assert_eq!(r.support["z"], 0);
    }
}
