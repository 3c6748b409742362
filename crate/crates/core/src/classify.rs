//! MAP classification and evaluation metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::Dataset;
use crate::tree::FittedClassifier;

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: usize,
    /// P(c | x) for every class code.
    pub posterior: Vec<f64>,
}

/// Index of the largest value; ties go to the smallest index.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Most probable class for a row of feature codes (no class column), in the
/// model's variable order.
pub fn predict(model: &FittedClassifier, features: &[usize]) -> Result<Prediction> {
    let schema = model.schema();
    if features.len() != schema.n_features() {
        return Err(Error::RowWidth {
            expected: schema.n_features(),
            got: features.len(),
        });
    }
    for (i, &x) in features.iter().enumerate() {
        schema.check_code(i + 1, x)?;
    }
    let mut logs = Vec::with_capacity(schema.class_cardinality());
    model.class_log_joints(features, &mut logs);
    posterior_from_logs(&logs)
}

fn posterior_from_logs(logs: &[f64]) -> Result<Prediction> {
    let class = argmax(logs).ok_or(Error::ZeroProbability)?;
    let top = logs[class];
    if top == f64::NEG_INFINITY {
        return Err(Error::ZeroProbability);
    }
    let weights: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let z: f64 = weights.iter().sum();
    Ok(Prediction {
        class,
        posterior: weights.into_iter().map(|w| w / z).collect(),
    })
}

/// Predictions for every record of `data`; its class column is ignored.
/// `data` must already be in the model's variable order.
pub fn predict_dataset(model: &FittedClassifier, data: &Dataset) -> Result<Vec<Prediction>> {
    if data.schema() != model.schema() {
        return Err(Error::Domain("dataset schema differs from the model's".into()));
    }
    let mut logs = Vec::new();
    data.rows()
        .map(|r| {
            model.class_log_joints(&r[1..], &mut logs);
            posterior_from_logs(&logs)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub balanced_accuracy: f64,
    pub macro_precision: f64,
}

/// Accuracy plus macro-averaged F1, recall (balanced accuracy) and
/// precision. Macro means run over the classes present in `truth`; 0/0 is 0.
pub fn metrics(predictions: &[usize], truth: &[usize]) -> Result<Metrics> {
    if predictions.len() != truth.len() {
        return Err(Error::LengthMismatch(predictions.len(), truth.len()));
    }
    if truth.is_empty() {
        return Err(Error::Domain("metrics need at least one label".into()));
    }
    let k = truth.iter().chain(predictions).max().unwrap() + 1;
    let mut tp = vec![0usize; k];
    let mut predicted = vec![0usize; k];
    let mut actual = vec![0usize; k];
    for (&p, &t) in predictions.iter().zip(truth) {
        predicted[p] += 1;
        actual[t] += 1;
        if p == t {
            tp[t] += 1;
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let present: Vec<usize> = (0..k).filter(|&c| actual[c] > 0).collect();
    let m = present.len() as f64;
    let (mut f1, mut rec, mut prec) = (0.0, 0.0, 0.0);
    for &c in &present {
        let p = ratio(tp[c], predicted[c]);
        let r = ratio(tp[c], actual[c]);
        prec += p;
        rec += r;
        f1 += if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    }
    Ok(Metrics {
        accuracy: ratio(tp.iter().sum(), truth.len()),
        macro_f1: f1 / m,
        balanced_accuracy: rec / m,
        macro_precision: prec / m,
    })
}

/// Entropy of the empirical label distribution divided by ln(n_classes).
pub fn normalized_entropy(labels: &[usize], n_classes: usize) -> f64 {
    if labels.is_empty() || n_classes < 2 {
        return 0.0;
    }
    let mut counts = vec![0usize; n_classes.max(labels.iter().max().unwrap() + 1)];
    for &l in labels {
        counts[l] += 1;
    }
    let n = labels.len() as f64;
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum();
    h / (n_classes as f64).ln()
}
