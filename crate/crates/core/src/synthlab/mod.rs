//! Synthetic Gaussian blob datasets and a linear softmax reference learner
//! that records genuine training dynamics.

mod blobs;
mod trainer;

pub use blobs::{four_blob_spec, generate_blobs, stratified_holdout, BlobSpec, Holdout, HOLDOUT_EVERY};
pub use trainer::{train_ensemble, train_reference, LinearModel, TrainConfig, TrainResult};

use serde::Serialize;

use crate::error::{HlabError, Result};

/// One-vs-rest precision and recall per class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassReport {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    /// Classes that received no predictions; their precision is reported as 0.
    pub precision_undefined: Vec<bool>,
    pub accuracy: f64,
}

impl ClassReport {
    pub fn mean_recall(&self) -> f64 {
        self.recall.iter().sum::<f64>() / self.recall.len() as f64
    }

    /// `max - min` class recall.
    pub fn recall_gap(&self) -> f64 {
        let (lo, hi) = self
            .recall
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)));
        hi - lo
    }
}

pub fn class_metrics(predictions: &[usize], labels: &[usize], k_classes: usize) -> Result<ClassReport> {
    if predictions.len() != labels.len() {
        return Err(HlabError::Incompatible(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let mut tp = vec![0usize; k_classes];
    let mut predicted = vec![0usize; k_classes];
    let mut actual = vec![0usize; k_classes];
    for (&p, &y) in predictions.iter().zip(labels) {
        if p >= k_classes || y >= k_classes {
            return Err(HlabError::Parameter(format!("class id outside 0..{k_classes}")));
        }
        predicted[p] += 1;
        actual[y] += 1;
        if p == y {
            tp[y] += 1;
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(ClassReport {
        precision: (0..k_classes).map(|c| ratio(tp[c], predicted[c])).collect(),
        recall: (0..k_classes).map(|c| ratio(tp[c], actual[c])).collect(),
        precision_undefined: predicted.iter().map(|&p| p == 0).collect(),
        accuracy: ratio(tp.iter().sum(), labels.len()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_collapsed_predictions() {
        let labels = [0, 1, 0, 1];
        let r = class_metrics(&labels, &labels, 2).unwrap();
        assert_eq!((r.precision.clone(), r.recall.clone()), (vec![1.0, 1.0], vec![1.0, 1.0]));
        let r = class_metrics(&[0, 0, 0, 0], &labels, 2).unwrap();
        assert_eq!(r.recall, vec![1.0, 0.0]);
        assert_eq!(r.precision, vec![0.5, 0.0]);
        assert_eq!(r.precision_undefined, vec![false, true]);
        assert_eq!(r.recall_gap(), 1.0);
        assert!(class_metrics(&[0], &labels, 2).is_err());
    }
}
