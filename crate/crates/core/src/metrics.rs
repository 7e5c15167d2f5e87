//! Evaluation metrics: R^2 for regression, error rate for classification.

use crate::data::Task;
use crate::error::TrainError;

/// R^2 = 1 - SS_res / SS_tot.
pub fn r2_score(predictions: &[f64], labels: &[f64]) -> Result<f64, TrainError> {
    if predictions.len() != labels.len() || labels.is_empty() {
        return Err(TrainError::BadMetricInput);
    }
    let mean = labels.iter().sum::<f64>() / labels.len() as f64;
    let ss_tot: f64 = labels.iter().map(|y| (y - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(TrainError::UndefinedR2);
    }
    let ss_res: f64 = predictions
        .iter()
        .zip(labels)
        .map(|(p, y)| (p - y).powi(2))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Fraction misclassified; predictions are probabilities, threshold 0.5.
pub fn classification_error(predictions: &[f64], labels: &[f64]) -> Result<f64, TrainError> {
    if predictions.len() != labels.len() || labels.is_empty() {
        return Err(TrainError::BadMetricInput);
    }
    let wrong = predictions
        .iter()
        .zip(labels)
        .filter(|(p, y)| (**p > 0.5) != (**y > 0.5))
        .count();
    Ok(wrong as f64 / labels.len() as f64)
}

/// Task-dispatching metric; higher-is-better only for regression.
pub fn evaluate(task: Task, predictions: &[f64], labels: &[f64]) -> Result<f64, TrainError> {
    match task {
        Task::Regression => r2_score(predictions, labels),
        Task::Classification => classification_error(predictions, labels),
    }
}
