//! Learned disaggregation: features, feature selection, a random-forest
//! classifier of empty-storage periods, and its evaluation.

mod features;
mod forest;
mod logistic;

pub use features::{build_features, feature_name, FeatureMatrix, BASE_FEATURES};
pub use forest::{
    fit_forest, train_forest, FeatureFraction, ForestGrid, ForestModel, ForestParams, GridPoint, Node, Tree,
    TrainOutcome,
};
pub use logistic::{select_features, write_importances, SelectionConfig, SelectionReport};

use crate::acs::{find_cut_flags, PeriodDiagnostics};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MlError {
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("feature matrix has {rows} rows but {labels} labels")]
    Length { rows: usize, labels: usize },
    #[error("feature `{0}` is missing")]
    MissingFeature(String),
    #[error("model file line {line}: {message}")]
    ModelFormat { line: usize, message: String },
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Binary confusion counts with the positive class meaning "storage empty".
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub tp: usize,
    pub fn_: usize,
    pub fp: usize,
    pub tn: usize,
    pub accuracy: f64,
    /// Mean of the per-class recalls over the classes present in the truth.
    pub balanced_accuracy: f64,
}

impl ClassifierReport {
    /// From the truth-by-prediction table `[[tp, fn], [fp, tn]]`.
    pub fn from_confusion(tp: usize, fn_: usize, fp: usize, tn: usize) -> Self {
        let total = tp + fn_ + fp + tn;
        let accuracy = if total > 0 {
            (tp + tn) as f64 / total as f64
        } else {
            0.0
        };
        let mut recalls = Vec::with_capacity(2);
        if tp + fn_ > 0 {
            recalls.push(tp as f64 / (tp + fn_) as f64);
        }
        if tn + fp > 0 {
            recalls.push(tn as f64 / (tn + fp) as f64);
        }
        let balanced_accuracy = if recalls.is_empty() {
            0.0
        } else {
            recalls.iter().sum::<f64>() / recalls.len() as f64
        };
        ClassifierReport {
            tp,
            fn_,
            fp,
            tn,
            accuracy,
            balanced_accuracy,
        }
    }

    pub fn from_predictions(pred: &[bool], truth: &[bool]) -> Self {
        let (mut tp, mut fn_, mut fp, mut tn) = (0, 0, 0, 0);
        for (&p, &t) in pred.iter().zip(truth) {
            match (t, p) {
                (true, true) => tp += 1,
                (true, false) => fn_ += 1,
                (false, true) => fp += 1,
                (false, false) => tn += 1,
            }
        }
        Self::from_confusion(tp, fn_, fp, tn)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fn_ + self.fp + self.tn
    }
}

pub fn evaluate(model: &ForestModel, x: &FeatureMatrix, y: &[bool]) -> Result<ClassifierReport, MlError> {
    if x.n_rows != y.len() {
        return Err(MlError::Length {
            rows: x.n_rows,
            labels: y.len(),
        });
    }
    Ok(ClassifierReport::from_predictions(&model.predict(x)?, y))
}

/// Empty-storage labels of a full-scale solve.
pub fn label_periods(diag: &[PeriodDiagnostics], emin: f64) -> Vec<bool> {
    find_cut_flags(diag, emin)
}
