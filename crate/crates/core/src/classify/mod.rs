//! ZEUS level-3 classification of work orders.
//!
//! Two model families (multinomial naive Bayes, multinomial logistic
//! regression) combined with two oversamplers (random duplication, SMOTE)
//! give the four model variants. Oversampling only ever touches the training
//! partition.

mod logistic;
mod metrics;
mod model;
mod naive_bayes;
mod oversample;
mod split;

use serde::{Deserialize, Serialize};

use crate::corpus::ZeusCode;
use crate::features::{FeatureMatrix, SparseRow, Weighting};

pub use logistic::{loss_and_gradient, train_lr, LogisticRegressionModel, LrConfig, LrParams};
pub use metrics::{
    average_scores, evaluate, render_comparison, Averages, ClassMetrics, ClassScores, DropRule, DroppedClass,
    MetricsReport,
};
pub use model::{Classifier, ModelFile, ModelFileError, ModelKind, ModelMetadata, Prediction};
pub use naive_bayes::{train_nb, NaiveBayesModel};
pub use oversample::{interpolate, oversample, oversample_random, oversample_smote, Oversampler, RowOrigin};
pub use split::{stratified_split, Split};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClassifyError {
    #[error("test_fraction must lie strictly between 0 and 1, got {0}")]
    InvalidTestFraction(f64),
    #[error("{what}: expected {expected} rows, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("k_neighbors must be at least 1")]
    InvalidNeighbors,
    #[error("smoothing alpha must be positive, got {0}")]
    InvalidAlpha(f64),
    #[error("class {0} has no training rows")]
    MissingClass(ZeusCode),
    #[error("label {0} is not one of the model classes")]
    UnknownLabel(ZeusCode),
    #[error("naive Bayes needs non-negative features (row {row}, column {column})")]
    NegativeFeature { row: usize, column: usize },
    #[error("max_epochs must be at least 1")]
    InvalidEpochs,
    #[error("training diverged at epoch {epoch}: loss {loss} with learning rate {learning_rate} (last finite loss {last_finite:?})")]
    NonFiniteLoss {
        epoch: usize,
        loss: f64,
        learning_rate: f64,
        last_finite: Option<f64>,
    },
    #[error("features use vocabulary {features}, model expects {model}")]
    VocabularyMismatch { features: String, model: String },
    #[error("cannot evaluate an empty prediction set")]
    EmptyEvaluation,
    #[error("no class survived filtering; nothing to average")]
    NoRetainedClasses,
}

/// Feature matrix with one level-3 label per row and an optional split.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: FeatureMatrix,
    pub labels: Vec<ZeusCode>,
    pub split: Option<Split>,
}

impl LabeledDataset {
    /// Pairs features with labels, truncating level-4 codes to level 3.
    pub fn new(features: FeatureMatrix, labels: &[ZeusCode]) -> Result<Self, ClassifyError> {
        if features.n_rows() != labels.len() {
            return Err(ClassifyError::LengthMismatch {
                what: "labels",
                expected: features.n_rows(),
                actual: labels.len(),
            });
        }
        Ok(Self {
            features,
            labels: labels.iter().map(|c| c.level3()).collect(),
            split: None,
        })
    }

    pub fn with_split(mut self, test_fraction: f64, seed: u64) -> Result<Self, ClassifyError> {
        self.split = Some(stratified_split(&self.labels, test_fraction, seed)?);
        Ok(self)
    }

    fn subset(&self, rows: &[usize]) -> TrainingSet {
        TrainingSet::new(
            self.features.select_rows(rows),
            rows.iter().map(|&r| self.labels[r]).collect(),
        )
    }

    /// Training rows; every row when no split has been made.
    pub fn train(&self) -> TrainingSet {
        match &self.split {
            Some(split) => self.subset(&split.train),
            None => self.subset(&(0..self.labels.len()).collect::<Vec<_>>()),
        }
    }

    pub fn test(&self) -> TrainingSet {
        match &self.split {
            Some(split) => self.subset(&split.test),
            None => self.subset(&[]),
        }
    }

    /// Sorted distinct labels.
    pub fn classes(&self) -> Vec<ZeusCode> {
        distinct(&self.labels)
    }
}

pub(crate) fn distinct(labels: &[ZeusCode]) -> Vec<ZeusCode> {
    let mut classes = labels.to_vec();
    classes.sort();
    classes.dedup();
    classes
}

/// Rows and labels a model is fitted on, with the origin of each row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub rows: Vec<SparseRow>,
    pub labels: Vec<ZeusCode>,
    pub origin: Vec<RowOrigin>,
    pub n_cols: usize,
    pub weighting: Weighting,
    pub vocabulary_id: String,
}

impl TrainingSet {
    pub fn new(features: FeatureMatrix, labels: Vec<ZeusCode>) -> Self {
        assert_eq!(features.n_rows(), labels.len(), "one label per feature row");
        Self {
            origin: (0..labels.len()).map(RowOrigin::Original).collect(),
            rows: features.rows,
            labels,
            n_cols: features.n_cols,
            weighting: features.weighting,
            vocabulary_id: features.vocabulary_id,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Per-class row counts, sorted by class.
    pub fn class_counts(&self) -> Vec<(ZeusCode, usize)> {
        distinct(&self.labels)
            .into_iter()
            .map(|c| (c, self.labels.iter().filter(|&&l| l == c).count()))
            .collect()
    }

    pub fn features(&self) -> FeatureMatrix {
        FeatureMatrix {
            rows: self.rows.clone(),
            n_cols: self.n_cols,
            weighting: self.weighting,
            vocabulary_id: self.vocabulary_id.clone(),
            empty_rows: self
                .rows
                .iter()
                .enumerate()
                .filter(|(_, r)| r.is_empty())
                .map(|(i, _)| i)
                .collect(),
        }
    }
}

/// Hyperparameters shared by the CLI and the pipelines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifyConfig {
    pub test_fraction: f64,
    pub min_df: usize,
    pub nb_alpha: f64,
    pub smote_k: usize,
    pub lr: LrConfig,
    pub min_class_support: usize,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            test_fraction: 0.3,
            min_df: 1,
            nb_alpha: 1.0,
            smote_k: 5,
            lr: LrConfig::default(),
            min_class_support: 1,
        }
    }
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Normalizes log-scores into probabilities.
pub(crate) fn softmax(scores: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(scores);
    scores.iter().map(|s| (s - lse).exp()).collect()
}

/// Index of the largest value; the first (smallest class code) wins ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
