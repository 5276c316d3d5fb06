use serde::{Deserialize, Serialize};

use super::{softmax, ClassifyError, TrainingSet};
use crate::corpus::ZeusCode;
use crate::features::SparseRow;

/// Multinomial naive Bayes with additive (Laplace/Lidstone) smoothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    pub classes: Vec<ZeusCode>,
    pub class_log_prior: Vec<f64>,
    /// `ln P(term | class)`, one row per class.
    pub term_log_likelihood: Vec<Vec<f64>>,
    pub smoothing_alpha: f64,
    pub n_terms: usize,
    pub vocabulary_id: String,
}

/// Fits priors and smoothed term likelihoods.
///
/// `classes` is the label set the model must cover; every one of them needs at
/// least one training row.
pub fn train_nb(train: &TrainingSet, classes: &[ZeusCode], alpha: f64) -> Result<NaiveBayesModel, ClassifyError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(ClassifyError::InvalidAlpha(alpha));
    }
    let mut classes = classes.to_vec();
    classes.sort();
    classes.dedup();
    let n_classes = classes.len();
    let mut class_rows = vec![0usize; n_classes];
    let mut term_mass = vec![vec![0.0_f64; train.n_cols]; n_classes];
    for (row_idx, (row, label)) in train.rows.iter().zip(&train.labels).enumerate() {
        let k = classes
            .binary_search(label)
            .map_err(|_| ClassifyError::UnknownLabel(*label))?;
        class_rows[k] += 1;
        for &(c, v) in row {
            if v < 0.0 {
                return Err(ClassifyError::NegativeFeature { row: row_idx, column: c });
            }
            term_mass[k][c] += v;
        }
    }
    if let Some(k) = class_rows.iter().position(|&n| n == 0) {
        return Err(ClassifyError::MissingClass(classes[k]));
    }
    let total_rows = train.len() as f64;
    let class_log_prior = class_rows.iter().map(|&n| (n as f64 / total_rows).ln()).collect();
    let term_log_likelihood = term_mass
        .iter()
        .map(|mass| {
            let denom = (mass.iter().sum::<f64>() + alpha * train.n_cols as f64).ln();
            mass.iter().map(|m| (m + alpha).ln() - denom).collect()
        })
        .collect();
    Ok(NaiveBayesModel {
        classes,
        class_log_prior,
        term_log_likelihood,
        smoothing_alpha: alpha,
        n_terms: train.n_cols,
        vocabulary_id: train.vocabulary_id.clone(),
    })
}

impl NaiveBayesModel {
    /// Unnormalized log posterior per class.
    pub fn joint_log_likelihood(&self, row: &SparseRow) -> Vec<f64> {
        self.class_log_prior
            .iter()
            .zip(&self.term_log_likelihood)
            .map(|(prior, loglik)| prior + row.iter().map(|&(c, v)| v * loglik[c]).sum::<f64>())
            .collect()
    }

    pub fn predict_proba_row(&self, row: &SparseRow) -> Vec<f64> {
        softmax(&self.joint_log_likelihood(row))
    }
}
