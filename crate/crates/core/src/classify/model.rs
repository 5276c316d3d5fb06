use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{argmax, ClassifyError, LogisticRegressionModel, NaiveBayesModel, Oversampler};
use crate::corpus::{TokenDoc, ZeusCode};
use crate::features::{tfidf, vectorize_counts, FeatureMatrix, FeatureVocabulary, Weighting};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    NaiveBayes,
    LogisticRegression,
}

impl ModelKind {
    pub fn short_name(self) -> &'static str {
        match self {
            ModelKind::NaiveBayes => "nb",
            ModelKind::LogisticRegression => "lr",
        }
    }

    /// Feature weighting each model family is trained on by default.
    pub fn default_weighting(self) -> Weighting {
        match self {
            ModelKind::NaiveBayes => Weighting::Count,
            ModelKind::LogisticRegression => Weighting::Tfidf(Default::default()),
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "nb" | "naive_bayes" => Ok(ModelKind::NaiveBayes),
            "lr" | "logistic_regression" => Ok(ModelKind::LogisticRegression),
            other => Err(format!("unknown model `{other}` (expected nb or lr)")),
        }
    }
}

/// A trained classifier of either family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Classifier {
    NaiveBayes(NaiveBayesModel),
    LogisticRegression(LogisticRegressionModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub code: ZeusCode,
    /// Aligned with the model's class list.
    pub probabilities: Vec<f64>,
}

impl Classifier {
    pub fn kind(&self) -> ModelKind {
        match self {
            Classifier::NaiveBayes(_) => ModelKind::NaiveBayes,
            Classifier::LogisticRegression(_) => ModelKind::LogisticRegression,
        }
    }

    pub fn classes(&self) -> &[ZeusCode] {
        match self {
            Classifier::NaiveBayes(m) => &m.classes,
            Classifier::LogisticRegression(m) => &m.classes,
        }
    }

    fn vocabulary(&self) -> (&str, usize) {
        match self {
            Classifier::NaiveBayes(m) => (&m.vocabulary_id, m.n_terms),
            Classifier::LogisticRegression(m) => (&m.vocabulary_id, m.n_terms),
        }
    }

    fn check(&self, features: &FeatureMatrix) -> Result<(), ClassifyError> {
        let (id, n_terms) = self.vocabulary();
        if features.vocabulary_id != id || features.n_cols != n_terms {
            return Err(ClassifyError::VocabularyMismatch {
                features: features.vocabulary_id.clone(),
                model: id.to_string(),
            });
        }
        Ok(())
    }

    /// Class distribution per row.
    pub fn predict_proba(&self, features: &FeatureMatrix) -> Result<Vec<Vec<f64>>, ClassifyError> {
        self.check(features)?;
        Ok(features
            .rows
            .iter()
            .map(|row| match self {
                Classifier::NaiveBayes(m) => m.predict_proba_row(row),
                Classifier::LogisticRegression(m) => m.predict_proba_row(row),
            })
            .collect())
    }

    /// Most probable class per row; ties go to the smallest code.
    pub fn predict(&self, features: &FeatureMatrix) -> Result<Vec<Prediction>, ClassifyError> {
        let classes = self.classes();
        Ok(self
            .predict_proba(features)?
            .into_iter()
            .map(|probabilities| Prediction {
                code: classes[argmax(&probabilities)],
                probabilities,
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub model_type: ModelKind,
    pub oversampler: Oversampler,
    pub seed: u64,
    pub features: Weighting,
    pub test_fraction: f64,
    pub vocabulary_id: String,
    pub hyperparams: serde_json::Value,
}

/// Self-contained model artifact: metadata, vocabulary and parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub metadata: ModelMetadata,
    pub vocabulary: FeatureVocabulary,
    pub model: Classifier,
}

#[derive(Debug, thiserror::Error)]
pub enum ModelFileError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
}

impl ModelFile {
    /// Feature matrix for `docs` using the model's vocabulary and weighting.
    pub fn featurize(&self, docs: &[TokenDoc]) -> FeatureMatrix {
        let counts = vectorize_counts(docs, &self.vocabulary);
        match self.metadata.features {
            Weighting::Count => counts,
            Weighting::Tfidf(variant) => {
                tfidf(&counts, &self.vocabulary, variant).expect("count matrix built from this vocabulary")
            }
        }
    }

    pub fn predict_docs(&self, docs: &[TokenDoc]) -> Result<Vec<Prediction>, ClassifyError> {
        self.model.predict(&self.featurize(docs))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelFileError> {
        let path = path.as_ref();
        fs::write(path, self.to_json() + "\n").map_err(|source| ModelFileError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelFileError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ModelFileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ModelFileError::Json {
            path: path.display().to_string(),
            source,
        })
    }
}
