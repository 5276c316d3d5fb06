//! End-to-end routes from work orders to KPI reports, shared by the CLI and the HTTP API.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::classify::{
    evaluate, oversample, stratified_split, train_lr, train_nb, Classifier, ClassifyConfig, ClassifyError, MetricsReport,
    ModelFile, ModelKind, ModelMetadata, Oversampler, TrainingSet,
};
use crate::corpus::{preprocess, Fleet, Preprocessed, TokenDoc, WordList, WorkOrder, ZeusCode};
use crate::features::{build_vocabulary, tfidf, vectorize_counts, FeatureError, FeatureMatrix, FeatureVocabulary, Weighting};
use crate::kpi::{kpi_report, EventSource, KpiConfig, KpiError, KpiReport};
use crate::rules::{select, NegationConfig, RuleError, RuleId, RuleSelection};
use crate::tagging::{apply_tags, TagVocabulary};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("no labeled work orders to train on")]
    NoLabeledOrders,
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Rules(#[from] RuleError),
    #[error(transparent)]
    Kpi(#[from] KpiError),
}

/// Preprocessing with the shipped English/German stop words and junk words.
pub fn preprocess_default(orders: &[WorkOrder]) -> Preprocessed {
    preprocess(orders, &WordList::default_stopwords(), &WordList::default_junkwords())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub model: ModelKind,
    pub oversampler: Oversampler,
    /// Defaults to the model family's usual weighting.
    pub weighting: Option<Weighting>,
    pub seed: u64,
    pub classify: ClassifyConfig,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            model: ModelKind::LogisticRegression,
            oversampler: Oversampler::Ro,
            weighting: None,
            seed: 0,
            classify: ClassifyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: ModelFile,
    /// Scores on the held-out split.
    pub report: MetricsReport,
    pub n_train: usize,
    pub n_test: usize,
    pub warnings: Vec<String>,
}

fn featurize(docs: &[TokenDoc], vocab: &FeatureVocabulary, weighting: Weighting) -> Result<FeatureMatrix, FeatureError> {
    let counts = vectorize_counts(docs, vocab);
    match weighting {
        Weighting::Count => Ok(counts),
        Weighting::Tfidf(variant) => tfidf(&counts, vocab, variant),
    }
}

/// Docs of orders that carry a label, with the level-3 label.
pub fn labeled_docs(orders: &[WorkOrder], docs: &[TokenDoc]) -> (Vec<TokenDoc>, Vec<ZeusCode>) {
    let labels: BTreeMap<&str, ZeusCode> = orders
        .iter()
        .filter_map(|o| o.zeus_code.map(|c| (o.id.as_str(), c.level3())))
        .collect();
    docs.iter()
        .filter_map(|d| labels.get(d.work_order_id.as_str()).map(|&c| (d.clone(), c)))
        .unzip()
}

/// Stratified split, vocabulary and weights fitted on the training part,
/// oversampling, model fit and evaluation on the held-out part.
pub fn train_model(orders: &[WorkOrder], docs: &[TokenDoc], options: &TrainOptions) -> Result<TrainOutcome, PipelineError> {
    let (docs, labels) = labeled_docs(orders, docs);
    if docs.is_empty() {
        return Err(PipelineError::NoLabeledOrders);
    }
    let cfg = &options.classify;
    let split = stratified_split(&labels, cfg.test_fraction, options.seed)?;
    let pick = |rows: &[usize]| -> (Vec<TokenDoc>, Vec<ZeusCode>) {
        rows.iter().map(|&i| (docs[i].clone(), labels[i])).unzip()
    };
    let (train_docs, train_labels) = pick(&split.train);
    let (test_docs, test_labels) = pick(&split.test);

    let weighting = options.weighting.unwrap_or_else(|| options.model.default_weighting());
    let vocabulary = build_vocabulary(&train_docs, cfg.min_df)?;
    let train = TrainingSet::new(featurize(&train_docs, &vocabulary, weighting)?, train_labels.clone());
    let (balanced, mut warnings) = oversample(&train, options.oversampler, cfg.smote_k, options.seed)?;
    warnings.extend(split.warnings.iter().cloned());

    let classes = crate::classify::distinct(&train_labels);
    let (model, hyperparams) = match options.model {
        ModelKind::NaiveBayes => (
            Classifier::NaiveBayes(train_nb(&balanced, &classes, cfg.nb_alpha)?),
            serde_json::json!({ "alpha": cfg.nb_alpha }),
        ),
        ModelKind::LogisticRegression => (
            Classifier::LogisticRegression(train_lr(&balanced, &classes, &cfg.lr)?),
            serde_json::to_value(&cfg.lr).expect("config serializes"),
        ),
    };
    let predictions = model.predict(&featurize(&test_docs, &vocabulary, weighting)?)?;
    let predicted: Vec<ZeusCode> = predictions.iter().map(|p| p.code).collect();
    let report = evaluate(&predicted, &test_labels, cfg.min_class_support)?;
    let model = ModelFile {
        metadata: ModelMetadata {
            model_type: options.model,
            oversampler: options.oversampler,
            seed: options.seed,
            features: weighting,
            test_fraction: cfg.test_fraction,
            vocabulary_id: vocabulary.fingerprint(),
            hyperparams,
        },
        vocabulary,
        model,
    };
    Ok(TrainOutcome {
        model,
        report,
        n_train: train_docs.len(),
        n_test: test_docs.len(),
        warnings,
    })
}

/// Predicted code per work order.
pub fn predict_labels(model: &ModelFile, docs: &[TokenDoc]) -> Result<BTreeMap<String, ZeusCode>, PipelineError> {
    let predictions = model.predict_docs(docs)?;
    Ok(docs
        .iter()
        .zip(predictions)
        .map(|(d, p)| (d.work_order_id.clone(), p.code))
        .collect())
}

pub fn expert_kpi(orders: &[WorkOrder], fleet: &Fleet, config: &KpiConfig, effort_hours: f64) -> Result<KpiReport, PipelineError> {
    Ok(kpi_report(orders, fleet, &EventSource::Expert, config, effort_hours)?)
}

pub fn classifier_kpi(
    orders: &[WorkOrder],
    predictions: &BTreeMap<String, ZeusCode>,
    model_id: &str,
    fleet: &Fleet,
    config: &KpiConfig,
    effort_hours: f64,
) -> Result<KpiReport, PipelineError> {
    let source = EventSource::Classifier {
        model_id: model_id.to_string(),
        predictions,
    };
    Ok(kpi_report(orders, fleet, &source, config, effort_hours)?)
}

/// Rule settings recorded with every rule-based KPI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleOptions {
    pub failure_alias: String,
    pub negation: NegationConfig,
}

impl Default for RuleOptions {
    fn default() -> Self {
        Self {
            failure_alias: "failure".into(),
            negation: NegationConfig::default(),
        }
    }
}

/// Applies the vocabulary, runs one rule and computes the KPI from its selection.
#[allow(clippy::too_many_arguments)]
pub fn rule_kpi(
    orders: &[WorkOrder],
    docs: &[TokenDoc],
    vocabulary: &TagVocabulary,
    rule: RuleId,
    options: &RuleOptions,
    fleet: &Fleet,
    config: &KpiConfig,
    effort_hours: f64,
) -> Result<(RuleSelection, KpiReport), PipelineError> {
    let tagged = apply_tags(docs, vocabulary);
    let selection = select(rule, &tagged, &options.failure_alias, &options.negation)?;
    let source = EventSource::Rule {
        selection: &selection,
        failure_alias: options.failure_alias.clone(),
        negation: options.negation.clone(),
    };
    let report = kpi_report(orders, fleet, &source, config, effort_hours)?;
    Ok((selection, report))
}
