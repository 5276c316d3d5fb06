use serde::{Deserialize, Serialize};

use super::{softmax, ClassifyError, TrainingSet};
use crate::corpus::ZeusCode;
use crate::features::SparseRow;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LrConfig {
    pub l2_lambda: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Training stops once an epoch improves the loss by less than this.
    pub tol: f64,
}

impl Default for LrConfig {
    fn default() -> Self {
        Self {
            l2_lambda: 1e-4,
            learning_rate: 0.5,
            max_epochs: 500,
            tol: 1e-6,
        }
    }
}

/// Weight matrix (class x term) and per-class bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrParams {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl LrParams {
    pub fn zeros(n_classes: usize, n_terms: usize) -> Self {
        Self {
            weights: vec![vec![0.0; n_terms]; n_classes],
            bias: vec![0.0; n_classes],
        }
    }

    pub fn scores(&self, row: &SparseRow) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| b + row.iter().map(|&(c, v)| w[c] * v).sum::<f64>())
            .collect()
    }

    fn axpy(&mut self, step: f64, grad: &LrParams) {
        for (w, g) in self.weights.iter_mut().zip(&grad.weights) {
            for (wi, gi) in w.iter_mut().zip(g) {
                *wi -= step * gi;
            }
        }
        for (b, g) in self.bias.iter_mut().zip(&grad.bias) {
            *b -= step * g;
        }
    }
}

/// Mean cross-entropy plus `(lambda / 2) * ||W||^2` and its gradient.
///
/// `targets` are class indices. The bias is not regularized.
pub fn loss_and_gradient(params: &LrParams, rows: &[SparseRow], targets: &[usize], l2_lambda: f64) -> (f64, LrParams) {
    let n_classes = params.bias.len();
    let n_terms = params.weights.first().map_or(0, Vec::len);
    let mut grad = LrParams::zeros(n_classes, n_terms);
    let n = rows.len().max(1) as f64;
    let mut loss = 0.0;
    for (row, &y) in rows.iter().zip(targets) {
        let scores = params.scores(row);
        let lse = super::log_sum_exp(&scores);
        loss += lse - scores[y];
        for (k, s) in scores.iter().enumerate() {
            let residual = ((s - lse).exp() - if k == y { 1.0 } else { 0.0 }) / n;
            grad.bias[k] += residual;
            for &(c, v) in row {
                grad.weights[k][c] += residual * v;
            }
        }
    }
    loss /= n;
    let mut penalty = 0.0;
    for (w, g) in params.weights.iter().zip(grad.weights.iter_mut()) {
        for (wi, gi) in w.iter().zip(g.iter_mut()) {
            penalty += wi * wi;
            *gi += l2_lambda * wi;
        }
    }
    (loss + 0.5 * l2_lambda * penalty, grad)
}

/// Multinomial logistic regression fitted by full-batch gradient descent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegressionModel {
    pub classes: Vec<ZeusCode>,
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub l2_lambda: f64,
    /// Loss of the parameters at the start of each epoch.
    pub training_trace: Vec<f64>,
    pub converged: bool,
    pub n_terms: usize,
    pub vocabulary_id: String,
}

impl LogisticRegressionModel {
    pub fn params(&self) -> LrParams {
        LrParams {
            weights: self.weights.clone(),
            bias: self.bias.clone(),
        }
    }

    pub fn predict_proba_row(&self, row: &SparseRow) -> Vec<f64> {
        softmax(&self.params().scores(row))
    }
}

/// Trains from zero-initialized weights.
///
/// Stops when the loss improves by less than `tol` between epochs or after
/// `max_epochs`. An epoch that would raise the loss is not applied.
pub fn train_lr(
    train: &TrainingSet,
    classes: &[ZeusCode],
    config: &LrConfig,
) -> Result<LogisticRegressionModel, ClassifyError> {
    if config.max_epochs < 1 {
        return Err(ClassifyError::InvalidEpochs);
    }
    let mut classes = classes.to_vec();
    classes.sort();
    classes.dedup();
    let targets = train
        .labels
        .iter()
        .map(|l| classes.binary_search(l).map_err(|_| ClassifyError::UnknownLabel(*l)))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(missing) = classes.iter().find(|c| !train.labels.contains(c)) {
        return Err(ClassifyError::MissingClass(*missing));
    }

    let mut params = LrParams::zeros(classes.len(), train.n_cols);
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut previous: Option<LrParams> = None;
    for epoch in 0..config.max_epochs {
        let (loss, grad) = loss_and_gradient(&params, &train.rows, &targets, config.l2_lambda);
        if !loss.is_finite() {
            return Err(ClassifyError::NonFiniteLoss {
                epoch,
                loss,
                learning_rate: config.learning_rate,
                last_finite: trace.last().copied(),
            });
        }
        if let Some(&prev) = trace.last() {
            if prev - loss < config.tol {
                converged = true;
                if loss > prev {
                    if let Some(p) = previous.take() {
                        params = p;
                    }
                } else {
                    trace.push(loss);
                }
                break;
            }
        }
        trace.push(loss);
        previous = Some(params.clone());
        params.axpy(config.learning_rate, &grad);
    }
    Ok(LogisticRegressionModel {
        classes,
        weights: params.weights,
        bias: params.bias,
        l2_lambda: config.l2_lambda,
        training_trace: trace,
        converged,
        n_terms: train.n_cols,
        vocabulary_id: train.vocabulary_id.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureMatrix, Weighting};

    fn set(rows: Vec<SparseRow>, labels: Vec<ZeusCode>, n_cols: usize) -> TrainingSet {
        TrainingSet::new(
            FeatureMatrix {
                rows,
                n_cols,
                weighting: Weighting::Tfidf(Default::default()),
                vocabulary_id: "v".into(),
                empty_rows: vec![],
            },
            labels,
        )
    }

    const A: ZeusCode = ZeusCode::Corrective;
    const B: ZeusCode = ZeusCode::Preventive;

    #[test]
    fn zero_init_is_uniform() {
        let p = LrParams::zeros(4, 3);
        let probs = softmax(&p.scores(&vec![(0, 2.0), (2, 1.0)]));
        assert!(probs.iter().all(|x| (x - 0.25).abs() < 1e-15));
        let (loss, _) = loss_and_gradient(&p, &[vec![(1, 1.0)]], &[2], 0.0);
        assert!((loss - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn separable_toy_reaches_full_accuracy() {
        let rows: Vec<SparseRow> = (0..20)
            .map(|i| if i % 2 == 0 { vec![(0, 1.0 + i as f64 / 20.0)] } else { vec![(1, 1.0 + i as f64 / 20.0)] })
            .collect();
        let labels = (0..20).map(|i| if i % 2 == 0 { A } else { B }).collect();
        let s = set(rows.clone(), labels, 2);
        let cfg = LrConfig {
            l2_lambda: 0.0,
            learning_rate: 1.0,
            max_epochs: 300,
            tol: 1e-9,
        };
        let m = train_lr(&s, &[A, B], &cfg).unwrap();
        for (row, label) in rows.iter().zip(&s.labels) {
            let p = m.predict_proba_row(row);
            let predicted = if p[0] >= p[1] { A } else { B };
            assert_eq!(predicted, *label);
        }
        assert!(m.training_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn divergence_is_reported() {
        let rows = vec![vec![(0, 1e200)], vec![(0, -1e200)]];
        let s = set(rows, vec![A, B], 1);
        let cfg = LrConfig {
            learning_rate: 1e200,
            ..LrConfig::default()
        };
        assert!(matches!(train_lr(&s, &[A, B], &cfg), Err(ClassifyError::NonFiniteLoss { .. })));
    }

    #[test]
    fn stops_at_tolerance() {
        let s = set(vec![vec![(0, 1.0)], vec![(1, 1.0)]], vec![A, B], 2);
        let cfg = LrConfig {
            tol: 1e-2,
            ..LrConfig::default()
        };
        let m = train_lr(&s, &[A, B], &cfg).unwrap();
        assert!(m.converged);
        assert!(m.training_trace.len() < cfg.max_epochs);
    }

    #[test]
    fn rejects_zero_epochs() {
        let s = set(vec![vec![(0, 1.0)]], vec![A], 1);
        let cfg = LrConfig {
            max_epochs: 0,
            ..LrConfig::default()
        };
        assert_eq!(train_lr(&s, &[A], &cfg).unwrap_err(), ClassifyError::InvalidEpochs);
    }
}
