use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::lir::{self, RemovalMode};
use crate::types::{ComponentBasis, EmbeddingSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// L2 penalty on the weights (the bias is not penalised).
    pub l2: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            learning_rate: 0.1,
            epochs: 500,
            l2: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticModel {
    pub fn zeros(dim: usize) -> Self {
        LogisticModel {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    /// Weights followed by the bias term.
    pub fn coefficients(&self) -> Vec<f64> {
        let mut v = self.weights.clone();
        v.push(self.bias);
        v
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        self.logit(x) >= 0.0
    }

    pub fn accuracy(&self, features: &Matrix, labels: &[bool]) -> Result<f64> {
        check_shape(features, labels, self.weights.len())?;
        if labels.is_empty() {
            return Ok(0.0);
        }
        let correct = features
            .row_iter()
            .zip(labels)
            .filter(|(x, &y)| self.predict(x) == y)
            .count();
        Ok(correct as f64 / labels.len() as f64)
    }

    /// Mean log-loss plus `l2/2·‖w‖²`.
    pub fn loss(&self, features: &Matrix, labels: &[bool], l2: f64) -> Result<f64> {
        check_shape(features, labels, self.weights.len())?;
        let n = labels.len().max(1) as f64;
        let data: f64 = features
            .row_iter()
            .zip(labels)
            .map(|(x, &y)| {
                let z = self.logit(x);
                // log(1 + e^z) - y·z, computed without overflow
                softplus(z) - if y { z } else { 0.0 }
            })
            .sum();
        Ok(data / n + 0.5 * l2 * dot(&self.weights, &self.weights))
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn check_shape(features: &Matrix, labels: &[bool], dim: usize) -> Result<()> {
    if features.rows() != labels.len() {
        return Err(Error::dimension(features.rows(), labels.len()));
    }
    if features.cols() != dim {
        return Err(Error::dimension(dim, features.cols()));
    }
    Ok(())
}

/// Full-batch gradient descent on L2-regularised log-loss, from zero
/// weights, for exactly `cfg.epochs` steps.
pub fn train_logistic(features: &Matrix, labels: &[bool], cfg: &LogisticConfig) -> Result<LogisticModel> {
    train_logistic_traced(features, labels, cfg).map(|(m, _)| m)
}

/// Like [`train_logistic`], also returning the loss before each step.
pub fn train_logistic_traced(
    features: &Matrix,
    labels: &[bool],
    cfg: &LogisticConfig,
) -> Result<(LogisticModel, Vec<f64>)> {
    let d = features.cols();
    check_shape(features, labels, d)?;
    if labels.len() < 2 || labels.iter().all(|&y| y) || labels.iter().all(|&y| !y) {
        return Err(Error::DegenerateLabels);
    }
    if !(cfg.learning_rate.is_finite() && cfg.learning_rate > 0.0) || !(cfg.l2.is_finite() && cfg.l2 >= 0.0) {
        return Err(Error::Config(format!(
            "learning rate must be > 0 and l2 >= 0, got {} and {}",
            cfg.learning_rate, cfg.l2
        )));
    }
    let n = labels.len() as f64;
    let mut model = LogisticModel::zeros(d);
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut grad = vec![0.0; d];
    for _ in 0..cfg.epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_bias = 0.0;
        let mut loss = 0.0;
        for (x, &y) in features.row_iter().zip(labels) {
            let z = model.logit(x);
            let target = if y { 1.0 } else { 0.0 };
            let residual = sigmoid(z) - target;
            loss += softplus(z) - target * z;
            for (g, xi) in grad.iter_mut().zip(x) {
                *g += residual * xi;
            }
            grad_bias += residual;
        }
        losses.push(loss / n + 0.5 * cfg.l2 * dot(&model.weights, &model.weights));
        for (w, g) in model.weights.iter_mut().zip(&grad) {
            *w -= cfg.learning_rate * (g / n + cfg.l2 * *w);
        }
        model.bias -= cfg.learning_rate * grad_bias / n;
    }
    Ok((model, losses))
}

/// Where removal is applied in the transfer protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    /// Clean both the training features and every test language.
    #[default]
    Both,
    /// Clean test languages only; train on raw features.
    EvalOnly,
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Placement::Both => "both",
            Placement::EvalOnly => "eval",
        })
    }
}

impl FromStr for Placement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "both" => Ok(Placement::Both),
            "eval" | "eval-only" => Ok(Placement::EvalOnly),
            other => Err(Error::Config(format!(
                "unknown placement {other:?} (expected both or eval)"
            ))),
        }
    }
}

/// Embeddings with one binary label per record.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    records: EmbeddingSet,
    labels: Vec<bool>,
}

impl LabeledSet {
    pub fn new(records: EmbeddingSet, labels: Vec<bool>) -> Result<Self> {
        if records.len() != labels.len() {
            return Err(Error::dimension(records.len(), labels.len()));
        }
        Ok(LabeledSet { records, labels })
    }

    /// Looks up each record's label by id.
    pub fn from_map(records: EmbeddingSet, labels: &BTreeMap<String, bool>) -> Result<Self> {
        let labels = records
            .iter()
            .map(|r| {
                labels
                    .get(r.id())
                    .copied()
                    .ok_or_else(|| Error::UnknownId(r.id().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        LabeledSet::new(records, labels)
    }

    pub fn records(&self) -> &EmbeddingSet {
        &self.records
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferConfig {
    pub rank: usize,
    pub mode: Option<RemovalMode>,
    pub placement: Option<Placement>,
    pub logistic: LogisticConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub per_language_accuracy: BTreeMap<String, f64>,
    /// Unweighted mean over the evaluated languages.
    pub average: f64,
    pub train_language: String,
    pub config: TransferConfig,
}

/// Zero-shot transfer: train once on a single language, evaluate unchanged
/// on every test language.
pub fn evaluate_transfer(
    train: &LabeledSet,
    tests: &BTreeMap<String, LabeledSet>,
    bases: Option<&BTreeMap<String, ComponentBasis>>,
    mode: RemovalMode,
    placement: Placement,
    cfg: &LogisticConfig,
) -> Result<TransferReport> {
    let langs = train.records.languages();
    let train_language = match langs.len() {
        1 => langs.into_iter().next().unwrap_or_default().to_string(),
        0 => return Err(Error::Dataset("training set is empty".into())),
        _ => return Err(Error::Dataset(format!("training set mixes languages {langs:?}"))),
    };

    let clean = |set: &EmbeddingSet| -> Result<EmbeddingSet> {
        match bases {
            Some(b) => Ok(lir::remove_batch(set, b, mode, true)?.records),
            None => Ok(set.clone()),
        }
    };

    let train_features = match placement {
        Placement::Both => clean(&train.records)?,
        Placement::EvalOnly => train.records.clone(),
    };
    let dim = train_features.dim();
    let model = train_logistic(&train_features.to_matrix(), &train.labels, cfg)?;

    let mut per_language_accuracy = BTreeMap::new();
    for (lang, test) in tests {
        if !test.records.is_empty() && test.records.dim() != dim {
            return Err(Error::dimension(dim, test.records.dim()));
        }
        let features = clean(&test.records)?;
        let acc = model.accuracy(&features.to_matrix(), &test.labels)?;
        per_language_accuracy.insert(lang.clone(), acc);
    }
    let average = if per_language_accuracy.is_empty() {
        0.0
    } else {
        per_language_accuracy.values().sum::<f64>() / per_language_accuracy.len() as f64
    };

    Ok(TransferReport {
        per_language_accuracy,
        average,
        train_language,
        config: TransferConfig {
            rank: bases
                .and_then(|b| b.values().map(ComponentBasis::rank).max())
                .unwrap_or(0),
            mode: bases.map(|_| mode),
            placement: bases.map(|_| placement),
            logistic: *cfg,
        },
    })
}
