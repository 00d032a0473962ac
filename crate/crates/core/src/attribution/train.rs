use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Comment, SentenceKey};
use crate::error::{Error, Result};
use crate::factors::FactorCatalog;

use super::{pair_features, sigmoid, softplus, AttentionWeighting, AttributionModel, VectorBank};

const SPLIT_STREAM: u64 = 0;
const SHUFFLE_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Multiplier on the loss of positive pairs.
    pub pos_weight: f64,
    /// Probability of zeroing each feature during training.
    pub dropout: f64,
    pub seed: u64,
    pub holdout_fraction: f64,
    /// Fraction of the non-holdout sentences used for model selection.
    pub selection_fraction: f64,
    pub attention: AttentionWeighting,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 2e-5,
            batch_size: 4,
            epochs: 3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            pos_weight: 1.0,
            dropout: 0.1,
            seed: 0,
            holdout_fraction: 0.2,
            selection_fraction: 0.1,
            attention: AttentionWeighting::Cosine,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_owned()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if self.epsilon <= 0.0 || self.pos_weight <= 0.0 {
            return bad("epsilon and pos_weight must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.holdout_fraction)
            || !(0.0..1.0).contains(&self.selection_fraction)
        {
            return bad("holdout_fraction and selection_fraction must lie in [0, 1)");
        }
        Ok(())
    }
}

/// One (sentence, factor) training example.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledPair {
    pub key: SentenceKey,
    pub factor_id: String,
    pub label: bool,
}

/// Pairs for every annotated sentence and every catalog factor. A pair is
/// positive iff the factor's category is among the sentence labels.
pub fn build_pairs(comments: &[Comment], catalog: &FactorCatalog) -> Vec<LabeledPair> {
    let mut pairs = Vec::new();
    for c in comments {
        for s in &c.sentences {
            let Some(labels) = &s.labels else { continue };
            for f in catalog.factors() {
                pairs.push(LabeledPair {
                    key: c.sentence_key(s.index),
                    factor_id: f.id.clone(),
                    label: labels.contains(&f.category),
                });
            }
        }
    }
    pairs
}

/// Sentence-level partition. Every pair of a sentence lands in the same part.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSplit {
    pub train: Vec<SentenceKey>,
    pub selection: Vec<SentenceKey>,
    pub holdout: Vec<SentenceKey>,
}

impl DataSplit {
    pub fn part_of(&self, key: &SentenceKey) -> Option<&'static str> {
        if self.train.contains(key) {
            Some("train")
        } else if self.selection.contains(key) {
            Some("selection")
        } else if self.holdout.contains(key) {
            Some("holdout")
        } else {
            None
        }
    }
}

pub fn split_sentences(keys: &[SentenceKey], config: &TrainingConfig) -> DataSplit {
    let mut keys: Vec<SentenceKey> = keys
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(SPLIT_STREAM);
    keys.shuffle(&mut rng);

    let n_holdout = (config.holdout_fraction * keys.len() as f64).round() as usize;
    let rest = keys.len() - n_holdout;
    let n_selection = (config.selection_fraction * rest as f64).round() as usize;
    let holdout = keys.split_off(rest);
    let selection = keys.split_off(rest - n_selection);
    DataSplit {
        train: keys,
        selection,
        holdout,
    }
}

/// Weighted binary cross-entropy of logit `z`.
pub fn pair_loss(z: f64, label: bool, pos_weight: f64) -> f64 {
    if label {
        pos_weight * softplus(-z)
    } else {
        softplus(z)
    }
}

/// Loss and its gradient with respect to `W` and `B` for one pair.
pub fn loss_and_gradient(
    weights: &[f64],
    bias: f64,
    features: &[f64],
    label: bool,
    pos_weight: f64,
) -> (f64, Vec<f64>, f64) {
    let z: f64 = weights
        .iter()
        .zip(features)
        .map(|(w, x)| w * x)
        .sum::<f64>()
        + bias;
    let p = sigmoid(z);
    let dz = if label { -pos_weight * (1.0 - p) } else { p };
    let grad_w = features.iter().map(|x| dz * x).collect();
    (pair_loss(z, label, pos_weight), grad_w, dz)
}

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n_params: usize, config: &TrainingConfig) -> Self {
        Adam {
            learning_rate: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.m.len(), "parameter count changed");
        assert_eq!(grad.len(), self.m.len(), "gradient length mismatch");
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub train_loss: f64,
    /// Mean pair loss on the selection part, without dropout.
    pub selection_loss: f64,
    pub selection_threshold: f64,
    pub selection_f1: f64,
}

#[derive(Clone, Debug)]
pub struct TrainingOutcome {
    /// Parameters from the selected epoch, with its tuned threshold.
    pub model: AttributionModel,
    pub split: DataSplit,
    pub history: Vec<EpochReport>,
}

/// Pair features for the pairs of the given sentences. Sentences without
/// tokens are skipped.
fn pair_examples(
    pairs: &[LabeledPair],
    keys: &[SentenceKey],
    bank: &VectorBank,
    attention: AttentionWeighting,
) -> Result<Vec<(Vec<f64>, bool)>> {
    let keys: BTreeSet<&SentenceKey> = keys.iter().collect();
    let mut examples = Vec::new();
    for pair in pairs.iter().filter(|p| keys.contains(&p.key)) {
        let sentence = bank.sentence(&pair.key).ok_or_else(|| {
            Error::Training(format!("no token vectors for sentence {}", pair.key))
        })?;
        if sentence.is_empty() {
            continue;
        }
        let factor = bank.factor(&pair.factor_id).ok_or_else(|| {
            Error::Training(format!("no representation for factor {}", pair.factor_id))
        })?;
        examples.push((
            pair_features(&sentence.vectors, factor, attention)?,
            pair.label,
        ));
    }
    Ok(examples)
}

/// Fits `W` and `B` by mini-batch Adam on the train part of the split.
/// After every epoch the detection threshold is tuned on the selection
/// part (the train part when the selection part is empty). The epoch with
/// the best selection F1 is kept; ties go to the lower selection loss,
/// then to the earlier epoch.
pub fn train(
    pairs: &[LabeledPair],
    bank: &VectorBank,
    config: &TrainingConfig,
) -> Result<TrainingOutcome> {
    config.validate()?;
    let truth = sentence_truth(pairs);
    let keys: Vec<SentenceKey> = truth.keys().cloned().collect();
    let split = split_sentences(&keys, config);

    let examples = pair_examples(pairs, &split.train, bank, config.attention)?;
    let n_pos = examples.iter().filter(|e| e.1).count();
    if n_pos == 0 || n_pos == examples.len() {
        return Err(Error::Training(format!(
            "training split needs both positive and negative pairs ({n_pos} of {} positive)",
            examples.len()
        )));
    }

    let selection_keys = if split.selection.is_empty() {
        &split.train
    } else {
        &split.selection
    };
    let selection: Vec<(SentenceKey, bool)> = selection_keys
        .iter()
        .map(|k| (k.clone(), truth[k]))
        .collect();
    let selection_examples = pair_examples(pairs, selection_keys, bank, config.attention)?;

    let dim = bank.dim();
    let mut model = AttributionModel::zeros(dim);
    model.attention = config.attention;
    let mut params = vec![0.0; 2 * dim + 1];
    let mut adam = Adam::new(params.len(), config);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(SHUFFLE_STREAM);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed);
    dropout_rng.set_stream(DROPOUT_STREAM);
    let keep = 1.0 - config.dropout;

    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut history: Vec<EpochReport> = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, AttributionModel)> = None;
    let mut dropped = vec![0.0; 2 * dim];
    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grad = vec![0.0; params.len()];
            let (w, b) = params.split_at(2 * dim);
            for &i in batch {
                let (x, label) = &examples[i];
                for (d, xi) in dropped.iter_mut().zip(x) {
                    *d = if config.dropout > 0.0 && dropout_rng.random::<f64>() < config.dropout {
                        0.0
                    } else {
                        xi / keep
                    };
                }
                let (loss, gw, gb) =
                    loss_and_gradient(w, b[0], &dropped, *label, config.pos_weight);
                total_loss += loss;
                grad.iter_mut()
                    .zip(gw.iter().chain([&gb]))
                    .for_each(|(g, x)| *g += x);
            }
            let n = batch.len() as f64;
            grad.iter_mut().for_each(|g| *g /= n);
            adam.step(&mut params, &grad);
        }

        model.weights.copy_from_slice(&params[..2 * dim]);
        model.bias = params[2 * dim];
        let selection_loss = mean_loss(&model, &selection_examples, config.pos_weight)?;
        let scores = sentence_scores(&model, bank, &selection)?;
        let choice = tune_threshold(
            &scores
                .iter()
                .map(|s| (s.max_score, s.truth))
                .collect::<Vec<_>>(),
        )?;
        let report = EpochReport {
            epoch,
            train_loss: total_loss / examples.len() as f64,
            selection_loss,
            selection_threshold: choice.threshold,
            selection_f1: choice.f1,
        };
        let better = best.as_ref().is_none_or(|(i, _)| {
            let b = &history[*i];
            report.selection_f1 > b.selection_f1
                || (report.selection_f1 == b.selection_f1
                    && report.selection_loss < b.selection_loss)
        });
        if better {
            let mut snapshot = model.clone();
            snapshot.detection_threshold = Some(choice.threshold);
            snapshot.provenance.selected_epoch = Some(epoch);
            snapshot.provenance.selection_f1 = Some(choice.f1);
            best = Some((history.len(), snapshot));
        }
        history.push(report);
    }
    let (_, mut model) = best.expect("at least one epoch");
    model.provenance.training = Some(config.clone());
    Ok(TrainingOutcome {
        model,
        split,
        history,
    })
}

fn mean_loss(
    model: &AttributionModel,
    examples: &[(Vec<f64>, bool)],
    pos_weight: f64,
) -> Result<f64> {
    if examples.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (x, label) in examples {
        total += pair_loss(model.logit(x)?, *label, pos_weight);
    }
    Ok(total / examples.len() as f64)
}

/// A sentence is positive iff any of its pairs is.
fn sentence_truth(pairs: &[LabeledPair]) -> BTreeMap<SentenceKey, bool> {
    let mut truth = BTreeMap::new();
    for p in pairs {
        *truth.entry(p.key.clone()).or_insert(false) |= p.label;
    }
    truth
}

#[derive(Clone, Debug, PartialEq)]
pub struct SentenceScore {
    pub key: SentenceKey,
    /// Highest attribution score over all factors; 0 for a sentence
    /// without tokens.
    pub max_score: f64,
    pub truth: bool,
}

pub fn sentence_scores(
    model: &AttributionModel,
    bank: &VectorBank,
    sentences: &[(SentenceKey, bool)],
) -> Result<Vec<SentenceScore>> {
    sentences
        .iter()
        .map(|(key, truth)| {
            let vectors = bank.sentence(key).ok_or_else(|| {
                Error::InvalidInput(format!("no token vectors for sentence {key}"))
            })?;
            let mut max_score = 0.0f64;
            if !vectors.is_empty() {
                for rep in bank.factors().values() {
                    max_score = max_score.max(model.score(&vectors.vectors, rep)?);
                }
            }
            Ok(SentenceScore {
                key: key.clone(),
                max_score,
                truth: *truth,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    pub threshold: f64,
    pub f1: f64,
}

/// Picks the detection threshold (a sentence is flagged iff its score is
/// at least the threshold) that maximizes F1. Each candidate cut falls
/// between two adjacent distinct scores and is reported as their midpoint,
/// or as the lowest score when every sentence is flagged. Ties go to the
/// lowest threshold.
pub fn tune_threshold(scores: &[(f64, bool)]) -> Result<ThresholdChoice> {
    if scores.is_empty() {
        return Err(Error::InvalidInput(
            "no scores to tune a threshold on".into(),
        ));
    }
    if scores.iter().any(|(s, _)| s.is_nan()) {
        return Err(Error::InvalidInput("NaN score".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let n_pos = scores.iter().filter(|s| s.1).count() as f64;

    let mut best = ThresholdChoice {
        threshold: sorted[0].0,
        f1: f64::NEG_INFINITY,
    };
    let (mut predicted, mut tp) = (0.0, 0.0);
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == t {
            predicted += 1.0;
            if sorted[i].1 {
                tp += 1.0;
            }
            i += 1;
        }
        let f1 = 2.0 * tp / (predicted + n_pos);
        if f1 >= best.f1 {
            let threshold = sorted.get(i).map_or(t, |next| 0.5 * (t + next.0));
            best = ThresholdChoice { threshold, f1 };
        }
    }
    Ok(best)
}

impl AttributionModel {
    /// Sets the detection threshold from labeled sentences.
    pub fn tune_detection_threshold(
        &mut self,
        bank: &VectorBank,
        sentences: &[(SentenceKey, bool)],
    ) -> Result<ThresholdChoice> {
        let scores = sentence_scores(self, bank, sentences)?;
        let choice = tune_threshold(
            &scores
                .iter()
                .map(|s| (s.max_score, s.truth))
                .collect::<Vec<_>>(),
        )?;
        self.detection_threshold = Some(choice.threshold);
        Ok(choice)
    }
}
