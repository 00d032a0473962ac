//! Cross-attention attribution classifier.
//!
//! For a sentence with token vectors `e(w_i)` and a factor with phrase
//! vectors `e(w_j)`:
//!
//! ```text
//! E(f)    = mean_j e(w_j)
//! alpha_i = cosine(e(w_i), E(f))
//! E(d)    = sum_i alpha_i * e(w_i)
//! A(d, f) = sigmoid(W . [E(d) : E(f)] + B)
//! ```
//!
//! The attention weights are raw cosines. They are not normalized and may be
//! negative. Only `W` and `B` are learned; token vectors are frozen inputs.

mod baseline;
mod model;
mod train;
mod vectors;

pub use baseline::{baseline_score, idf_weighted_sum, BaselineScorer};
pub use model::{rank_categories, rank_factors, AttributionModel, Prediction, Provenance};
pub use train::{
    build_pairs, loss_and_gradient, pair_loss, sentence_scores, split_sentences, train,
    tune_threshold, Adam, DataSplit, EpochReport, LabeledPair, SentenceScore, ThresholdChoice,
    TrainingConfig, TrainingOutcome,
};
pub use vectors::{
    format_component, load_token_vectors, read_token_vectors, write_token_vectors, TokenVectors,
    VectorBank,
};

use serde::{Deserialize, Serialize};

use crate::embedding::cosine_unchecked;
use crate::error::{Error, Result};

/// How token attention weights are derived from token/factor cosines.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionWeighting {
    /// Raw cosines.
    #[default]
    Cosine,
    /// Softmax over the cosines (ablation).
    Softmax,
}

/// `E(f)`: unweighted mean of the phrase token vectors.
pub fn factor_representation(phrase_vectors: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = phrase_vectors
        .first()
        .ok_or_else(|| Error::InvalidInput("factor phrase has no token vectors".into()))?;
    let dim = first.len();
    let mut mean = vec![0.0; dim];
    for v in phrase_vectors {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: v.len(),
            });
        }
        mean.iter_mut().zip(v).for_each(|(m, x)| *m += x);
    }
    let n = phrase_vectors.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(mean)
}

/// Attention weights of each sentence token against `factor_rep`.
pub fn attention_weights(
    sentence_vectors: &[Vec<f64>],
    factor_rep: &[f64],
    weighting: AttentionWeighting,
) -> Result<Vec<f64>> {
    if sentence_vectors.is_empty() {
        return Err(Error::InvalidInput("sentence has no tokens".into()));
    }
    let mut alphas = Vec::with_capacity(sentence_vectors.len());
    for v in sentence_vectors {
        if v.len() != factor_rep.len() {
            return Err(Error::DimensionMismatch {
                expected: factor_rep.len(),
                actual: v.len(),
            });
        }
        alphas.push(cosine_unchecked(v, factor_rep));
    }
    if weighting == AttentionWeighting::Softmax {
        let max = alphas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        alphas.iter_mut().for_each(|a| *a = (*a - max).exp());
        let z: f64 = alphas.iter().sum();
        alphas.iter_mut().for_each(|a| *a /= z);
    }
    Ok(alphas)
}

/// `E(d) = sum_i alpha_i e(w_i)` with cosine attention against `E(f)`.
pub fn attended_representation(
    sentence_vectors: &[Vec<f64>],
    factor_rep: &[f64],
) -> Result<Vec<f64>> {
    attended_representation_with(sentence_vectors, factor_rep, AttentionWeighting::Cosine)
}

pub fn attended_representation_with(
    sentence_vectors: &[Vec<f64>],
    factor_rep: &[f64],
    weighting: AttentionWeighting,
) -> Result<Vec<f64>> {
    let alphas = attention_weights(sentence_vectors, factor_rep, weighting)?;
    let mut out = vec![0.0; factor_rep.len()];
    for (alpha, v) in alphas.iter().zip(sentence_vectors) {
        out.iter_mut().zip(v).for_each(|(o, x)| *o += alpha * x);
    }
    Ok(out)
}

/// The pair representation `[E(d) : E(f)]`.
pub fn pair_features(
    sentence_vectors: &[Vec<f64>],
    factor_rep: &[f64],
    weighting: AttentionWeighting,
) -> Result<Vec<f64>> {
    let mut x = attended_representation_with(sentence_vectors, factor_rep, weighting)?;
    x.extend_from_slice(factor_rep);
    Ok(x)
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}
