//! LDA topic modeling by collapsed Gibbs sampling.
//!
//! Documents are comments. Stopwords and tokens rarer than
//! `min_token_count` are dropped before sampling. Point estimates come from
//! the counts of the final sweep:
//!
//! ```text
//! phi[k][v]   = (n_kv + beta)  / (n_k + V * beta)
//! theta[d][k] = (n_dk + alpha) / (n_d + K * alpha)
//! ```

use std::collections::{BTreeMap, HashSet};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Comment;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaConfig {
    pub n_topics: usize,
    /// Symmetric document-topic prior; `None` means `50 / n_topics`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub n_iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub min_token_count: usize,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig {
            n_topics: 5,
            alpha: None,
            beta: 0.01,
            n_iterations: 1000,
            burn_in: 200,
            seed: 0,
            min_token_count: 3,
        }
    }
}

impl LdaConfig {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.n_topics as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("lda: {m}")));
        if self.n_topics == 0 {
            return bad("n_topics must be at least 1");
        }
        let positive = |x: f64| x > 0.0;
        if !positive(self.alpha()) || !positive(self.beta) {
            return bad("alpha and beta must be positive");
        }
        if self.n_iterations == 0 {
            return bad("n_iterations must be positive");
        }
        if self.burn_in >= self.n_iterations {
            return bad("burn_in must be smaller than n_iterations");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub config: LdaConfig,
    pub vocabulary: Vec<String>,
    pub doc_ids: Vec<String>,
    /// K x V, rows sum to 1.
    pub topic_word: Vec<Vec<f64>>,
    /// D x K, rows sum to 1.
    pub doc_topic: Vec<Vec<f64>>,
    /// Share of corpus tokens assigned to each topic in the final sweep.
    pub topic_proportions: Vec<f64>,
}

/// Builds the LDA vocabulary (sorted) and per-document token-id lists.
pub fn build_documents(
    comments: &[Comment],
    stopwords: &HashSet<String>,
    min_token_count: usize,
) -> (Vec<String>, Vec<Vec<usize>>) {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for tok in comments.iter().flat_map(Comment::tokens) {
        if !stopwords.contains(tok) {
            *counts.entry(tok).or_insert(0) += 1;
        }
    }
    let vocabulary: Vec<String> = counts
        .iter()
        .filter(|(_, &n)| n >= min_token_count)
        .map(|(t, _)| t.to_string())
        .collect();
    let index: BTreeMap<&str, usize> = vocabulary
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();
    let docs = comments
        .iter()
        .map(|c| c.tokens().filter_map(|t| index.get(t).copied()).collect())
        .collect();
    (vocabulary, docs)
}

/// Collapsed Gibbs sampler state.
pub struct LdaSampler {
    n_topics: usize,
    vocab_size: usize,
    alpha: f64,
    beta: f64,
    docs: Vec<Vec<usize>>,
    assignments: Vec<Vec<usize>>,
    doc_topic: Vec<Vec<usize>>,
    // row-major K x V
    topic_word: Vec<usize>,
    topic_total: Vec<usize>,
    rng: ChaCha8Rng,
    weights: Vec<f64>,
}

impl LdaSampler {
    /// Random initial assignment of every token.
    pub fn new(docs: Vec<Vec<usize>>, vocab_size: usize, config: &LdaConfig) -> Result<Self> {
        config.validate()?;
        let n_tokens: usize = docs.iter().map(Vec::len).sum();
        if vocab_size == 0 || n_tokens == 0 {
            return Err(Error::InvalidInput("empty effective vocabulary".into()));
        }
        let k = config.n_topics;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut doc_topic = vec![vec![0usize; k]; docs.len()];
        let mut topic_word = vec![0usize; k * vocab_size];
        let mut topic_total = vec![0usize; k];
        let mut assignments = Vec::with_capacity(docs.len());
        for (d, doc) in docs.iter().enumerate() {
            let z: Vec<usize> = doc.iter().map(|_| rng.random_range(0..k)).collect();
            for (&w, &t) in doc.iter().zip(&z) {
                if w >= vocab_size {
                    return Err(Error::InvalidInput(format!("token id {w} out of range")));
                }
                doc_topic[d][t] += 1;
                topic_word[t * vocab_size + w] += 1;
                topic_total[t] += 1;
            }
            assignments.push(z);
        }
        Ok(LdaSampler {
            n_topics: k,
            vocab_size,
            alpha: config.alpha(),
            beta: config.beta,
            docs,
            assignments,
            doc_topic,
            topic_word,
            topic_total,
            rng,
            weights: vec![0.0; k],
        })
    }

    /// One pass over every token in corpus order.
    pub fn sweep(&mut self) {
        let v_beta = self.vocab_size as f64 * self.beta;
        for d in 0..self.docs.len() {
            for i in 0..self.docs[d].len() {
                let w = self.docs[d][i];
                let old = self.assignments[d][i];
                self.doc_topic[d][old] -= 1;
                self.topic_word[old * self.vocab_size + w] -= 1;
                self.topic_total[old] -= 1;

                let mut total = 0.0;
                for k in 0..self.n_topics {
                    let p = (self.doc_topic[d][k] as f64 + self.alpha)
                        * (self.topic_word[k * self.vocab_size + w] as f64 + self.beta)
                        / (self.topic_total[k] as f64 + v_beta);
                    total += p;
                    self.weights[k] = total;
                }
                let u = self.rng.random::<f64>() * total;
                let new = self
                    .weights
                    .iter()
                    .position(|&c| u < c)
                    .unwrap_or(self.n_topics - 1);

                self.assignments[d][i] = new;
                self.doc_topic[d][new] += 1;
                self.topic_word[new * self.vocab_size + w] += 1;
                self.topic_total[new] += 1;
            }
        }
    }

    /// Per-document counts sum to document lengths and topic-word counts sum
    /// to the corpus token count, consistently with the assignments.
    pub fn counts_consistent(&self) -> bool {
        let docs_ok = self
            .docs
            .iter()
            .zip(&self.doc_topic)
            .all(|(doc, counts)| counts.iter().sum::<usize>() == doc.len());
        let n_tokens: usize = self.docs.iter().map(Vec::len).sum();
        let words_ok = self.topic_word.iter().sum::<usize>() == n_tokens
            && self.topic_total.iter().sum::<usize>() == n_tokens;
        let rows_ok = (0..self.n_topics).all(|k| {
            self.topic_word[k * self.vocab_size..(k + 1) * self.vocab_size]
                .iter()
                .sum::<usize>()
                == self.topic_total[k]
        });
        let mut recount = vec![0usize; self.n_topics * self.vocab_size];
        for (doc, z) in self.docs.iter().zip(&self.assignments) {
            for (&w, &t) in doc.iter().zip(z) {
                recount[t * self.vocab_size + w] += 1;
            }
        }
        docs_ok && words_ok && rows_ok && recount == self.topic_word
    }

    pub fn topic_word_estimate(&self) -> Vec<Vec<f64>> {
        let v_beta = self.vocab_size as f64 * self.beta;
        (0..self.n_topics)
            .map(|k| {
                let denom = self.topic_total[k] as f64 + v_beta;
                self.topic_word[k * self.vocab_size..(k + 1) * self.vocab_size]
                    .iter()
                    .map(|&n| (n as f64 + self.beta) / denom)
                    .collect()
            })
            .collect()
    }

    pub fn doc_topic_estimate(&self) -> Vec<Vec<f64>> {
        let k_alpha = self.n_topics as f64 * self.alpha;
        self.doc_topic
            .iter()
            .zip(&self.docs)
            .map(|(counts, doc)| {
                let denom = doc.len() as f64 + k_alpha;
                counts
                    .iter()
                    .map(|&n| (n as f64 + self.alpha) / denom)
                    .collect()
            })
            .collect()
    }

    pub fn topic_proportions(&self) -> Vec<f64> {
        let n: usize = self.topic_total.iter().sum();
        self.topic_total
            .iter()
            .map(|&c| c as f64 / n as f64)
            .collect()
    }
}

/// Fits LDA over comments. Deterministic for a given seed.
pub fn fit_lda(
    comments: &[Comment],
    stopwords: &HashSet<String>,
    config: &LdaConfig,
) -> Result<TopicModel> {
    config.validate()?;
    let (vocabulary, docs) = build_documents(comments, stopwords, config.min_token_count);
    let mut sampler = LdaSampler::new(docs, vocabulary.len(), config)?;
    for _ in 0..config.n_iterations {
        sampler.sweep();
    }
    Ok(TopicModel {
        config: config.clone(),
        vocabulary,
        doc_ids: comments.iter().map(|c| c.id.clone()).collect(),
        topic_word: sampler.topic_word_estimate(),
        doc_topic: sampler.doc_topic_estimate(),
        topic_proportions: sampler.topic_proportions(),
    })
}

impl TopicModel {
    pub fn n_topics(&self) -> usize {
        self.topic_word.len()
    }

    /// The `n` most probable tokens of topic `k`, ties in token order.
    pub fn top_tokens(&self, k: usize, n: usize) -> Result<Vec<String>> {
        let row = self.topic_word.get(k).ok_or_else(|| {
            Error::InvalidInput(format!("topic {k} out of range (K = {})", self.n_topics()))
        })?;
        let mut idx: Vec<usize> = (0..row.len()).collect();
        // vocabulary is sorted, so a stable sort keeps ties lexicographic
        idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
        Ok(idx
            .into_iter()
            .take(n)
            .map(|i| self.vocabulary[i].clone())
            .collect())
    }

    pub fn topic_proportions(&self) -> &[f64] {
        &self.topic_proportions
    }

    pub fn write_matrix(rows: &[Vec<f64>], mut out: impl Write) -> std::io::Result<()> {
        for row in rows {
            let line: Vec<String> = row.iter().map(|x| format!("{x:e}")).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }

    /// `topic<TAB>proportion<TAB>comma-separated top tokens`.
    pub fn write_summary(&self, n_tokens: usize, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "# topic\tproportion\ttop_tokens")?;
        for k in 0..self.n_topics() {
            let top = self.top_tokens(k, n_tokens).expect("k in range");
            writeln!(
                out,
                "{k}\t{:.4}\t{}",
                self.topic_proportions[k],
                top.join(",")
            )?;
        }
        Ok(())
    }
}
