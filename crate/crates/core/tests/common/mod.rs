//! Toy data builders and naive reference implementations shared by the
//! integration tests. Nothing here calls the library's numeric code.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};

use attrib::corpus::Comment;
use attrib::embedding::EmbeddingStore;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const WORDS: [&str; 16] = [
    "river", "dam", "trees", "rain", "city", "farm", "lake", "well", "the", "and", "of", "pipe",
    "oil", "heat", "crop", "flood",
];
pub const STOPWORDS: [&str; 3] = ["the", "and", "of"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stopwords() -> HashSet<String> {
    STOPWORDS.iter().map(|s| s.to_string()).collect()
}

pub fn random_vector(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Every word but the last two gets a vector; those stay out of vocabulary.
pub fn random_store(rng: &mut impl Rng, dim: usize) -> EmbeddingStore {
    let vectors: Vec<(String, Vec<f64>)> = WORDS[..WORDS.len() - 2]
        .iter()
        .map(|w| (w.to_string(), random_vector(rng, dim)))
        .collect();
    EmbeddingStore::from_vectors(dim, vectors, stopwords()).unwrap()
}

pub fn random_tokens(rng: &mut impl Rng, max_len: usize) -> Vec<String> {
    let n = rng.random_range(1..=max_len);
    (0..n)
        .map(|_| WORDS[rng.random_range(0..WORDS.len())].to_string())
        .collect()
}

pub fn random_text(rng: &mut impl Rng) -> String {
    let n_sentences = rng.random_range(1..=3);
    (0..n_sentences)
        .map(|_| random_tokens(rng, 6).join(" "))
        .collect::<Vec<_>>()
        .join(". ")
}

pub fn random_corpus(rng: &mut impl Rng, n: usize) -> Vec<Comment> {
    (0..n)
        .map(|i| Comment::new(format!("c{i}"), "v", "u", random_text(rng)))
        .collect()
}

pub fn naive_dot(u: &[f64], v: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..u.len() {
        s += u[i] * v[i];
    }
    s
}

pub fn naive_cosine(u: &[f64], v: &[f64]) -> f64 {
    let nu = naive_dot(u, u).sqrt();
    let nv = naive_dot(v, v).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    naive_dot(u, v) / (nu * nv)
}

/// Sentence-level document frequencies by brute force.
pub fn naive_df(comments: &[Comment]) -> (usize, BTreeMap<String, usize>) {
    let mut n = 0;
    let mut df = BTreeMap::new();
    for c in comments {
        for s in &c.sentences {
            n += 1;
            let mut seen: Vec<&String> = Vec::new();
            for t in &s.tokens {
                if !seen.contains(&t) {
                    seen.push(t);
                    *df.entry(t.clone()).or_insert(0) += 1;
                }
            }
        }
    }
    (n, df)
}

pub fn naive_idf(n_sentences: usize, df: usize) -> f64 {
    ((1 + n_sentences) as f64 / (1 + df) as f64).ln() + 1.0
}
