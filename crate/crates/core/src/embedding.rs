//! Static word vectors, tf-idf weighted sentence embeddings and cosine
//! similarity.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::corpus::{parse_word_list, CorpusStats};
use crate::error::{Error, Result};

/// The stopword list shipped with the crate.
pub const BUNDLED_STOPWORDS: &str = include_str!("../data/stopwords.txt");

pub fn bundled_stopwords() -> HashSet<String> {
    parse_word_list(BUNDLED_STOPWORDS)
}

pub fn load_stopwords(path: impl AsRef<Path>) -> Result<HashSet<String>> {
    let path = path.as_ref();
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_word_list(&content))
}

/// Token to vector map of fixed dimension, plus the stopword list used when
/// embedding sentences.
#[derive(Clone, Debug)]
pub struct EmbeddingStore {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
    stopwords: HashSet<String>,
}

impl EmbeddingStore {
    pub fn new(dim: usize, stopwords: HashSet<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput(
                "embedding dimension must be positive".into(),
            ));
        }
        Ok(EmbeddingStore {
            dim,
            vectors: HashMap::new(),
            stopwords,
        })
    }

    /// Builds a store from `(token, vector)` pairs. Later duplicates win.
    pub fn from_vectors<I, S>(dim: usize, vectors: I, stopwords: HashSet<String>) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut store = Self::new(dim, stopwords)?;
        for (token, vector) in vectors {
            store.insert(token, vector)?;
        }
        Ok(store)
    }

    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        self.vectors.insert(token.into(), vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// `None` means out of vocabulary; there is no fallback vector.
    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vectors.contains_key(token)
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    pub fn stopwords(&self) -> &HashSet<String> {
        &self.stopwords
    }
}

/// Loads a whitespace-separated `token v1 .. vD` file. `stopword_path: None`
/// selects the bundled list.
pub fn load_vectors(
    path: impl AsRef<Path>,
    stopword_path: Option<&Path>,
) -> Result<EmbeddingStore> {
    load_vectors_filtered(path, stopword_path, |_| true)
}

/// Like [`load_vectors`] but only retains tokens for which `keep` returns
/// true. Every line is still validated.
pub fn load_vectors_filtered(
    path: impl AsRef<Path>,
    stopword_path: Option<&Path>,
    keep: impl Fn(&str) -> bool,
) -> Result<EmbeddingStore> {
    let path = path.as_ref();
    let stopwords = match stopword_path {
        Some(p) => load_stopwords(p)?,
        None => bundled_stopwords(),
    };
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_vectors(BufReader::new(file), stopwords, keep).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        e => e,
    })
}

pub fn read_vectors(
    reader: impl BufRead,
    stopwords: HashSet<String>,
    keep: impl Fn(&str) -> bool,
) -> Result<EmbeddingStore> {
    let mut dim = None;
    let mut vectors = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io("<vectors>", e))?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let values: Vec<&str> = fields.collect();
        let expected = *dim.get_or_insert(values.len());
        if expected == 0 {
            return Err(Error::VectorFormat {
                line: line_no,
                message: "no vector components".into(),
            });
        }
        if values.len() != expected {
            return Err(Error::VectorFormat {
                line: line_no,
                message: format!("expected {expected} components, found {}", values.len()),
            });
        }
        let vector = values
            .iter()
            .enumerate()
            .map(|(j, v)| {
                v.parse::<f64>().map_err(|_| Error::VectorFormat {
                    line: line_no,
                    message: format!("column {}: cannot parse {v:?} as a number", j + 2),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if keep(token) {
            vectors.insert(token.to_owned(), vector);
        }
    }
    let dim = dim.ok_or_else(|| Error::VectorFormat {
        line: 0,
        message: "empty vector file".into(),
    })?;
    Ok(EmbeddingStore {
        dim,
        vectors,
        stopwords,
    })
}

/// Smoothed inverse document frequency over sentences:
/// `ln((1 + N) / (1 + df)) + 1`.
pub fn idf(stats: &CorpusStats, token: &str) -> f64 {
    let n = stats.n_sentences as f64;
    let df = stats.df(token) as f64;
    ((1.0 + n) / (1.0 + df)).ln() + 1.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct SentenceEmbedding {
    pub vector: Vec<f64>,
    pub n_contributing_tokens: usize,
}

impl SentenceEmbedding {
    pub fn degenerate(dim: usize) -> Self {
        SentenceEmbedding {
            vector: vec![0.0; dim],
            n_contributing_tokens: 0,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.n_contributing_tokens == 0
    }
}

/// tf-idf weighted mean of the in-vocabulary, non-stopword tokens.
pub fn sentence_embedding(
    tokens: &[String],
    store: &EmbeddingStore,
    stats: &CorpusStats,
) -> SentenceEmbedding {
    let mut tf: BTreeMap<&str, usize> = BTreeMap::new();
    for token in tokens {
        if !store.is_stopword(token) && store.contains(token) {
            *tf.entry(token.as_str()).or_insert(0) += 1;
        }
    }
    if tf.is_empty() {
        return SentenceEmbedding::degenerate(store.dim());
    }
    let mut vector = vec![0.0; store.dim()];
    let mut total_weight = 0.0;
    for (&token, &count) in &tf {
        let w = count as f64 * idf(stats, token);
        let e = store.get(token).expect("filtered to in-vocabulary tokens");
        for (acc, x) in vector.iter_mut().zip(e) {
            *acc += w * x;
        }
        total_weight += w;
    }
    vector.iter_mut().for_each(|x| *x /= total_weight);
    SentenceEmbedding {
        vector,
        n_contributing_tokens: tf.values().sum(),
    }
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

/// Cosine similarity, 0 when either vector has zero norm.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    Ok(cosine_unchecked(u, v))
}

pub(crate) fn cosine_unchecked(u: &[f64], v: &[f64]) -> f64 {
    let denom = norm(u) * norm(v);
    if denom == 0.0 {
        0.0
    } else {
        (dot(u, v) / denom).clamp(-1.0, 1.0)
    }
}
