//! Per-token vectors for sentences and factor phrases.
//!
//! The token-vector file is the interchange format with external embedders:
//!
//! ```text
//! DIM <d>
//! KEY <comment_id> <sentence_index> <n_tokens>
//! <d space-separated floats>      (n_tokens lines)
//! KEY ...
//! ```
//!
//! Factor phrases use the same layout with the factor id in place of the
//! comment id and sentence index 0. Components are written with 9
//! significant digits, which reproduces any `f32` value exactly.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::corpus::{Comment, SentenceKey};
use crate::embedding::EmbeddingStore;
use crate::error::{Error, Result};
use crate::factors::{factor_embedding, FactorCatalog};

use super::factor_representation;

#[derive(Clone, Debug, PartialEq)]
pub struct TokenVectors {
    pub key: SentenceKey,
    pub dim: usize,
    pub vectors: Vec<Vec<f64>>,
}

impl TokenVectors {
    pub fn new(key: SentenceKey, dim: usize, vectors: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(bad) = vectors.iter().find(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: bad.len(),
            });
        }
        Ok(TokenVectors { key, dim, vectors })
    }

    /// Static vectors for `tokens`. Out-of-vocabulary tokens get the zero
    /// vector, which has zero attention weight and so contributes nothing.
    pub fn from_store(key: SentenceKey, tokens: &[String], store: &EmbeddingStore) -> Self {
        let zero = vec![0.0; store.dim()];
        let vectors = tokens
            .iter()
            .map(|t| store.get(t).map_or_else(|| zero.clone(), <[f64]>::to_vec))
            .collect();
        TokenVectors {
            key,
            dim: store.dim(),
            vectors,
        }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Nine significant digits: components are single precision, and nine
/// digits identify every `f32` exactly.
pub fn format_component(x: f64) -> String {
    format!("{:.8e}", x as f32)
}

fn check_id(id: &str) -> Result<()> {
    if id.is_empty() || id.chars().any(char::is_whitespace) {
        return Err(Error::InvalidInput(format!(
            "id {id:?} cannot be written to a token-vector file"
        )));
    }
    Ok(())
}

pub fn write_token_vectors(dim: usize, blocks: &[TokenVectors], mut out: impl Write) -> Result<()> {
    let io = |e| Error::io("<token vectors>", e);
    writeln!(out, "DIM {dim}").map_err(io)?;
    for block in blocks {
        check_id(&block.key.comment_id)?;
        if block.dim != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: block.dim,
            });
        }
        writeln!(
            out,
            "KEY {} {} {}",
            block.key.comment_id,
            block.key.sentence_index,
            block.vectors.len()
        )
        .map_err(io)?;
        for v in &block.vectors {
            let line: Vec<String> = v.iter().map(|&x| format_component(x)).collect();
            writeln!(out, "{}", line.join(" ")).map_err(io)?;
        }
    }
    Ok(())
}

pub fn read_token_vectors(reader: impl BufRead) -> Result<(usize, Vec<TokenVectors>)> {
    let mut lines = reader.lines().enumerate();
    let mut next = |expect: &str| -> Result<Option<(usize, String)>> {
        match lines.next() {
            None => Ok(None),
            Some((i, Ok(l))) => Ok(Some((i + 1, l))),
            Some((i, Err(e))) => Err(Error::TokenVectorFormat {
                line: i + 1,
                message: format!("{expect}: {e}"),
            }),
        }
    };
    let bad = |line: usize, message: String| Error::TokenVectorFormat { line, message };

    let (line_no, header) = next("header")?.ok_or_else(|| bad(1, "missing DIM header".into()))?;
    let dim: usize = match header.split_whitespace().collect::<Vec<_>>()[..] {
        ["DIM", d] => d
            .parse()
            .map_err(|_| bad(line_no, format!("bad dimension {d:?}")))?,
        _ => return Err(bad(line_no, "expected `DIM <d>`".into())),
    };
    if dim == 0 {
        return Err(bad(line_no, "dimension must be positive".into()));
    }

    let mut blocks = Vec::new();
    let mut seen = HashMap::new();
    while let Some((line_no, line)) = next("KEY line")? {
        if line.trim().is_empty() {
            continue;
        }
        let (id, index, n) = match line.split_whitespace().collect::<Vec<_>>()[..] {
            ["KEY", id, index, n] => {
                let index: usize = index
                    .parse()
                    .map_err(|_| bad(line_no, format!("bad sentence index {index:?}")))?;
                let n: usize = n
                    .parse()
                    .map_err(|_| bad(line_no, format!("bad token count {n:?}")))?;
                (id.to_owned(), index, n)
            }
            _ => {
                return Err(bad(
                    line_no,
                    "expected `KEY <id> <index> <n_tokens>`".into(),
                ))
            }
        };
        let key = SentenceKey::new(id, index);
        if let Some(first) = seen.insert(key.clone(), line_no) {
            return Err(bad(
                line_no,
                format!("key {key} already defined on line {first}"),
            ));
        }
        let mut vectors = Vec::with_capacity(n);
        for _ in 0..n {
            let (vline, text) = next("vector line")?
                .ok_or_else(|| bad(line_no, format!("block {key} ends early")))?;
            let v = text
                .split_whitespace()
                .map(|x| {
                    x.parse::<f32>()
                        .map(f64::from)
                        .map_err(|_| bad(vline, format!("cannot parse {x:?} as a number")))
                })
                .collect::<Result<Vec<_>>>()?;
            if v.len() != dim {
                return Err(bad(
                    vline,
                    format!("expected {dim} components, found {}", v.len()),
                ));
            }
            vectors.push(v);
        }
        blocks.push(TokenVectors { key, dim, vectors });
    }
    Ok((dim, blocks))
}

pub fn load_token_vectors(path: impl AsRef<Path>) -> Result<(usize, Vec<TokenVectors>)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_token_vectors(BufReader::new(file))
}

/// Sentence token vectors and factor representations `E(f)` for a corpus.
#[derive(Clone, Debug)]
pub struct VectorBank {
    dim: usize,
    sentences: HashMap<SentenceKey, TokenVectors>,
    factors: BTreeMap<String, Vec<f64>>,
}

impl VectorBank {
    /// Static vectors for every sentence of `comments`; factor
    /// representations are phrase means over in-vocabulary tokens.
    pub fn from_static(
        comments: &[Comment],
        catalog: &FactorCatalog,
        store: &EmbeddingStore,
    ) -> Result<Self> {
        let factors = catalog
            .factors()
            .iter()
            .map(|f| Ok((f.id.clone(), factor_embedding(f, store)?)))
            .collect::<Result<_>>()?;
        let sentences = comments
            .iter()
            .flat_map(|c| c.sentences.iter().map(move |s| (c, s)))
            .map(|(c, s)| {
                let key = c.sentence_key(s.index);
                (key.clone(), TokenVectors::from_store(key, &s.tokens, store))
            })
            .collect();
        Ok(VectorBank {
            dim: store.dim(),
            sentences,
            factors,
        })
    }

    /// Contextual vectors read from token-vector files. Every catalog factor
    /// must have a block keyed `(factor_id, 0)`.
    pub fn from_token_vectors(
        sentence_blocks: Vec<TokenVectors>,
        factor_blocks: Vec<TokenVectors>,
        catalog: &FactorCatalog,
    ) -> Result<Self> {
        let dim = sentence_blocks
            .first()
            .or(factor_blocks.first())
            .map(|b| b.dim)
            .ok_or_else(|| Error::InvalidInput("no token vectors".into()))?;
        for b in sentence_blocks.iter().chain(&factor_blocks) {
            if b.dim != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: b.dim,
                });
            }
        }
        let by_factor: HashMap<&str, &TokenVectors> = factor_blocks
            .iter()
            .map(|b| (b.key.comment_id.as_str(), b))
            .collect();
        let factors = catalog
            .factors()
            .iter()
            .map(|f| {
                let block = by_factor.get(f.id.as_str()).ok_or_else(|| {
                    Error::InvalidInput(format!("no token vectors for factor {}", f.id))
                })?;
                Ok((f.id.clone(), factor_representation(&block.vectors)?))
            })
            .collect::<Result<_>>()?;
        let sentences = sentence_blocks
            .into_iter()
            .map(|b| (b.key.clone(), b))
            .collect();
        Ok(VectorBank {
            dim,
            sentences,
            factors,
        })
    }

    /// Checks that every sentence of `comments` has a block with one vector
    /// per token.
    pub fn check_alignment(&self, comments: &[Comment]) -> Result<()> {
        for c in comments {
            for s in &c.sentences {
                let key = c.sentence_key(s.index);
                let block = self.sentences.get(&key).ok_or_else(|| {
                    Error::InvalidInput(format!("no token vectors for sentence {key}"))
                })?;
                if block.len() != s.tokens.len() {
                    return Err(Error::InvalidInput(format!(
                        "sentence {key} has {} tokens but {} vectors",
                        s.tokens.len(),
                        block.len()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sentence(&self, key: &SentenceKey) -> Option<&TokenVectors> {
        self.sentences.get(key)
    }

    pub fn factor(&self, factor_id: &str) -> Option<&[f64]> {
        self.factors.get(factor_id).map(Vec::as_slice)
    }

    pub fn factors(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.factors
    }
}
