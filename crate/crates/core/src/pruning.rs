//! Embedding-similarity pruning of a comment corpus.
//!
//! A comment's similarity to a factor is the best cosine between any of its
//! sentence embeddings and the factor embedding. A comment survives pruning
//! when it ranks in the top `percentile` of comments for at least one factor
//! and its best score over all factors reaches `threshold`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{Comment, CorpusStats};
use crate::embedding::{cosine_unchecked, sentence_embedding, EmbeddingStore, SentenceEmbedding};
use crate::error::{Error, Result};
use crate::factors::{factor_embedding, Factor, FactorCatalog};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PruneParams {
    pub percentile: f64,
    pub threshold: f64,
}

impl Default for PruneParams {
    fn default() -> Self {
        PruneParams {
            percentile: 0.20,
            threshold: 0.7,
        }
    }
}

impl PruneParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.percentile > 0.0 && self.percentile <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "percentile must lie in (0, 1], got {}",
                self.percentile
            )));
        }
        if self.threshold.is_nan() {
            return Err(Error::InvalidConfig("threshold is NaN".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimilarityRecord {
    pub comment_id: String,
    pub scores: BTreeMap<String, f64>,
    pub max_score: f64,
    /// Factor attaining `max_score`, smallest id on ties. `None` only for an
    /// empty catalog.
    pub argmax_factor: Option<String>,
}

impl SimilarityRecord {
    fn new(comment_id: String, scores: BTreeMap<String, f64>) -> Self {
        // BTreeMap iterates ids in order, so strict `>` keeps the smallest id.
        let mut best: Option<(&String, f64)> = None;
        for (id, &s) in &scores {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((id, s));
            }
        }
        let (argmax_factor, max_score) = match best {
            Some((id, s)) => (Some(id.clone()), s),
            None => (None, f64::NEG_INFINITY),
        };
        SimilarityRecord {
            comment_id,
            scores,
            max_score,
            argmax_factor,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PruneOutcome {
    pub kept: Vec<Comment>,
    pub records: Vec<SimilarityRecord>,
}

fn sentence_embeddings(
    comment: &Comment,
    store: &EmbeddingStore,
    stats: &CorpusStats,
) -> Vec<SentenceEmbedding> {
    comment
        .sentences
        .iter()
        .map(|s| sentence_embedding(&s.tokens, store, stats))
        .collect()
}

fn max_cosine(sentences: &[SentenceEmbedding], factor_vec: &[f64]) -> f64 {
    sentences
        .iter()
        .map(|s| {
            if s.is_degenerate() {
                0.0
            } else {
                cosine_unchecked(&s.vector, factor_vec)
            }
        })
        .fold(None, |acc: Option<f64>, x| {
            Some(acc.map_or(x, |a| a.max(x)))
        })
        .unwrap_or(0.0)
}

/// `max_i cosine(sentence_i, E(f))`. Degenerate sentences count as 0, and
/// a comment without sentences scores 0.
pub fn comment_factor_sim(
    comment: &Comment,
    factor: &Factor,
    store: &EmbeddingStore,
    stats: &CorpusStats,
) -> Result<f64> {
    let fv = factor_embedding(factor, store)?;
    Ok(max_cosine(&sentence_embeddings(comment, store, stats), &fv))
}

/// Scores every comment against every catalog factor.
pub fn score_comments(
    comments: &[Comment],
    catalog: &FactorCatalog,
    store: &EmbeddingStore,
    stats: &CorpusStats,
) -> Result<Vec<SimilarityRecord>> {
    let factor_vecs = catalog
        .factors()
        .iter()
        .map(|f| Ok((f.id.clone(), factor_embedding(f, store)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(comments
        .iter()
        .map(|c| {
            let sentences = sentence_embeddings(c, store, stats);
            let scores = factor_vecs
                .iter()
                .map(|(id, fv)| (id.clone(), max_cosine(&sentences, fv)))
                .collect();
            SimilarityRecord::new(c.id.clone(), scores)
        })
        .collect())
}

/// Number of comments admitted per factor, `ceil(percentile * n)`. The small
/// slack absorbs products such as `0.7 * 10 = 7.000000000000001`.
pub fn cutoff_count(percentile: f64, n: usize) -> usize {
    ((percentile * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Indices of records that pass both pruning rules. Ties at the per-factor
/// cutoff are all admitted.
pub fn select_relevant(records: &[SimilarityRecord], params: &PruneParams) -> Result<Vec<bool>> {
    params.validate()?;
    let n = records.len();
    let mut in_top = vec![false; n];
    if n == 0 {
        return Ok(in_top);
    }
    let cutoff = cutoff_count(params.percentile, n).max(1);
    let factor_ids: BTreeSet<&String> = records.iter().flat_map(|r| r.scores.keys()).collect();
    let score =
        |r: &SimilarityRecord, fid: &str| r.scores.get(fid).copied().unwrap_or(f64::NEG_INFINITY);
    for fid in factor_ids {
        let mut scores: Vec<f64> = records.iter().map(|r| score(r, fid)).collect();
        scores.sort_by(|a, b| b.total_cmp(a));
        let boundary = scores[cutoff - 1];
        for (flag, r) in in_top.iter_mut().zip(records) {
            if score(r, fid) >= boundary {
                *flag = true;
            }
        }
    }
    Ok(in_top
        .into_iter()
        .zip(records)
        .map(|(top, r)| top && r.max_score >= params.threshold)
        .collect())
}

pub fn prune(
    comments: &[Comment],
    catalog: &FactorCatalog,
    store: &EmbeddingStore,
    stats: &CorpusStats,
    params: &PruneParams,
) -> Result<PruneOutcome> {
    params.validate()?;
    let records = score_comments(comments, catalog, store, stats)?;
    let keep = select_relevant(&records, params)?;
    let kept = comments
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(c, _)| c.clone())
        .collect();
    Ok(PruneOutcome { kept, records })
}

/// Token occurrence counts over all sentences, stopwords excluded.
pub fn token_frequency_export(
    comments: &[Comment],
    stopwords: &HashSet<String>,
) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for token in comments.iter().flat_map(Comment::tokens) {
        if !stopwords.contains(token) {
            *counts.entry(token.to_owned()).or_insert(0) += 1;
        }
    }
    counts
}

/// Writes `token<TAB>count`, highest counts first, ties by token.
pub fn write_token_frequencies(
    counts: &BTreeMap<String, usize>,
    mut out: impl Write,
) -> std::io::Result<()> {
    let mut rows: Vec<_> = counts.iter().collect();
    rows.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
    for (token, count) in rows {
        writeln!(out, "{token}\t{count}")?;
    }
    Ok(())
}

/// Writes `comment_id<TAB>factor_id<TAB>score` rows, then per comment a
/// summary row `comment_id<TAB>MAX<TAB>max_score<TAB>argmax_factor<TAB>kept`.
pub fn write_similarity_records(
    records: &[SimilarityRecord],
    kept: &[bool],
    mut out: impl Write,
) -> std::io::Result<()> {
    for (r, &k) in records.iter().zip(kept) {
        for (fid, s) in &r.scores {
            writeln!(out, "{}\t{}\t{:.9}", r.comment_id, fid, s)?;
        }
        writeln!(
            out,
            "{}\tMAX\t{:.9}\t{}\t{}",
            r.comment_id,
            r.max_score,
            r.argmax_factor.as_deref().unwrap_or("-"),
            u8::from(k)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::compute_stats;

    fn single_factor_catalog() -> FactorCatalog {
        FactorCatalog::parse("CATEGORY\tc\tC\nFACTOR\tf\tanchor\tc\n").unwrap()
    }

    fn record(id: &str, scores: &[(&str, f64)]) -> SimilarityRecord {
        SimilarityRecord::new(
            id.into(),
            scores.iter().map(|(f, s)| (f.to_string(), *s)).collect(),
        )
    }

    #[test]
    fn argmax_ties_pick_smallest_id() {
        let r = record("c", &[("b", 0.5), ("a", 0.5), ("c", 0.1)]);
        assert_eq!(r.argmax_factor.as_deref(), Some("a"));
        assert_eq!(r.max_score, 0.5);
    }

    #[test]
    fn comment_sim_examples() {
        let store = EmbeddingStore::from_vectors(
            2,
            [
                ("anchor", vec![1.0, 0.0]),
                ("near", vec![0.8, 0.6]),
                ("far", vec![0.3, (1.0f64 - 0.09).sqrt()]),
                ("the", vec![1.0, 0.0]),
            ],
            ["the".to_string()].into_iter().collect(),
        )
        .unwrap();
        let catalog = single_factor_catalog();
        let f = &catalog.factors()[0];
        let stats = CorpusStats::default();

        let exact = Comment::new("a", "", "", "anchor");
        assert!((comment_factor_sim(&exact, f, &store, &stats).unwrap() - 1.0).abs() < 1e-12);

        let stop = Comment::new("b", "", "", "the. the the");
        assert_eq!(comment_factor_sim(&stop, f, &store, &stats).unwrap(), 0.0);

        let two = Comment::new("c", "", "", "far. near");
        assert!((comment_factor_sim(&two, f, &store, &stats).unwrap() - 0.8).abs() < 1e-12);
        let swapped = Comment::new("d", "", "", "near. far");
        assert_eq!(
            comment_factor_sim(&two, f, &store, &stats).unwrap(),
            comment_factor_sim(&swapped, f, &store, &stats).unwrap()
        );
    }

    #[test]
    fn top_percentile_of_ten() {
        let records: Vec<_> = (0..10)
            .map(|i| record(&format!("c{i}"), &[("f", 0.70 + 0.02 * i as f64)]))
            .collect();
        let keep = select_relevant(&records, &PruneParams::default()).unwrap();
        let kept: Vec<_> = (0..10).filter(|&i| keep[i]).collect();
        assert_eq!(kept, [8, 9]);
    }

    #[test]
    fn vacuous_and_impossible_filters() {
        let records: Vec<_> = (0..7)
            .map(|i| record(&format!("c{i}"), &[("f", 0.1 * i as f64), ("g", 0.3)]))
            .collect();
        let all = PruneParams {
            percentile: 1.0,
            threshold: 0.0,
        };
        assert!(select_relevant(&records, &all).unwrap().iter().all(|&k| k));
        let none = PruneParams {
            percentile: 1.0,
            threshold: 2.0,
        };
        assert!(select_relevant(&records, &none)
            .unwrap()
            .iter()
            .all(|&k| !k));
        assert!(select_relevant(&[], &PruneParams::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn boundary_ties_are_inclusive() {
        let records: Vec<_> = [0.9, 0.8, 0.8, 0.8, 0.1]
            .iter()
            .enumerate()
            .map(|(i, &s)| record(&format!("c{i}"), &[("f", s)]))
            .collect();
        let p = PruneParams {
            percentile: 0.4,
            threshold: 0.0,
        };
        let keep = select_relevant(&records, &p).unwrap();
        assert_eq!(keep, [true, true, true, true, false]);
    }

    #[test]
    fn rejects_bad_percentile() {
        let bad = PruneParams {
            percentile: 0.0,
            threshold: 0.7,
        };
        assert!(select_relevant(&[], &bad).is_err());
        assert_eq!(cutoff_count(0.7, 10), 7);
        assert_eq!(cutoff_count(0.2, 11), 3);
        assert_eq!(cutoff_count(1.0, 4), 4);
    }

    #[test]
    fn token_frequencies() {
        let comments = vec![
            Comment::new("a", "", "", "Water water. the water"),
            Comment::new("b", "", "", "the the"),
        ];
        let stop: HashSet<String> = ["the".to_string()].into_iter().collect();
        let counts = token_frequency_export(&comments, &stop);
        assert_eq!(counts.get("water"), Some(&3));
        assert_eq!(counts.len(), 1);
        assert!(token_frequency_export(&comments[1..], &stop).is_empty());
        assert!(token_frequency_export(&[], &stop).is_empty());

        let mut out = Vec::new();
        write_token_frequencies(&counts, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "water\t3\n");
    }

    #[test]
    fn prune_end_to_end() {
        let store = EmbeddingStore::from_vectors(
            2,
            [("anchor", vec![1.0, 0.0]), ("other", vec![0.0, 1.0])],
            HashSet::new(),
        )
        .unwrap();
        let comments = vec![
            Comment::new("a", "", "", "anchor"),
            Comment::new("b", "", "", "other"),
        ];
        let stats = compute_stats(&comments);
        let out = prune(
            &comments,
            &single_factor_catalog(),
            &store,
            &stats,
            &PruneParams {
                percentile: 0.5,
                threshold: 0.7,
            },
        )
        .unwrap();
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.kept.len(), 1);
        assert_eq!(out.kept[0].id, "a");
    }
}
