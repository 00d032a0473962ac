//! Idf-weighted bag-of-embeddings cosine baseline.

use std::collections::BTreeMap;

use crate::corpus::CorpusStats;
use crate::embedding::{cosine_unchecked, idf, EmbeddingStore};
use crate::factors::{Factor, FactorCatalog};

use super::model::rank_factors;

/// `sum_t idf(t) e(t)` over every non-stopword in-vocabulary occurrence.
/// `None` when no token contributes.
pub fn idf_weighted_sum(
    tokens: &[String],
    store: &EmbeddingStore,
    stats: &CorpusStats,
) -> Option<Vec<f64>> {
    let mut sum = vec![0.0; store.dim()];
    let mut any = false;
    for t in tokens {
        if store.is_stopword(t) {
            continue;
        }
        let Some(v) = store.get(t) else { continue };
        let w = idf(stats, t);
        sum.iter_mut().zip(v).for_each(|(s, x)| *s += w * x);
        any = true;
    }
    any.then_some(sum)
}

/// Cosine between the idf-weighted sums of the sentence and the factor
/// phrase; 0 when either side is degenerate.
pub fn baseline_score(
    tokens: &[String],
    factor: &Factor,
    store: &EmbeddingStore,
    stats: &CorpusStats,
) -> f64 {
    match (
        idf_weighted_sum(tokens, store, stats),
        idf_weighted_sum(&factor.phrase, store, stats),
    ) {
        (Some(s), Some(f)) => cosine_unchecked(&s, &f),
        _ => 0.0,
    }
}

/// Baseline with factor sums computed once.
#[derive(Clone, Debug)]
pub struct BaselineScorer<'a> {
    store: &'a EmbeddingStore,
    stats: &'a CorpusStats,
    factors: BTreeMap<String, Option<Vec<f64>>>,
    order: Vec<String>,
}

impl<'a> BaselineScorer<'a> {
    pub fn new(catalog: &FactorCatalog, store: &'a EmbeddingStore, stats: &'a CorpusStats) -> Self {
        let factors = catalog
            .factors()
            .iter()
            .map(|f| (f.id.clone(), idf_weighted_sum(&f.phrase, store, stats)))
            .collect();
        let order = catalog.factors().iter().map(|f| f.id.clone()).collect();
        BaselineScorer {
            store,
            stats,
            factors,
            order,
        }
    }

    /// Every factor's score for the sentence, highest first, ties by id.
    pub fn rank(&self, tokens: &[String]) -> Vec<(String, f64)> {
        let sentence = idf_weighted_sum(tokens, self.store, self.stats);
        let scores = self
            .order
            .iter()
            .map(|id| {
                let score = match (&sentence, &self.factors[id]) {
                    (Some(s), Some(f)) => cosine_unchecked(s, f),
                    _ => 0.0,
                };
                (id.clone(), score)
            })
            .collect();
        rank_factors(scores)
    }
}
