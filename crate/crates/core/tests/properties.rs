mod common;

use std::collections::{BTreeMap, BTreeSet};

use attrib::attribution::{
    attended_representation, read_token_vectors, write_token_vectors, AttributionModel,
    TokenVectors,
};
use attrib::corpus::{
    compute_stats, english_heuristic_filter, sentence_split, tokenize, Comment, SentenceKey,
};
use attrib::embedding::{cosine, idf, sentence_embedding};
use attrib::evaluation::{fleiss_kappa, resolution_eval};
use attrib::factors::FactorCatalog;
use attrib::pruning::{prune, PruneParams};
use common::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn vec_strategy(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, dim)
}

proptest! {
    #[test]
    fn cosine_matches_reference(u in vec_strategy(6), v in vec_strategy(6)) {
        let c = cosine(&u, &v).unwrap();
        prop_assert!((-1.0..=1.0).contains(&c));
        prop_assert!((c - naive_cosine(&u, &v)).abs() < 1e-9);
        prop_assert_eq!(c, cosine(&v, &u).unwrap());
    }

    #[test]
    fn cosine_is_scale_invariant(u in vec_strategy(5), v in vec_strategy(5), a in 0.01f64..50.0) {
        let scaled: Vec<f64> = u.iter().map(|x| a * x).collect();
        let (c1, c2) = (cosine(&u, &v).unwrap(), cosine(&scaled, &v).unwrap());
        prop_assert!((c1 - c2).abs() < 1e-9);
    }

    #[test]
    fn sentence_embedding_ignores_token_order(seed in any::<u64>()) {
        let mut r = rng(seed);
        let store = random_store(&mut r, 4);
        let corpus = random_corpus(&mut r, 6);
        let stats = compute_stats(&corpus);
        let mut tokens = random_tokens(&mut r, 8);
        let a = sentence_embedding(&tokens, &store, &stats);
        tokens.shuffle(&mut r);
        let b = sentence_embedding(&tokens, &store, &stats);
        prop_assert_eq!(a.n_contributing_tokens, b.n_contributing_tokens);
        for (x, y) in a.vector.iter().zip(&b.vector) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn sentence_embedding_matches_reference(seed in any::<u64>()) {
        let mut r = rng(seed);
        let store = random_store(&mut r, 4);
        let corpus = random_corpus(&mut r, 6);
        let stats = compute_stats(&corpus);
        let (n, df) = naive_df(&corpus);
        let tokens = random_tokens(&mut r, 8);

        let mut num = [0.0; 4];
        let mut den = 0.0;
        for t in &tokens {
            if STOPWORDS.contains(&t.as_str()) {
                continue;
            }
            let Some(v) = store.get(t) else { continue };
            let w = naive_idf(n, df.get(t).copied().unwrap_or(0));
            for (acc, x) in num.iter_mut().zip(v) {
                *acc += w * x;
            }
            den += w;
        }
        let got = sentence_embedding(&tokens, &store, &stats);
        if den == 0.0 {
            prop_assert!(got.is_degenerate());
            prop_assert!(got.vector.iter().all(|&x| x == 0.0));
        } else {
            for (g, acc) in got.vector.iter().zip(&num) {
                prop_assert!((g - acc / den).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn idf_decreases_with_document_frequency(seed in any::<u64>()) {
        let mut r = rng(seed);
        let corpus = random_corpus(&mut r, 8);
        let stats = compute_stats(&corpus);
        let mut by_df: Vec<(usize, f64)> = WORDS.iter().map(|w| (stats.df(w), idf(&stats, w))).collect();
        by_df.sort_by_key(|a| a.0);
        for w in by_df.windows(2) {
            prop_assert!(w[0].1 >= w[1].1);
            if w[0].0 < w[1].0 {
                prop_assert!(w[0].1 > w[1].1);
            }
        }
        prop_assert!(by_df.iter().all(|(_, v)| *v > 0.0));
    }

    #[test]
    fn splitting_and_tokenizing_are_deterministic(text in "[a-zA-Z0-9 .!?,'\n-]{0,80}") {
        let a = sentence_split(&text);
        prop_assert_eq!(&a, &sentence_split(&text));
        for s in &a {
            prop_assert!(!s.is_empty());
            prop_assert_eq!(s.trim(), s.as_str());
            prop_assert!(!s.contains(['.', '!', '?', '\n']));
        }
        let t = tokenize(&text);
        prop_assert_eq!(&t, &tokenize(&text));
        for tok in &t {
            prop_assert!(!tok.is_empty());
            prop_assert!(tok.chars().all(|c| c.is_alphanumeric() && !c.is_uppercase()));
        }
    }

    #[test]
    fn stats_match_brute_force(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(0..10);
        let corpus = random_corpus(&mut r, n);
        let stats = compute_stats(&corpus);
        let (n, df) = naive_df(&corpus);
        prop_assert_eq!(stats.n_comments, corpus.len());
        prop_assert_eq!(stats.n_sentences, n);
        prop_assert_eq!(&stats.document_frequency, &df);
    }

    #[test]
    fn english_filter_is_monotone(seed in any::<u64>(), lo in 0.0f64..1.0, hi in 0.0f64..1.0) {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let mut r = rng(seed);
        let corpus = random_corpus(&mut r, 12);
        let ids = |cs: Vec<Comment>| cs.into_iter().map(|c| c.id).collect::<BTreeSet<_>>();
        let strict = ids(english_heuristic_filter(&corpus, hi));
        let loose = ids(english_heuristic_filter(&corpus, lo));
        prop_assert!(strict.is_subset(&loose));
        prop_assert_eq!(ids(english_heuristic_filter(&corpus, 0.0)).len(), corpus.len());
    }

    #[test]
    fn pruning_is_monotone(seed in any::<u64>(), p1 in 0.05f64..1.0, p2 in 0.05f64..1.0, t1 in -1.0f64..1.0, t2 in -1.0f64..1.0) {
        let mut r = rng(seed);
        let store = random_store(&mut r, 4);
        let corpus = random_corpus(&mut r, 15);
        let stats = compute_stats(&corpus);
        let catalog = FactorCatalog::parse(
            "CATEGORY\ta\tA\nCATEGORY\tb\tB\nFACTOR\tf1\triver dam\ta\nFACTOR\tf2\ttrees\tb\nFACTOR\tf3\tcity of rain\tb\n",
        ).unwrap();
        let kept = |p: f64, t: f64| {
            let params = PruneParams { percentile: p, threshold: t };
            prune(&corpus, &catalog, &store, &stats, &params).unwrap().kept.into_iter().map(|c| c.id).collect::<BTreeSet<_>>()
        };
        let (plo, phi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
        let (tlo, thi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(kept(plo, tlo).is_subset(&kept(phi, tlo)));
        prop_assert!(kept(plo, thi).is_subset(&kept(plo, tlo)));
        prop_assert_eq!(kept(1.0, -1.0).len(), corpus.len());
    }

    #[test]
    fn attention_is_permutation_invariant_and_linear_in_scale(seed in any::<u64>(), a in 0.1f64..10.0) {
        let mut r = rng(seed);
        let n = r.random_range(1..8);
        let mut tokens: Vec<Vec<f64>> = (0..n).map(|_| random_vector(&mut r, 5)).collect();
        let ef = random_vector(&mut r, 5);
        let base = attended_representation(&tokens, &ef).unwrap();

        let scaled: Vec<Vec<f64>> = tokens.iter().map(|v| v.iter().map(|x| a * x).collect()).collect();
        let out = attended_representation(&scaled, &ef).unwrap();
        for (x, y) in base.iter().zip(&out) {
            prop_assert!((a * x - y).abs() < 1e-9 * (1.0 + y.abs()));
        }

        tokens.shuffle(&mut r);
        let out = attended_representation(&tokens, &ef).unwrap();
        for (x, y) in base.iter().zip(&out) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn kappa_ignores_category_order(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (items, cats, raters) = (r.random_range(2..10), r.random_range(2..5), r.random_range(2..6));
        let table: Vec<Vec<usize>> = (0..items)
            .map(|_| {
                let mut row = vec![0; cats];
                for _ in 0..raters {
                    row[r.random_range(0..cats)] += 1;
                }
                row
            })
            .collect();
        let mut perm: Vec<usize> = (0..cats).collect();
        perm.shuffle(&mut r);
        let permuted: Vec<Vec<usize>> = table.iter().map(|row| perm.iter().map(|&j| row[j]).collect()).collect();
        match (fleiss_kappa(&table).unwrap(), fleiss_kappa(&permuted).unwrap()) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
            (a, b) => prop_assert_eq!(a, b),
        }
    }

    #[test]
    fn token_vectors_round_trip_f32_values(seed in any::<u64>()) {
        let mut r = rng(seed);
        let dim = r.random_range(1..6);
        let blocks: Vec<TokenVectors> = (0..r.random_range(0..5))
            .map(|i| {
                let n = r.random_range(0..4);
                let vectors = (0..n)
                    .map(|_| (0..dim).map(|_| f64::from(r.random_range(-1e3f32..1e3))).collect())
                    .collect();
                TokenVectors::new(SentenceKey::new(format!("c{i}"), i), dim, vectors).unwrap()
            })
            .collect();
        let mut buf = Vec::new();
        write_token_vectors(dim, &blocks, &mut buf).unwrap();
        let (d, back) = read_token_vectors(buf.as_slice()).unwrap();
        prop_assert_eq!(d, dim);
        prop_assert_eq!(back, blocks);
    }

    #[test]
    fn model_files_reload_exactly(seed in any::<u64>()) {
        let mut r = rng(seed);
        let dim = r.random_range(1..6);
        let weights: Vec<f64> = (0..2 * dim).map(|_| r.random::<f64>() * 10.0 - 5.0).collect();
        let mut model = AttributionModel::new(weights, r.random::<f64>() - 0.5).unwrap();
        model.detection_threshold = Some(r.random::<f64>());
        let dir = tempfile::tempdir().unwrap();
        model.save(dir.path()).unwrap();
        prop_assert_eq!(AttributionModel::load(dir.path()).unwrap(), model);
    }

    #[test]
    fn resolution_accuracy_grows_with_k(seed in any::<u64>()) {
        let mut r = rng(seed);
        let cats = ["a", "b", "c", "d", "e"];
        let mut preds = Vec::new();
        let mut truth = Vec::new();
        for _ in 0..r.random_range(1..30) {
            let mut ranked: Vec<String> = cats.iter().map(|s| s.to_string()).collect();
            ranked.shuffle(&mut r);
            preds.push(ranked);
            truth.push(BTreeSet::from([cats[r.random_range(0..cats.len())].to_string()]));
        }
        let out = resolution_eval(&preds, &truth, &[1, 2, 3, 5]).unwrap();
        let counts: Vec<usize> = out.n_correct_topk.values().copied().collect();
        prop_assert!(counts.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(out.n_correct_topk[&5], truth.len());
        prop_assert_eq!(out.n_correct_top1, out.n_correct_topk[&1]);
    }
}

#[test]
fn ranked_factor_ties_break_by_id() {
    let catalog =
        FactorCatalog::parse("CATEGORY\tx\tX\nFACTOR\tb\tp\tx\nFACTOR\ta\tq\tx\n").unwrap();
    let mut model = AttributionModel::zeros(2);
    model.detection_threshold = Some(0.5);
    let reps: BTreeMap<String, Vec<f64>> = [
        ("a".to_string(), vec![1.0, 0.0]),
        ("b".to_string(), vec![1.0, 0.0]),
    ]
    .into_iter()
    .collect();
    let p = model.predict(&[vec![1.0, 1.0]], &catalog, &reps).unwrap();
    assert_eq!(p.top_factor(), Some("a"));
    assert!(p.detected);
}
