//! Scores the mini-corpus against the bundled factor catalog and keeps the
//! comments that clear both pruning rules.
//!
//! cargo run --example prune_corpus [-- percentile threshold]

use std::path::PathBuf;

use attrib::corpus::{compute_stats, ingest_auto};
use attrib::embedding::load_vectors;
use attrib::factors::FactorCatalog;
use attrib::pruning::{prune, PruneParams};

fn main() -> attrib::Result<()> {
    let mini = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/mini");
    let mut args = std::env::args().skip(1).map(|a| a.parse::<f64>());
    let defaults = PruneParams::default();
    let params = PruneParams {
        percentile: args
            .next()
            .and_then(Result::ok)
            .unwrap_or(defaults.percentile),
        threshold: args
            .next()
            .and_then(Result::ok)
            .unwrap_or(defaults.threshold),
    };

    let comments = ingest_auto(mini.join("comments.jsonl"))?;
    let store = load_vectors(mini.join("vectors.txt"), None)?;
    let stats = compute_stats(&comments);
    let catalog = FactorCatalog::bundled();
    let outcome = prune(&comments, &catalog, &store, &stats, &params)?;

    println!(
        "kept {} of {} comments at percentile {} and threshold {}",
        outcome.kept.len(),
        comments.len(),
        params.percentile,
        params.threshold
    );
    let kept: Vec<&str> = outcome.kept.iter().map(|c| c.id.as_str()).collect();
    for r in &outcome.records {
        let mark = if kept.contains(&r.comment_id.as_str()) {
            "keep"
        } else {
            "drop"
        };
        println!(
            "{mark}  {}  {:.3}  {}",
            r.comment_id,
            r.max_score,
            r.argmax_factor.as_deref().unwrap_or("-")
        );
    }
    Ok(())
}
