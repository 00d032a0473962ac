//! Fits LDA to the mini-corpus and prints the top tokens of each topic.
//!
//! cargo run --example topic_model [-- n_topics]

use std::path::PathBuf;

use attrib::corpus::ingest_auto;
use attrib::embedding::bundled_stopwords;
use attrib::topics::{fit_lda, LdaConfig};

fn main() -> attrib::Result<()> {
    let mini = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/mini");
    let n_topics = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(5);
    let comments = ingest_auto(mini.join("comments.jsonl"))?;
    let config = LdaConfig {
        n_topics,
        n_iterations: 500,
        burn_in: 100,
        min_token_count: 2,
        seed: 7,
        ..LdaConfig::default()
    };
    let model = fit_lda(&comments, &bundled_stopwords(), &config)?;

    println!(
        "{} documents, {} vocabulary tokens",
        model.doc_ids.len(),
        model.vocabulary.len()
    );
    for k in 0..model.n_topics() {
        println!(
            "topic {k} ({:.1}%): {}",
            100.0 * model.topic_proportions()[k],
            model.top_tokens(k, 8)?.join(" ")
        );
    }
    Ok(())
}
