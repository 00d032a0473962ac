//! Reads the bundled mini-corpus and prints sentence counts and the most
//! widespread tokens.
//!
//! cargo run --example ingest_corpus [-- path/to/comments.jsonl]

use std::path::PathBuf;

use attrib::corpus::{
    compute_stats, english_heuristic_filter, ingest_auto, DEFAULT_ENGLISH_MIN_RATIO,
};

fn main() -> attrib::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/mini/comments.jsonl")
        });
    let comments = ingest_auto(&path)?;
    let english = english_heuristic_filter(&comments, DEFAULT_ENGLISH_MIN_RATIO);
    let stats = compute_stats(&comments);
    println!(
        "{} comments ({} pass the english filter)",
        comments.len(),
        english.len()
    );
    println!("{} sentences", stats.n_sentences);

    let mut df: Vec<(&String, &usize)> = stats.document_frequency.iter().collect();
    df.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
    for (token, n) in df.iter().take(10) {
        println!("{n:>4}  {token}");
    }

    let c = &comments[1];
    println!("\n{}:", c.id);
    for s in &c.sentences {
        println!("  [{}] {:?}", s.index, s.tokens);
    }
    Ok(())
}
