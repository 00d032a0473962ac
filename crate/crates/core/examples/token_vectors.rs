//! Writes per-token vectors for the mini-corpus in the token-vector file
//! format, reads them back and builds a vector bank from them.
//!
//! cargo run --example token_vectors

use std::path::PathBuf;

use attrib::attribution::{read_token_vectors, write_token_vectors, TokenVectors, VectorBank};
use attrib::corpus::{ingest_auto, SentenceKey};
use attrib::embedding::load_vectors;
use attrib::factors::FactorCatalog;

fn main() -> attrib::Result<()> {
    let mini = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/mini");
    let comments = ingest_auto(mini.join("comments.jsonl"))?;
    let store = load_vectors(mini.join("vectors.txt"), None)?;
    let catalog = FactorCatalog::bundled();

    let sentences: Vec<TokenVectors> = comments
        .iter()
        .flat_map(|c| c.sentences.iter().map(move |s| (c, s)))
        .map(|(c, s)| TokenVectors::from_store(c.sentence_key(s.index), &s.tokens, &store))
        .collect();
    let factors: Vec<TokenVectors> = catalog
        .factors()
        .iter()
        .map(|f| TokenVectors::from_store(SentenceKey::new(f.id.clone(), 0), &f.phrase, &store))
        .collect();

    let mut buf = Vec::new();
    write_token_vectors(store.dim(), &sentences, &mut buf)?;
    let text = String::from_utf8_lossy(&buf);
    for line in text.lines().take(3) {
        println!("{}", &line[..line.len().min(72)]);
    }

    // components are stored in single precision; a second write is byte-identical
    let (dim, parsed) = read_token_vectors(buf.as_slice())?;
    let mut again = Vec::new();
    write_token_vectors(dim, &parsed, &mut again)?;
    assert_eq!(again, buf);
    let max_diff = sentences
        .iter()
        .zip(&parsed)
        .flat_map(|(a, b)| a.vectors.iter().flatten().zip(b.vectors.iter().flatten()))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    println!(
        "... {} blocks of dimension {dim}, {} bytes, max f32 rounding {max_diff:.1e}",
        parsed.len(),
        buf.len()
    );

    let bank = VectorBank::from_token_vectors(parsed, factors, &catalog)?;
    bank.check_alignment(&comments)?;
    println!(
        "bank aligned with {} comments and {} factors",
        comments.len(),
        bank.factors().len()
    );
    Ok(())
}
