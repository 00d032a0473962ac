//! Trains the attention attribution model on the labeled mini-corpus with
//! static vectors and prints the per-epoch history.
//!
//! cargo run --example train_attribution

use std::path::PathBuf;

use attrib::attribution::{build_pairs, train, TrainingConfig, VectorBank};
use attrib::corpus::{ingest_auto, load_annotations};
use attrib::embedding::load_vectors;
use attrib::factors::FactorCatalog;

fn main() -> attrib::Result<()> {
    let mini = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/mini");
    let catalog = FactorCatalog::bundled();
    let comments = ingest_auto(mini.join("comments.jsonl"))?;
    let labeled = load_annotations(&comments, mini.join("labels.tsv"), &catalog)?;
    let store = load_vectors(mini.join("vectors.txt"), None)?;
    let bank = VectorBank::from_static(&labeled, &catalog, &store)?;
    let pairs = build_pairs(&labeled, &catalog);

    let config = TrainingConfig {
        learning_rate: 0.02,
        epochs: 20,
        pos_weight: 5.0,
        seed: 7,
        ..TrainingConfig::default()
    };
    let outcome = train(&pairs, &bank, &config)?;
    println!(
        "{} pairs; split {} train / {} selection / {} holdout sentences",
        pairs.len(),
        outcome.split.train.len(),
        outcome.split.selection.len(),
        outcome.split.holdout.len()
    );
    println!("epoch  train_loss  selection_loss  threshold  selection_f1");
    for h in &outcome.history {
        println!(
            "{:>5}  {:>10.4}  {:>14.4}  {:>9.4}  {:>12.4}",
            h.epoch, h.train_loss, h.selection_loss, h.selection_threshold, h.selection_f1
        );
    }
    let model = &outcome.model;
    println!(
        "selected epoch {:?}, threshold {:.4}",
        model.provenance.selected_epoch,
        model.detection_threshold.unwrap_or(f64::NAN)
    );
    Ok(())
}
