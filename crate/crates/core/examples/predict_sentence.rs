//! Runs ingest, prune and train on the mini-corpus in a scratch directory,
//! then ranks broad categories for a sentence.
//!
//! cargo run --example predict_sentence [-- "some comment text"]

use std::path::PathBuf;

use attrib::pipeline::{cmd_ingest, cmd_predict, cmd_prune, cmd_train, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "we cut trees to build malls".to_owned());
    let mini = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/mini");
    let scratch = tempfile::tempdir()?;
    let mut config = RunConfig::load(mini.join("config.toml"))?;
    config.output_dir = scratch.path().to_path_buf();

    cmd_ingest(&config)?;
    cmd_prune(&config)?;
    cmd_train(&config)?;
    for p in cmd_predict(&config, &text)? {
        println!(
            "{:?}  detected={}  max={:.4}",
            p.text, p.detected, p.max_score
        );
        for (category, score) in p.categories.iter().take(3) {
            println!("  {score:.4}  {category}");
        }
    }
    Ok(())
}
