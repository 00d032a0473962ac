//! Runs every pipeline stage over the mini-corpus and prints the metrics
//! tables for the model and the baseline.
//!
//! cargo run --example full_pipeline [-- output_dir]

use std::path::PathBuf;

use attrib::pipeline::{cmd_eval, cmd_ingest, cmd_prune, cmd_topics, cmd_train, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mini = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/mini");
    let scratch = tempfile::tempdir()?;
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| scratch.path().to_path_buf());
    let mut config = RunConfig::load(mini.join("config.toml"))?;
    config.output_dir = out.clone();

    for manifest in [
        cmd_ingest(&config)?,
        cmd_prune(&config)?,
        cmd_topics(&config)?,
        cmd_train(&config)?,
    ] {
        println!("{:<7} {}", manifest.stage, manifest.summary);
    }
    let (_, reports) = cmd_eval(&config)?;

    let mut stdout = std::io::stdout();
    println!("\nattention model");
    reports.model.write_table(&mut stdout)?;
    println!("\nidf-weighted cosine baseline");
    reports.baseline.write_table(&mut stdout)?;
    println!("\nartifacts in {}", out.display());
    Ok(())
}
