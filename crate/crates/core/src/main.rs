use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use attrib::pipeline::{
    cmd_eval, cmd_ingest, cmd_predict, cmd_prune, cmd_topics, cmd_train, RunConfig,
};

#[derive(Parser)]
#[command(name = "attrib", version, about = "Attribution-tie detection pipeline")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "attrib.toml")]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read and normalize the comment dump.
    Ingest,
    /// Keep comments similar to some attribution factor.
    Prune,
    /// Fit LDA over the pruned corpus.
    Topics,
    /// Train the attribution model.
    Train,
    /// Evaluate the model and baseline on the holdout split.
    Eval,
    /// Score ad-hoc text.
    Predict { text: String },
}

fn run(cli: Cli) -> attrib::Result<()> {
    let mut config = RunConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.set_seed(seed);
    }
    let done = |stage: &str| {
        println!(
            "{stage}: wrote {}",
            config.output_dir().join(stage).display()
        )
    };
    match cli.command {
        Command::Ingest => cmd_ingest(&config).map(|_| done("ingest"))?,
        Command::Prune => cmd_prune(&config).map(|_| done("prune"))?,
        Command::Topics => cmd_topics(&config).map(|_| done("topics"))?,
        Command::Train => cmd_train(&config).map(|_| done("train"))?,
        Command::Eval => {
            let (_, out) = cmd_eval(&config)?;
            out.model
                .write_table(std::io::stdout())
                .map_err(|e| attrib::Error::InvalidInput(e.to_string()))?;
            done("eval");
        }
        Command::Predict { text } => {
            for p in cmd_predict(&config, &text)? {
                println!("{}", p.text);
                println!("  detected: {} (max score {:.4})", p.detected, p.max_score);
                for (category, score) in p.categories.iter().take(3) {
                    println!("  {category}\t{score:.4}");
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
