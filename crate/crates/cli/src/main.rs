use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lardo_cli::commands::{cmd_calibrate, cmd_describe, cmd_eval, cmd_finetune, cmd_pretrain, cmd_split};
use lardo_cli::{CliError, RunConfig};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "lardo", version, about = "LLM-described molecular graph-text alignment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Answer prompts with the offline mock instead of the endpoint.
    #[arg(long, global = true)]
    mock_llm: bool,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate MD-Text for every molecule of the dataset.
    Describe,
    /// Contrastive graph-text pretraining.
    Pretrain,
    /// Scaffold split, fine-tune, evaluate on the test split.
    Finetune,
    /// Re-evaluate the fine-tuned checkpoint.
    Eval,
    /// Descriptor report for one molecule.
    Calibrate {
        #[arg(long)]
        smiles: String,
    },
    /// Write the scaffold split indices.
    Split,
}

fn config(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.mock_llm {
        cfg.llm.use_mock = true;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string(value).map_err(|e| CliError::Io(std::io::Error::other(e)))
}

fn run(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Calibrate { smiles } => Ok(cmd_calibrate(smiles)?.1.join("\n")),
        Command::Describe => json(&cmd_describe(&config(cli)?)?),
        Command::Pretrain => json(&cmd_pretrain(&config(cli)?)?),
        Command::Finetune => json(&cmd_finetune(&config(cli)?)?),
        Command::Eval => json(&cmd_eval(&config(cli)?)?),
        Command::Split => json(&cmd_split(&config(cli)?)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            println!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(2)
        }
    }
}
