use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use twsense_cli::commands;
use twsense_cli::config::RunConfig;
use twsense_cli::CliError;

/// Through-wall RF sensing simulator: link budgets, transmissive-RIS beam
/// scanning, synthetic CSI datasets and SVM activity recognition.
#[derive(Parser)]
#[command(name = "twsense", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration file (key = value lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for reports and artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Override the master seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Itemized receiver-power budget through the configured wall.
    Linkbudget,
    /// Specific attenuation table for the known materials.
    Attenuation,
    /// Beam-scan the steering codebook and export the best profile.
    RisScan,
    /// Generate the labeled synthetic CSI dataset.
    Synth,
    /// Extract features and train the activity classifier.
    Train,
    /// Evaluate the saved model on the held-out split.
    Eval,
    /// Full chain: budget, scan, datasets at both noise floors, CV on each.
    Pipeline,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("missing --config <path>".to_string()))?;
    let config = RunConfig::load(config_path, cli.seed)?;
    match cli.command {
        Command::Linkbudget => commands::cmd_linkbudget(&config, &cli.out)?,
        Command::Attenuation => commands::cmd_attenuation(&config, &cli.out)?,
        Command::RisScan => commands::cmd_ris_scan(&config, &cli.out)?,
        Command::Synth => commands::cmd_synth(&config, &cli.out)?,
        Command::Train => commands::cmd_train(&config, &cli.out)?,
        Command::Eval => commands::cmd_eval(&config, &cli.out)?,
        Command::Pipeline => commands::cmd_pipeline(&config, &cli.out)?,
    };
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(error.exit_code() as u8)
        }
    }
}
