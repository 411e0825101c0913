use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mmsa_cli::{cmd_eval, cmd_gen_data, cmd_sweep, cmd_train, parse_mode, parse_scenario, Config};

#[derive(Parser)]
#[command(
    name = "mmsa",
    about = "Multimodal sequence association: data generation, training, evaluation, sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic paired-sequence dataset.
    GenData {
        /// JSON config; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides every seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train on a generated dataset.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Dataset directory produced by gen-data.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        /// baseline_ctc | original | pooled
        #[arg(long)]
        mode: Option<String>,
        /// Continue from a checkpoint directory.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on a dataset's test split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also dump DTW cost matrices and paths for a few samples.
        #[arg(long)]
        dump_dtw: bool,
    },
    /// Missing-element curves for one-sided scenarios.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// visual_full | audio_full
        #[arg(long)]
        scenario: String,
        /// Comma-separated missing-element counts, e.g. 1,2,3
        #[arg(long, value_delimiter = ',')]
        missing: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load_config(path: &Option<PathBuf>, seed: Option<u64>) -> Result<Config, mmsa_cli::CliError> {
    let mut config = match path {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = seed {
        config.override_seed(s);
    }
    Ok(config)
}

fn run() -> Result<(), mmsa_cli::CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::GenData { config, out, seed } => {
            let config = load_config(&config, seed)?;
            cmd_gen_data(&config, &out)
        }
        Command::Train {
            config,
            data,
            out,
            seed,
            epochs,
            mode,
            resume,
        } => {
            let mut config = load_config(&config, seed)?;
            if let Some(e) = epochs {
                config.experiment.epochs = e;
            }
            if let Some(m) = &mode {
                config.experiment.mode = parse_mode(m)?;
            }
            cmd_train(&config, &data, &out, resume.as_deref())
        }
        Command::Eval {
            checkpoint,
            data,
            out,
            dump_dtw,
        } => cmd_eval(&checkpoint, &data, &out, dump_dtw),
        Command::Sweep {
            config,
            scenario,
            missing,
            out,
            seed,
        } => {
            let config = load_config(&config, seed)?;
            let scenario = parse_scenario(&scenario)?;
            cmd_sweep(&config, scenario, &missing, &out)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
