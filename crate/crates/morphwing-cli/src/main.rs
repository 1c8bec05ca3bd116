//! `morphwing`: generate, export, analyze, sense, fit and estimate from
//! one TOML config. Exit codes: 0 ok, 2 invalid input, 3 generation
//! failure, 4 numeric failure, 5 I/O failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use morphwing::config::PipelineConfig;
use morphwing::pipeline::{
    cmd_analyze, cmd_estimate, cmd_export, cmd_fit, cmd_generate, cmd_sense, PipelineError,
    DATASET_FILE, MODEL_FILE,
};

#[derive(Parser)]
#[command(name = "morphwing", version, about = "Morphing-wing lattice design toolkit")]
struct Cli {
    /// TOML config; built-in reference design when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory all outputs are written to.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Override the config's random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the lattice design and write the lattice file.
    Generate,
    /// Mesh the design and write binary STL.
    Export {
        /// One STL per build segment instead of the whole wing.
        #[arg(long)]
        per_segment: bool,
    },
    /// Solve the three morph load cases and write spanwise response CSVs.
    Analyze,
    /// Simulate the fiber sensors over the morph sweep grid.
    Sense,
    /// Fit the morph-state estimator from a sweep dataset.
    Fit {
        /// Sweep dataset CSV; defaults to <out-dir>/sweep.csv.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Estimate morph states from sensor readings.
    Estimate {
        /// CSV of readings with header s1,...,s6.
        #[arg(long)]
        readings: PathBuf,
        /// Fitted model file; defaults to <out-dir>/estimator.txt.
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

fn run(cli: &Cli) -> Result<String, PipelineError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = &cli.out_dir;
    Ok(match &cli.command {
        Command::Generate => cmd_generate(&cfg, out)?.to_string(),
        Command::Export { per_segment } => cmd_export(&cfg, out, *per_segment)?.to_string(),
        Command::Analyze => cmd_analyze(&cfg, out)?.to_string(),
        Command::Sense => cmd_sense(&cfg, out)?.to_string(),
        Command::Fit { dataset } => {
            let dataset = dataset.clone().unwrap_or_else(|| out.join(DATASET_FILE));
            cmd_fit(&cfg, out, &dataset)?.to_string()
        }
        Command::Estimate { readings, model } => {
            let model = model.clone().unwrap_or_else(|| out.join(MODEL_FILE));
            cmd_estimate(out, &model, readings)?.to_string()
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
