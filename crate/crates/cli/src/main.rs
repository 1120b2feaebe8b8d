use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use motion_lingua::emitter::Stage;
use motion_lingua::Anchor;

mod commands;
mod error;
mod manifest;

use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "motion-lingua",
    version,
    about = "Motion labels and training records for robot trajectories"
)]
struct Cli {
    /// Worker threads (defaults to the number of CPUs)
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Fail on the first invalid episode instead of skipping it
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    /// Flat TOML file with pipeline settings
    #[arg(long)]
    config: Option<PathBuf>,
    /// Window anchoring, overrides the config file
    #[arg(long)]
    anchor: Option<Anchor>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute per-dimension normalization statistics
    Stats {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write one motion label per step
    Annotate {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        stats: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write chat-format training records
    Emit {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        stats: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// TOML file overriding the chat template
        #[arg(long)]
        template: Option<PathBuf>,
        #[arg(long)]
        stage: Stage,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare adaptive annotation with the fixed-threshold baseline on synthetic data
    Benchmark {
        /// TOML synthetic spec (defaults to 200 episodes of 64 steps)
        #[arg(long)]
        spec: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long)]
        seed: Option<u64>,
        /// Jitter amplitude as a multiple of the translational base threshold
        #[arg(long)]
        jitter: Option<f64>,
        /// Window of the fixed baseline in steps
        #[arg(long, default_value_t = motion_lingua::eval::DEFAULT_FIXED_WINDOW)]
        fixed_window: usize,
        /// Also write the jitter sweep as CSV
        #[arg(long)]
        sweep_csv: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the detector against the brute-force reference on random walks
    OracleCheck {
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long, default_value_t = 1000)]
        episodes: usize,
        #[arg(long, default_value_t = 32)]
        max_len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Invariant(e.to_string()))?;
    }
    let strict = cli.strict;
    match cli.command {
        Command::Stats { inputs, out } => commands::stats(&inputs, &out, strict),
        Command::Annotate {
            inputs,
            stats,
            pipeline,
            out,
        } => commands::annotate(&inputs, &stats, &pipeline, &out, strict),
        Command::Emit {
            inputs,
            stats,
            pipeline,
            template,
            stage,
            out,
        } => commands::emit(&inputs, &stats, &pipeline, template.as_deref(), stage, &out, strict),
        Command::Benchmark {
            spec,
            pipeline,
            seed,
            jitter,
            fixed_window,
            sweep_csv,
            out,
        } => commands::benchmark(
            spec.as_deref(),
            &pipeline,
            seed,
            jitter,
            fixed_window,
            sweep_csv.as_deref(),
            &out,
        ),
        Command::OracleCheck {
            pipeline,
            episodes,
            max_len,
            seed,
        } => commands::oracle_check(&pipeline, episodes, max_len, seed),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MOTION_LINGUA_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
