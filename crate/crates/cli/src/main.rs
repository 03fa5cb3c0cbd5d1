//! `gsm2`: run, validate and sweep lesion-kinetics configurations.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 1 anything else (I/O).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gsm2_core::config::RunConfig;
use gsm2_core::run::{run, sweep, SweepParam};
use gsm2_core::Error;

#[derive(Parser)]
#[command(name = "gsm2", version, about = "Spatial stochastic simulation of DNA lesion kinetics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a configuration and write its artifacts.
    Run(RunArgs),
    /// Parse and check a configuration without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Repeat a spatial run over a grid of dt_diff or K values.
    Sweep {
        #[command(flatten)]
        common: RunArgs,
        #[arg(long, value_enum)]
        param: Param,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the configuration.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, env = "GSM2_THREADS", default_value_t = 0)]
    threads: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Param {
    DtDiff,
    K,
}

fn exit_code(e: &Error) -> ExitCode {
    if e.is_config() {
        ExitCode::from(2)
    } else if e.is_numerical() {
        ExitCode::from(3)
    } else {
        ExitCode::from(1)
    }
}

fn prepare(args: &RunArgs) -> Result<(RunConfig, PathBuf), Error> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.replicates {
        cfg.replicates = n;
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output.dir.as_ref().map(|d| cfg.base_dir.as_deref().unwrap_or(Path::new(".")).join(d)))
        .unwrap_or_else(|| PathBuf::from("gsm2-out"));
    if args.threads > 0 {
        // fails only if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(args.threads).build_global();
    }
    Ok((cfg, out))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { config } => RunConfig::load(config).and_then(|c| c.validate()).map(|_| {
            println!("ok: {}", config.display());
        }),
        Command::Run(args) => prepare(args).and_then(|(cfg, out)| run(&cfg, &out)).map(|r| {
            println!("wrote {} files to {}", r.files.len(), r.dir.display());
        }),
        Command::Sweep { common, param, values } => {
            let p = match param {
                Param::DtDiff => SweepParam::DtDiff,
                Param::K => SweepParam::Scale,
            };
            prepare(common).and_then(|(cfg, out)| sweep(&cfg, p, values, &out)).map(|r| {
                println!("wrote {} files to {}", r.files.len(), r.dir.display());
            })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
