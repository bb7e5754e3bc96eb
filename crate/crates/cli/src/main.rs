use std::path::{Path, PathBuf};
use std::process::ExitCode;

use biasbench_cli::commands::{cmd_ingest, cmd_report, cmd_run, cmd_synth, resolve_out, CliError, Outcome};
use biasbench_cli::config::{parse_config, ExperimentConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "biasbench", version, about = "Cross-dataset bias experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads (default: one per processor).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory (default: the config's `output`, then $BIASBENCH_OUT, then ./biasbench-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic collections as feature tables.
    Synth {
        #[arg(long)]
        config: PathBuf,
    },
    /// Validate and normalize feature tables.
    Ingest {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run an experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Verify a run directory and summarize its report; with --out, re-render its tables.
    Report { dir: PathBuf },
}

fn dispatch(cli: &Cli) -> Result<Outcome, CliError> {
    let with_config = |path: &PathBuf, f: fn(&ExperimentConfig, &Path) -> Result<Outcome, CliError>| {
        let cfg = parse_config(path, cli.seed).map_err(|e| CliError::Config(e.0))?;
        f(&cfg, &resolve_out(cli.out.as_deref(), Some(&cfg)))
    };
    match &cli.command {
        Command::Synth { config } => with_config(config, cmd_synth),
        Command::Ingest { config } => with_config(config, cmd_ingest),
        Command::Run { config } => with_config(config, cmd_run),
        Command::Report { dir } => {
            let (text, outcome) = cmd_report(dir, cli.out.as_deref())?;
            print!("{text}");
            Ok(outcome.unwrap_or(Outcome { out: dir.clone(), partial: false }))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose { log::LevelFilter::Debug } else { log::LevelFilter::Info })
        .parse_env("BIASBENCH_LOG")
        .init();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        pool = pool.num_threads(n.max(1));
    }
    if let Err(e) = pool.build_global() {
        eprintln!("{}", CliError::Internal(e.to_string()).record());
        return ExitCode::from(5);
    }
    match dispatch(&cli) {
        Ok(o) => {
            if !matches!(cli.command, Command::Report { .. }) {
                println!("{}", o.out.display());
            }
            if o.partial {
                log::warn!("some outputs are incomplete; see the manifest in {}", o.out.display());
            }
            ExitCode::from(o.exit_code() as u8)
        }
        Err(e) => {
            log::error!("{}", e.messages().join("; "));
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
