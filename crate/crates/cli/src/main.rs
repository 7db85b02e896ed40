use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rigidity_cli::commands::{cmd_bifurcate, cmd_check, cmd_constants, cmd_eigen, cmd_solve, cmd_sweep};
use rigidity_cli::{CliError, CliResult, ExperimentConfig};

#[derive(Parser, Debug)]
#[command(name = "rigidity", version, about = "Steady states of -eps*Lap(u) = e^u - 1 - a*u with Neumann boundary conditions")]
struct Args {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's `output`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Explicit constants, μ₁, ε* and rigidity thresholds.
    Constants {
        /// Extra sup-norm bounds M for K(M)/μ₁ (added to `m_values`).
        #[arg(long = "m")]
        m: Vec<f64>,
    },
    /// First nonzero Neumann eigenpair.
    Eigen,
    /// One Newton solve at `eps`.
    Solve {
        /// const:<v|xi|ln_a>, eig:<s> (ξ + sξφ₁) or noise:<index>.
        #[arg(long, default_value = "const:xi")]
        start: String,
    },
    /// Multi-start rigidity sweep over `eps_grid`.
    Sweep,
    /// Primary bifurcation, branch switch and continuation.
    Bifurcate,
    /// Diagnostics suite on a stored field.
    Check {
        #[arg(long)]
        field: PathBuf,
    },
}

fn run(args: Args) -> CliResult<serde_json::Value> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("cannot set up {n} threads: {e}")))?;
    }
    let path = args
        .config
        .ok_or_else(|| CliError::Validation("--config is required".into()))?;
    let mut config = ExperimentConfig::load(&path)?;
    if let Some(out) = args.out {
        config.output = Some(out);
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    match args.command {
        Command::Constants { m } => {
            config.m_values.extend(m);
            cmd_constants(&config)
        }
        Command::Eigen => cmd_eigen(&config),
        Command::Solve { start } => cmd_solve(&config, &start),
        Command::Sweep => cmd_sweep(&config),
        Command::Bifurcate => cmd_bifurcate(&config),
        Command::Check { field } => cmd_check(&config, &field),
    }
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(out) => {
            println!("{}", serde_json::to_string_pretty(&out).expect("serializable"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
