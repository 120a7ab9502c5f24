use anipar_cli::{run, Command, Options};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Spectral Galerkin experiments for anisotropic variable-exponent parabolic equations.
#[derive(Parser)]
#[command(name = "anipar", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Validate the exponent field and print the admissibility report.
    Check(Common),
    /// Solve once and write snapshots, estimate report and monitors.
    Solve(Common),
    /// Solve over the sweep values and judge boundedness of monitored fields.
    Sweep(Common),
    /// Manufactured-solution convergence study over `mms.modes`.
    Mms(Common),
    /// Run the seeded property suites.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Solve even when the admissibility check fails.
    #[arg(long)]
    force: bool,
    /// Seed for randomized suites (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (cmd, c) = match cli.command {
        Cmd::Check(c) => (Command::Check, c),
        Cmd::Solve(c) => (Command::Solve, c),
        Cmd::Sweep(c) => (Command::Sweep, c),
        Cmd::Mms(c) => (Command::Mms, c),
        Cmd::Verify(c) => (Command::Verify, c),
    };
    let opts = Options {
        config: c.config,
        out: c.out,
        force: c.force,
        seed: c.seed,
        threads: c.threads,
    };
    match run(cmd, &opts) {
        Ok(outcome) => {
            for l in &outcome.lines {
                println!("{l}");
            }
            for a in &outcome.artifacts {
                println!("wrote {}", a.display());
            }
            ExitCode::from(outcome.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
