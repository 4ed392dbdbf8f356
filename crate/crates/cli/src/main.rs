//! `ratchet`: one binary over the pricing library. Every subcommand reads a
//! single JSON config (file or stdin) so a run is reproducible from one
//! artifact; flags only pick the subcommand, the config and the output path.

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod report;
mod verify;

/// Failures that map onto the exit-code contract. Verification failures are
/// not errors: `verify` reports them and returns exit code 3 itself.
#[derive(Debug)]
pub enum Failure {
    /// Bad config or parameter validation; exits 2.
    Config(String),
    /// Filesystem or stream trouble; exits 4.
    Io(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(msg) | Failure::Io(msg) => f.write_str(msg),
        }
    }
}

impl From<ratchet_core::Error> for Failure {
    fn from(e: ratchet_core::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "ratchet",
    version,
    about = "Decrease-only pricing: solvers, checks and data tools"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// JSON config file, or - for standard input
    #[arg(long, global = true, default_value = "-")]
    config: String,

    /// Output file, or - for standard output
    #[arg(long, global = true, default_value = "-")]
    out: String,

    /// Worker threads (default: machine parallelism)
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Closed-form policy report as JSON
    Solve,
    /// Run the invariant checks; one line per check, exit 3 on any failure
    Verify,
    /// Grid sweeps as CSV
    Sweep,
    /// Monte Carlo policy evaluation as CSV
    Simulate,
    /// Generate a synthetic price archive as CSV
    Synth,
    /// Hourly statistics from a price archive as CSV
    Empirics,
}

fn run(cli: &Cli) -> Result<i32, Failure> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(Failure::Config("workers must be at least 1".into()));
        }
        // Ignore the error from a pool that is already up; only the first
        // initialization can win and that is the one this flag configures.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let (cfg, hash) = config::load(&cli.config)?;
    match cli.command {
        Cmd::Solve => commands::solve(&cfg, &hash, &cli.out),
        Cmd::Verify => verify::run(&cfg, &hash, &cli.out),
        Cmd::Sweep => commands::sweep(&cfg, &hash, &cli.out),
        Cmd::Simulate => commands::simulate(&cfg, &hash, &cli.out),
        Cmd::Synth => commands::synth(&cfg, &hash, &cli.out),
        Cmd::Empirics => commands::empirics(&cfg, &hash, &cli.out),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => std::process::exit(code),
        Err(failure) => {
            eprintln!("error: {failure}");
            std::process::exit(failure.code());
        }
    }
}
