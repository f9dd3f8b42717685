use clap::{Parser, Subcommand};
use nehari_cli::commands::{self, load_config, CliError, Output};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "nehari", version, about = "Dirac-geodesic solver on the circle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Configuration file (for `verify`, the solution file).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues of the twisted Dirac operator as CSV.
    Spectrum(Common),
    /// Solve one homotopy class and write a solution file.
    Solve(Common),
    /// Re-evaluate a solution file and print a verdict table.
    Verify(Common),
    /// Solve along a winding, exponent or truncation axis.
    Sweep(Common),
    /// Oracle and audit verdicts as CSV.
    Oracle(Common),
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("NEHARI_THREADS") else { return Ok(()) };
    let n: usize = raw.trim().parse().map_err(|_| CliError::Invalid(format!("NEHARI_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Io(e.to_string()))
}

fn dispatch(cmd: Command) -> Result<Output, CliError> {
    init_threads()?;
    if let Command::Verify(c) = &cmd {
        return commands::verify(&c.config);
    }
    let (Command::Spectrum(c) | Command::Solve(c) | Command::Sweep(c) | Command::Oracle(c) | Command::Verify(c)) = &cmd;
    let cfg = load_config(&c.config, c.out.clone(), c.seed)?;
    let level = std::env::var("RUST_LOG").unwrap_or_else(|_| cfg.log_level.clone());
    let _ = env_logger::Builder::new().parse_filters(&level).try_init();
    match cmd {
        Command::Spectrum(_) => commands::spectrum(&cfg),
        Command::Solve(_) => commands::solve(&cfg),
        Command::Sweep(_) => commands::sweep(&cfg),
        Command::Oracle(_) => commands::oracle(&cfg),
        Command::Verify(_) => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(out) => {
            print!("{}", out.stdout);
            ExitCode::from(out.code as u8)
        }
        Err(e) => {
            eprintln!("nehari: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
