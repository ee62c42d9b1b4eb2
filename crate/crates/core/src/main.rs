use aflab::commands::{
    cmd_bounds, cmd_epstein, cmd_foliate, cmd_gauss_solve, cmd_surface_check, cmd_wp_verify,
};
use aflab::config::RunConfig;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Minimal surfaces over a hyperbolic surface, their parallel foliations,
/// distance bounds and boundary data, driven by an INI run configuration.
#[derive(Parser)]
#[command(name = "aflab", version)]
struct Cli {
    /// Run configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed override for randomized checks.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify the group and mesh invariants and emit their residuals.
    SurfaceCheck,
    /// Solve for the minimal surface at the configured parameter.
    GaussSolve,
    /// Sweep the parallel foliation over the configured r grid.
    Foliate,
    /// Tabulate distance bounds over leaf pairs, including infinite ends.
    Bounds,
    /// Compare the area second variation against the pairing on all basis pairs.
    WpVerify,
    /// Sample the boundary-density embedding and its normal flow.
    Epstein,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let loaded = match &cli.config {
        Some(path) => RunConfig::load(path),
        None => Ok(RunConfig::default()),
    };
    let cfg = match loaded {
        Ok(cfg) => cfg.with_overrides(cli.out, cli.seed),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let result = match cli.command {
        Command::SurfaceCheck => cmd_surface_check(&cfg),
        Command::GaussSolve => cmd_gauss_solve(&cfg),
        Command::Foliate => cmd_foliate(&cfg),
        Command::Bounds => cmd_bounds(&cfg),
        Command::WpVerify => cmd_wp_verify(&cfg),
        Command::Epstein => cmd_epstein(&cfg),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
