//! `disag`: disagreement indices, dispersed-information surfaces and
//! sign-restricted factor BVAR runs driven by one TOML config.

mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Ctx;
use crate::error::CliResult;

#[derive(Parser)]
#[command(name = "disag", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Disagreement index from survey question CSVs.
    Index(Common),
    /// Mean synthetic tail disagreement over a variance grid.
    Simulate(Common),
    /// Posterior draws of the sign-restricted factor BVAR.
    Estimate(Common),
    /// Impulse-response bands from stored draws.
    Irf(Common),
    /// Variance decompositions from stored draws.
    Fevd(Common),
    /// index, estimate, irf and fevd in one go.
    Pipeline(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn run(cli: Cli) -> CliResult<()> {
    let (Command::Index(c)
    | Command::Simulate(c)
    | Command::Estimate(c)
    | Command::Irf(c)
    | Command::Fevd(c)
    | Command::Pipeline(c)) = &cli.command;
    let env_dir = std::env::var_os(config::DATA_DIR_ENV).map(PathBuf::from);
    let loaded = config::load(&c.config, env_dir)?;
    let seed = c.seed.or(loaded.config.seed).unwrap_or(config::DEFAULT_SEED);
    let ctx = Ctx { loaded, seed, out: c.out.clone() };
    match cli.command {
        Command::Index(_) => commands::index(&ctx).map(|_| ()),
        Command::Simulate(_) => commands::simulate(&ctx),
        Command::Estimate(_) => commands::estimate(&ctx, None).map(|_| ()),
        Command::Irf(_) => commands::irf(&ctx),
        Command::Fevd(_) => commands::fevd_cmd(&ctx),
        Command::Pipeline(_) => commands::pipeline(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}
