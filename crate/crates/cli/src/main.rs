//! `gag`: check, run, simulate and serve guarded attribute grammars.

mod check;
mod fixtures;
mod input;
mod output;
mod run;
mod simulate;

use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use output::{Format, Out};

/// Exit statuses; stable across releases.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    /// Usage, I/O or internal error.
    Failure = 1,
    /// The grammar does not parse or does not validate.
    InvalidGrammar = 2,
    NotStronglyAcyclic = 3,
    /// No step is enabled but some node is still open.
    TerminalOpen = 4,
    /// A step, case, partition or trace was rejected.
    Rejected = 5,
    /// The run stopped with steps still enabled, or disagreed with the central run.
    Unsettled = 6,
}

#[derive(Debug, Parser)]
#[command(name = "gag", version, about = "Guarded attribute grammars: check, run, simulate, serve")]
struct Cli {
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a grammar and decide strong acyclicity.
    Check {
        grammar: PathBuf,
        /// Stop after validation.
        #[arg(long)]
        no_static: bool,
    },
    /// Apply productions centrally, from a script or interactively.
    Run(run::RunArgs),
    /// Seeded distributed runs, merged and compared.
    Simulate(simulate::SimulateArgs),
    /// Start the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
    },
    /// Write the built-in grammars, scripts and reference configurations to a directory.
    Fixtures { dir: PathBuf },
}

/// Grammar file plus the case to start from.
#[derive(Debug, Args)]
pub struct CaseArgs {
    pub grammar: PathBuf,
    /// Service to start; defaults to the first one declared.
    #[arg(long)]
    pub case: Option<String>,
    /// Values for the service's inherited variables, as `x = t, y = u`.
    #[arg(long)]
    pub closing: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Status::Failure as u8 } else { 0 });
        }
    };
    let out = Out::new(cli.format);
    let status = match cli.command {
        Command::Check { grammar, no_static } => check::check(&out, &grammar, no_static),
        Command::Run(args) => run::run(&out, &args),
        Command::Simulate(args) => simulate::simulate(&out, &args),
        Command::Serve { port, host } => serve(SocketAddr::new(host, port)),
        Command::Fixtures { dir } => fixtures::write_all(&out, &dir),
    };
    match status {
        Ok(s) => ExitCode::from(s as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(Status::Failure as u8)
        }
    }
}

fn serve(addr: SocketAddr) -> anyhow::Result<Status> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .init();
    tokio::runtime::Runtime::new()?.block_on(gag_service::serve(addr))?;
    Ok(Status::Ok)
}
