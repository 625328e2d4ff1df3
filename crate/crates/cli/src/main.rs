//! `navmetrics`: score, generate, compare and render navigation episodes.
//!
//! Exit codes: 0 on success, 1 for bad input (flags, files, or domain
//! validation), 2 for internal errors that indicate a bug.

mod commands;
mod common;
mod errors;
mod manifest;
mod svg;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use errors::CliResult;

#[derive(Parser)]
#[command(name = "navmetrics", version, about = "Evaluation toolkit for navigation episodes on spatial graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score episodes against a world and write a metric report
    Score(commands::score::ScoreArgs),
    /// Generate worlds, episodes and ranking sets
    #[command(subcommand)]
    Gen(commands::gen::GenCommand),
    /// Compare how closely metrics track gold rankings
    Study(commands::study::StudyArgs),
    /// Roll out toy policies and summarise the metrics they earn
    Policy(commands::policy::PolicyArgs),
    /// Render episodes as SVG drawings with an HTML index
    Render(commands::render::RenderArgs),
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Score(args) => commands::score::run(args),
        Command::Gen(cmd) => commands::gen::run(cmd),
        Command::Study(args) => commands::study::run(args),
        Command::Policy(args) => commands::policy::run(args),
        Command::Render(args) => commands::render::run(args),
    }
}

fn main() {
    // Die quietly on a closed pipe (`navmetrics ... | head`) instead of
    // panicking on EPIPE; Rust ships with SIGPIPE ignored.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{err}");
                return;
            }
            eprint!("{err}");
            std::process::exit(1);
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("error: {:#}", err.inner());
        std::process::exit(err.exit_code());
    }
}
