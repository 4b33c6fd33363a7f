//! `socdfn`: generate synthetic drive cycles, train and cross-validate SOC
//! networks, and evaluate or apply saved models.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

/// Process exit codes, also listed in `--help`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Usage = 2,
    Io = 3,
    Schema = 4,
    Numeric = 5,
}

#[derive(Debug)]
pub struct Failure {
    pub exit: Exit,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            exit: Exit::Usage,
            message: message.into(),
        }
    }
}

impl From<soc_dfn::Error> for Failure {
    fn from(e: soc_dfn::Error) -> Self {
        use soc_dfn::Error as E;
        let exit = match &e {
            E::Io { .. } => Exit::Io,
            E::Config(_) => Exit::Usage,
            E::Numeric(_) => Exit::Numeric,
            E::Shape(_)
            | E::Parse { .. }
            | E::Validation { .. }
            | E::DegenerateFeature(_)
            | E::Contract(_)
            | E::Model(_) => Exit::Schema,
        };
        Failure {
            exit,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("socdfn: {}", f.message.lines().next().unwrap_or_default());
            ExitCode::from(f.exit as u8)
        }
    }
}
