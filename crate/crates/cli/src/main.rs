mod args;
mod commands;
mod manifest;

use std::fmt;
use std::path::Path;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::Cli;

/// A runtime failure, reported on stderr as one JSON line.
#[derive(Debug)]
pub struct CliError {
    kind: &'static str,
    message: String,
}

impl CliError {
    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError {
            kind: "io",
            message: format!("{}: {err}", path.display()),
        }
    }

    pub fn new(kind: &'static str, message: impl Into<String>) -> Self {
        CliError {
            kind,
            message: message.into(),
        }
    }
}

impl From<ltcn::Error> for CliError {
    fn from(e: ltcn::Error) -> Self {
        CliError {
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let line = serde_json::json!({ "error": self.kind, "message": self.message });
        write!(f, "{line}")
    }
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("LTCN_LOG", "warn");
    env_logger::Builder::from_env(env).format_timestamp(None).init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
            let _ = e.print();
            return ExitCode::from(2);
        }
        Err(e) => {
            // clap spreads one error over several lines before the usage
            // block; fold them into one.
            let rendered = e.render().to_string();
            let message = rendered
                .lines()
                .take_while(|l| !l.starts_with("Usage:") && !l.starts_with("For more information"))
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .collect::<Vec<_>>()
                .join(" ");
            let message = message.strip_prefix("error: ").unwrap_or(&message);
            eprintln!("{}", CliError::new("usage", message));
            return ExitCode::from(2);
        }
    };
    init_logging();

    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.into()).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }

    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}
