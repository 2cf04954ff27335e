use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::args::{Cli, Command};
use crate::CliError;

/// Everything needed to replay a run: the exact command line plus every flag
/// with its resolved default. No timestamps or host details, so replaying a
/// run reproduces the manifest as well.
#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub model_format_version: u32,
    pub subcommand: &'static str,
    pub command_line: Vec<String>,
    pub seed: Option<u64>,
    pub jobs: Option<u16>,
    pub args: &'a Command,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

impl<'a> RunManifest<'a> {
    pub fn new(cli: &'a Cli, seed: Option<u64>, inputs: Vec<PathBuf>, outputs: Vec<PathBuf>) -> Self {
        RunManifest {
            tool: "ltcn",
            version: env!("CARGO_PKG_VERSION"),
            model_format_version: ltcn::model::FORMAT_VERSION,
            subcommand: cli.command.name(),
            command_line: std::env::args().skip(1).collect(),
            seed,
            jobs: cli.jobs,
            args: &cli.command,
            inputs,
            outputs,
        }
    }

    /// Writes `<stem>.manifest.json` next to the primary output.
    pub fn write_beside(&self, primary: &Path) -> Result<PathBuf, CliError> {
        let path = sibling(primary, "manifest.json");
        let mut text = serde_json::to_string_pretty(self).map_err(|e| CliError::new("manifest", e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

/// `dir/stem.suffix` for a primary output `dir/stem.ext`.
pub fn sibling(primary: &Path, suffix: &str) -> PathBuf {
    let stem = primary
        .file_stem()
        .map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
    primary.with_file_name(format!("{stem}.{suffix}"))
}
