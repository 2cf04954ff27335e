use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ltcn::{DecisionHead, TransferKind};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "ltcn", version, about = "Recurrence-aware LTCN classifier")]
pub struct Cli {
    /// Worker threads for folds and grid cells [default: available cores].
    /// Results do not depend on this value.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: Option<u16>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Fit a model on a labelled CSV and save it.
    Train(TrainArgs),
    /// Classify the rows of a CSV with a saved model.
    Predict(PredictArgs),
    /// Cross-validate one configuration, or nested-CV over a φ grid.
    Evaluate(EvaluateArgs),
    /// κ over the φ × iterations surface.
    Sweep(SweepArgs),
    /// Recurrence-aware vs last-state decision heads on identical folds.
    Compare(CompareArgs),
    /// Rank features of a saved model by relevance.
    Explain(ExplainArgs),
    /// Trace the recurrence of a saved model on a CSV.
    Dynamics(DynamicsArgs),
    /// Write one of the built-in synthetic tables.
    Generate(GenerateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Train(_) => "train",
            Command::Predict(_) => "predict",
            Command::Evaluate(_) => "evaluate",
            Command::Sweep(_) => "sweep",
            Command::Compare(_) => "compare",
            Command::Explain(_) => "explain",
            Command::Dynamics(_) => "dynamics",
            Command::Generate(_) => "generate",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TransferArg {
    Sigmoid,
    Tanh,
}

impl From<TransferArg> for TransferKind {
    fn from(t: TransferArg) -> Self {
        match t {
            TransferArg::Sigmoid => TransferKind::Sigmoid,
            TransferArg::Tanh => TransferKind::Tanh,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadArg {
    Recurrence,
    Laststate,
}

impl From<HeadArg> for DecisionHead {
    fn from(h: HeadArg) -> Self {
        match h {
            HeadArg::Recurrence => DecisionHead::RecurrenceAware,
            HeadArg::Laststate => DecisionHead::LastStateOnly,
        }
    }
}

fn unit_interval(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be a positive finite number"))
    }
}

fn delimiter(s: &str) -> Result<u8, String> {
    match s.as_bytes() {
        [b] if b.is_ascii() => Ok(*b),
        _ if s == "\\t" || s == "tab" => Ok(b'\t'),
        _ => Err(format!("{s:?} is not a single ASCII character")),
    }
}

fn delimiter_as_text<S: serde::Serializer>(d: &u8, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&char::from(*d).to_string())
}

#[derive(Debug, Args, Serialize)]
pub struct CsvArgs {
    /// Field delimiter.
    #[arg(long, default_value = ",", value_parser = delimiter)]
    #[serde(serialize_with = "delimiter_as_text")]
    pub delimiter: u8,
    /// The first line is data, not a header.
    #[arg(long)]
    pub no_header: bool,
}

impl CsvArgs {
    pub fn options(&self) -> ltcn::CsvOptions {
        ltcn::CsvOptions {
            delimiter: self.delimiter,
            has_header: !self.no_header,
        }
    }
}

/// Recurrence settings shared by every fitting command.
#[derive(Debug, Args, Serialize)]
pub struct ReasoningArgs {
    /// Nonlinearity coefficient φ in [0, 1].
    #[arg(long, default_value_t = 0.8, value_parser = unit_interval, allow_hyphen_values = true)]
    pub phi: f64,
    /// Maximum number of recurrent iterations T.
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..))]
    pub iters: u32,
    /// Convergence tolerance τ on the max-abs state change.
    #[arg(long, default_value_t = 1e-5, value_parser = positive, allow_hyphen_values = true)]
    pub tol: f64,
    /// Previous states searched for a limit cycle.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    pub cycle_window: u32,
}

#[derive(Debug, Args, Serialize)]
pub struct CvArgs {
    /// Number of cross-validation folds.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(2..))]
    pub folds: u32,
    /// Seed for fold assignment; the only source of randomness.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Labelled CSV; the last column is the class.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "model.json")]
    pub out: PathBuf,
    #[command(flatten)]
    pub reasoning: ReasoningArgs,
    #[arg(long, value_enum, default_value_t = TransferArg::Sigmoid)]
    pub transfer: TransferArg,
    #[arg(long, value_enum, default_value_t = HeadArg::Recurrence)]
    pub head: HeadArg,
    #[command(flatten)]
    pub csv: CsvArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Feature CSV with the model's columns, optionally followed by a label.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "predictions.csv")]
    pub out: PathBuf,
    #[command(flatten)]
    pub csv: CsvArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "evaluation.csv")]
    pub out: PathBuf,
    #[command(flatten)]
    pub reasoning: ReasoningArgs,
    /// Grid `start:end:step`; switches to nested CV over φ (and over both
    /// transfer functions unless --transfer is given).
    #[arg(long)]
    pub phi_grid: Option<String>,
    #[arg(long, value_enum)]
    pub transfer: Option<TransferArg>,
    #[arg(long, value_enum, default_value_t = HeadArg::Recurrence)]
    pub head: HeadArg,
    #[command(flatten)]
    pub cv: CvArgs,
    #[command(flatten)]
    pub csv: CsvArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "sweep.csv")]
    pub out: PathBuf,
    #[arg(long, default_value = "0:1:0.1")]
    pub phi_grid: String,
    #[command(flatten)]
    pub reasoning: ReasoningArgs,
    #[arg(long, value_enum, default_value_t = TransferArg::Sigmoid)]
    pub transfer: TransferArg,
    #[arg(long, value_enum, default_value_t = HeadArg::Recurrence)]
    pub head: HeadArg,
    #[command(flatten)]
    pub cv: CvArgs,
    #[command(flatten)]
    pub csv: CsvArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "compare.csv")]
    pub out: PathBuf,
    /// Compare at every φ of this grid instead of the single --phi.
    #[arg(long)]
    pub phi_grid: Option<String>,
    #[command(flatten)]
    pub reasoning: ReasoningArgs,
    #[arg(long, value_enum, default_value_t = TransferArg::Sigmoid)]
    pub transfer: TransferArg,
    #[command(flatten)]
    pub cv: CvArgs,
    #[command(flatten)]
    pub csv: CsvArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value = "relevance.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct DynamicsArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "dynamics.csv")]
    pub out: PathBuf,
    /// Override the model's φ for this trace.
    #[arg(long, value_parser = unit_interval, allow_hyphen_values = true)]
    pub phi: Option<f64>,
    /// Override the model's iteration budget for this trace.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub iters: Option<u32>,
    #[command(flatten)]
    pub csv: CsvArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticKind {
    /// Two Gaussian blobs in 2D.
    Blobs,
    /// Four-corner XOR blobs in 2D.
    Xor,
    /// Angular sectors, separable by regression alone.
    Linear,
    /// Two skewed independent features whose dynamics collapse at φ = 1.
    Collapsing,
    /// Many correlated features with logistic labels.
    Wide,
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub kind: SyntheticKind,
    #[arg(long, default_value_t = 200)]
    pub rows: usize,
    /// Feature count for `linear` and `wide`.
    #[arg(long, default_value_t = 4)]
    pub features: usize,
    /// Class count for `linear`.
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "data.csv")]
    pub out: PathBuf,
}
