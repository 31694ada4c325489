//! `elt`: validate schemas, detect events, score detections, render SVGs
//! and generate synthetic data.
//!
//! Exit codes: 0 on success, 1 for domain violations (schema axioms, IoU
//! thresholds), 2 for input and usage errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use elt_core::detector::DetectError;
use elt_core::eval::EvalError;
use elt_core::schema::SchemaError;
use elt_core::ModelError;
use thiserror::Error;

mod commands;
pub mod config;
pub mod render;

pub use config::Config;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Schema(SchemaError::AxiomViolation { .. }) => 1,
            CliError::Eval(EvalError::BadThreshold(_)) => 1,
            _ => 2,
        }
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Parser)]
#[command(name = "elt", version, about = "Event Logic Tree detection toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a schema file and check its axioms.
    Validate(ValidateArgs),
    /// Detect events in a CSV series (or a directory of them).
    Detect(DetectArgs),
    /// Score detections against labels.
    Eval(EvalArgs),
    /// Draw a series, its detections and their explanation trees as SVG.
    Render(RenderArgs),
    /// Generate a seeded synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// TOML config file; falls back to $ELT_CONFIG.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CsvArgs {
    /// Field delimiter of the CSV input.
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    /// Column holding timestamps, excluded from the channels.
    #[arg(long)]
    pub timestamp_column: Option<String>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Event schema file (`.elt`)
    pub schema: PathBuf,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// CSV file, or a directory whose `*.csv` files are processed in order.
    #[arg(long)]
    pub data: PathBuf,
    /// Event schema file (`.elt`)
    #[arg(long)]
    pub schema: PathBuf,
    /// Output file (a directory when `--data` is one); stdout if omitted.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Maps a schema channel to a CSV column, e.g. `pressure=P_psi`.
    #[arg(long = "map", value_parser = parse_mapping)]
    pub map: Vec<(String, String)>,
    /// Append one JSON line per explored search state to this file.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Lowest root confidence reported [config default: 0.3]
    #[arg(long)]
    pub min_confidence: Option<f64>,
    /// IoU above which the weaker of two overlapping detections is dropped
    #[arg(long)]
    pub nms_iou: Option<f64>,
    /// Partial assignments kept per search step
    #[arg(long)]
    pub beam_width: Option<usize>,
    #[command(flatten)]
    pub csv: CsvArgs,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// `detections_v1` file, or a directory of `<stem>.detections.json`.
    #[arg(long)]
    pub detections: PathBuf,
    /// `labels_v1` file, or a directory of `<stem>.labels.json`.
    #[arg(long)]
    pub labels: PathBuf,
    /// Comma-separated IoU thresholds.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    /// Write the JSON report here.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// `detections_v1` file; without it only the signals are drawn.
    #[arg(long)]
    pub detections: Option<PathBuf>,
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1000.0)]
    pub width: f64,
    #[command(flatten)]
    pub csv: CsvArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// TOML file holding a synthetic spec; defaults to the config's
    /// `[synth]` table.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Directory receiving `frame_XXX.csv` and `frame_XXX.labels.json`
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Overrides the spec's seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the number of generated frames
    #[arg(long)]
    pub n_samples: Option<usize>,
    #[command(flatten)]
    pub config: ConfigArg,
}

fn parse_mapping(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() && !v.trim().is_empty() => {
            Ok((k.trim().to_string(), v.trim().to_string()))
        }
        _ => Err(format!("expected CHANNEL=COLUMN, got `{s}`")),
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate(a) => commands::validate(&a),
        Command::Detect(a) => commands::detect(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Render(a) => commands::render(&a),
        Command::Synth(a) => commands::synth(&a),
    }
}

/// Parses `args` (program name first), runs the command and reports errors
/// on stderr.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code().clamp(0, 255) as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
