use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use modresp_core::analyzer::WindowKind;
use modresp_core::extractors::ExtractorSpec;
use modresp_core::testbench::{DEFAULT_DEPTH_CENTS, DEFAULT_SEED};

#[derive(Debug, Parser)]
#[command(name = "modresp", version, about = "Measure how pitch extractors respond to frequency modulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run extractors over a grid of fundamentals and store their responses.
    Measure(MeasureArgs),
    /// Plot every response and write the performance tables and map.
    Report(RunArgs),
    /// Render one multi-panel frame per fundamental.
    Frames(FramesArgs),
    /// Write map.csv, smoothness.csv and map.svg only.
    Map(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WindowArg {
    Rect,
    Cos,
}

impl From<WindowArg> for WindowKind {
    fn from(w: WindowArg) -> Self {
        match w {
            WindowArg::Rect => WindowKind::Rect,
            WindowArg::Cos => WindowKind::HalfCosine,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct MeasureArgs {
    /// Extractor spec: builtin:<ncf|ncf-raw|cep|yin|identity>[@<ms>] or
    /// external:<name>=<command with {input} and {output}>. Repeatable.
    #[arg(long = "extractor", required = true, value_parser = parse_spec)]
    pub extractors: Vec<ExtractorSpec>,
    #[arg(long, default_value_t = 80.0)]
    pub f0_min: f64,
    #[arg(long, default_value_t = 800.0)]
    pub f0_max: f64,
    #[arg(long, default_value_t = 48)]
    pub steps_per_octave: u32,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Number of candidate units the working set is selected from.
    #[arg(long, default_value_t = 1000)]
    pub candidates: usize,
    /// Allocation interval N_u in audio samples.
    #[arg(long, default_value_t = 24576)]
    pub nu: usize,
    #[arg(long, default_value_t = DEFAULT_DEPTH_CENTS)]
    pub depth_cents: f64,
    #[arg(long, default_value_t = 8)]
    pub decimation: usize,
    #[arg(long, value_enum, default_value_t = WindowArg::Rect)]
    pub window: WindowArg,
    #[arg(long, default_value_t = -150.0, allow_hyphen_values = true)]
    pub threshold_db: f64,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Keep each cell's audio.wav.
    #[arg(long)]
    pub keep_audio: bool,
    /// Parent of the timestamped run directory.
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
    /// Exact run directory, overriding --out.
    #[arg(long)]
    pub run_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    pub run_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct FramesArgs {
    pub run_dir: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub cols: usize,
    #[arg(long, default_value_t = 4)]
    pub rows: usize,
}

fn parse_spec(s: &str) -> Result<ExtractorSpec, String> {
    let spec: ExtractorSpec = s.parse().map_err(|e: modresp_core::Error| e.to_string())?;
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}
