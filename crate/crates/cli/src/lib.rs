//! The `modresp` command line: `measure` runs a grid of cells into a run
//! directory; `report`, `map` and `frames` render from that directory alone.

pub mod args;
pub mod frames;
pub mod measure;
pub mod report;
pub mod run_dir;
pub mod svg;

use std::ffi::OsString;
use std::path::Path;

use clap::Parser;

use args::{Cli, Command};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_INTERNAL: i32 = 70;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Internal(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Internal(m) => m,
        }
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))
}

fn partial(out: &report::ReportOutcome) -> i32 {
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    for p in &out.problems {
        eprintln!("unreadable: {p}");
    }
    if out.problems.is_empty() {
        EXIT_OK
    } else {
        EXIT_PARTIAL
    }
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Measure(a) => {
            let out = measure::measure(&a)?;
            println!("{}", out.run_dir.display());
            for f in &out.failures {
                eprintln!("failed: {} at {:.3} Hz: {}", f.extractor_id, f.f0_hz, f.error);
            }
            eprintln!("{} cells, {} failed", out.cells, out.failures.len());
            Ok(if out.failures.is_empty() { EXIT_OK } else { EXIT_PARTIAL })
        }
        Command::Report(a) => {
            let out = report::report(&a.run_dir)?;
            eprintln!("{} response plots", out.plots);
            Ok(partial(&out))
        }
        Command::Map(a) => Ok(partial(&report::map(&a.run_dir)?)),
        Command::Frames(a) => {
            let out = frames::frames(&a.run_dir, a.cols, a.rows)?;
            eprintln!("{} frames", out.frames);
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            Ok(EXIT_OK)
        }
    }
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
