use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("harmonic {harmonic} aliases: {frequency_hz:.1} Hz is at or above Nyquist ({nyquist_hz:.1} Hz)")]
    Aliasing {
        harmonic: usize,
        frequency_hz: f64,
        nyquist_hz: f64,
    },

    #[error("sample {index} clips (|{value}| > 1)")]
    Clipping { index: usize, value: f64 },

    #[error("malformed WAV file: {0}")]
    Wav(String),

    #[error("extractor `{command}` failed with {status}: {stderr}")]
    ExtractorFailed {
        command: String,
        status: String,
        stderr: String,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("extractor produced no frames")]
    EmptyOutput,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// No pair of consecutive segments was periodic enough. Carries the
    /// segment SD curve (dB) for diagnosis.
    #[error("no periodic segment pair below {threshold_db} dB (best {best_db:.1} dB)")]
    NoPeriodicPairs {
        threshold_db: f64,
        best_db: f64,
        sd_curve_db: Vec<f64>,
    },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
