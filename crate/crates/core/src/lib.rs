//! Objective measurement of how pitch extractors respond to frequency
//! modulation.
//!
//! A harmonic test tone is frequency modulated by a periodic excitation made
//! of three time-stretched pulses with orthogonal polarity sequences. The
//! extractor's cents track is correlated back against the pulses, which
//! separates its linear time-invariant response from the random and
//! nonlinear parts in a single run.

pub mod analyzer;
pub mod capricep;
pub mod dsp;
pub mod error;
pub mod extractors;
pub mod metrics;
pub mod results;
pub mod sequence;
pub mod synth;
pub mod testbench;
pub mod wav;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/test-signal.md")]
    mod test_signal {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/extractors.md")]
    mod extractors {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/outputs.md")]
    mod outputs {}
    #[doc = include_str!("../../../book/src/quickstart.md")]
    mod quickstart {}
}
