//! The measurement pipeline: one shared test signal design, calibrated once
//! against the true modulation, then applied to any extractor at any carrier.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analyzer::{
    build_templates, calibrate_and_normalize, collect_responses, decompose, segment_sd_curve, select_periodic_pairs,
    AnalysisConfig, ImpulseResponseSet, PairSelection, ResponseDecomposition, UnitTemplates,
};
use crate::capricep::{build_set, CapricepSet, UnitConfig};
use crate::error::{Error, Result};
use crate::extractors::{self, BuiltinKind, ExtractorSpec, PitchTrack};
use crate::results::ResponseFile;
use crate::sequence::{build_excitation, SequenceLayout, NUM_SEQUENCES};
use crate::synth::{GaussianSmoother, ReferenceModulation, SmootherConfig, TestSignalBundle};
use crate::wav;

/// Everything that determines the test signal and its analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetupConfig {
    pub seed: u64,
    pub candidates: usize,
    pub pool_size: usize,
    pub unit: UnitConfig,
    pub layout: SequenceLayout,
    pub smoother: SmootherConfig,
    pub depth_cents: f64,
    pub analysis: AnalysisConfig,
}

pub const DEFAULT_SEED: u64 = 20_210_830;
pub const DEFAULT_DEPTH_CENTS: f64 = 25.0;

impl Default for SetupConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            candidates: 1000,
            pool_size: 10,
            unit: UnitConfig::default(),
            layout: SequenceLayout::default(),
            smoother: SmootherConfig::default(),
            depth_cents: DEFAULT_DEPTH_CENTS,
            analysis: AnalysisConfig::default(),
        }
    }
}

impl SetupConfig {
    /// Sets the allocation interval of both the layout and the analysis.
    pub fn with_interval(mut self, unit_interval: usize) -> Self {
        self.layout.unit_interval = unit_interval;
        self.analysis.unit_interval = unit_interval;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        self.analysis.validate()?;
        if self.layout.unit_interval != self.analysis.unit_interval {
            return Err(Error::Config(format!(
                "layout interval {} differs from analysis interval {}",
                self.layout.unit_interval, self.analysis.unit_interval
            )));
        }
        if self.unit.sample_rate != self.analysis.audio_rate {
            return Err(Error::Config("unit and analysis sample rates differ".into()));
        }
        if !(self.depth_cents > 0.0) {
            return Err(Error::Config(format!("depth must be positive, got {} cents", self.depth_cents)));
        }
        Ok(())
    }
}

/// Analysis of one cents track against the shared calibration.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub sd_curve_db: Vec<f64>,
    pub responses: ImpulseResponseSet,
    pub raw: ResponseDecomposition,
    pub response: ResponseDecomposition,
}

#[derive(Debug, Clone)]
pub struct Measurement {
    pub extractor_id: String,
    pub carrier_f0: f64,
    pub track: PitchTrack,
    pub voiced_fraction: f64,
    pub unvoiced_gaps: usize,
    pub analysis: Analysis,
}

impl Measurement {
    pub fn file(&self) -> ResponseFile {
        ResponseFile::new(
            &self.extractor_id,
            self.carrier_f0,
            &self.analysis.response,
            self.voiced_fraction,
            self.unvoiced_gaps,
            self.analysis.sd_curve_db.clone(),
        )
    }
}

/// Shared, read-only state of a measurement run.
#[derive(Debug, Clone)]
pub struct Testbench {
    pub setup: SetupConfig,
    pub set: CapricepSet,
    pub reference: ReferenceModulation,
    /// The true modulation at the analysis rate.
    pub reference_analysis: Vec<f64>,
    pub templates: UnitTemplates,
    pub selection: PairSelection,
    /// The true modulation analysed like any target (uncalibrated).
    pub calibration: ResponseDecomposition,
}

impl Testbench {
    /// Generates and selects the unit set, then builds the bench.
    pub fn new(setup: SetupConfig) -> Result<Self> {
        setup.validate()?;
        let set = build_set(setup.seed, setup.candidates, setup.pool_size, NUM_SEQUENCES, &setup.unit)?;
        Self::with_set(setup, set)
    }

    pub fn with_set(setup: SetupConfig, set: CapricepSet) -> Result<Self> {
        setup.validate()?;
        let excitation = build_excitation(&set.units, &setup.layout)?;
        let smoother = GaussianSmoother::new(setup.smoother.sigma_s, setup.analysis.audio_rate)?;
        let reference = ReferenceModulation::new(excitation, smoother, setup.depth_cents)?;
        let config = setup.analysis;
        let templates = build_templates(&set.units, &setup.layout.polarity, &config)?;
        let reference_analysis = decimate(&reference.cents, config.decimation);
        let selection = select_periodic_pairs(&reference_analysis, &templates, &config)?;
        let responses = collect_responses(&reference_analysis, &selection, &templates, &config)?;
        let calibration = decompose(&responses, &templates, &config)?;
        Ok(Self {
            setup,
            set,
            reference,
            reference_analysis,
            templates,
            selection,
            calibration,
        })
    }

    pub fn config(&self) -> &AnalysisConfig {
        &self.setup.analysis
    }

    pub fn analysis_rate(&self) -> f64 {
        self.setup.analysis.analysis_rate()
    }

    pub fn duration_s(&self) -> f64 {
        self.reference.duration_s()
    }

    pub fn render(&self, carrier_f0: f64) -> Result<TestSignalBundle> {
        self.reference.render(carrier_f0)
    }

    /// Analyses a cents track sampled at the analysis rate.
    pub fn analyze(&self, cents: &[f64]) -> Result<Analysis> {
        let config = self.config();
        let sd_curve_db = segment_sd_curve(cents, &self.templates, config)?;
        let responses = collect_responses(cents, &self.selection, &self.templates, config)?;
        let raw = decompose(&responses, &self.templates, config)?;
        let response = calibrate_and_normalize(&raw, &self.calibration, config)?;
        Ok(Analysis {
            sd_curve_db,
            responses,
            raw,
            response,
        })
    }

    /// Runs an extractor on the test signal for `carrier_f0`. External
    /// extractors and `keep_audio` need `workdir`, which receives `audio.wav`.
    pub fn extract(&self, spec: &ExtractorSpec, carrier_f0: f64, workdir: Option<&Path>, keep_audio: bool) -> Result<PitchTrack> {
        spec.validate()?;
        let rate = self.setup.analysis.audio_rate;
        let is_identity = matches!(
            spec,
            ExtractorSpec::Builtin {
                kind: BuiltinKind::Identity,
                ..
            }
        );
        let needs_file = keep_audio || matches!(spec, ExtractorSpec::External { .. });
        let bundle = if is_identity && !needs_file {
            None
        } else {
            Some(self.render(carrier_f0)?)
        };
        let wav_path = match (needs_file, workdir, &bundle) {
            (true, Some(dir), Some(b)) => {
                let path = dir.join("audio.wav");
                wav::write_wav_24bit(&b.audio, rate.round() as u32, &path)?;
                Some(path)
            }
            (true, None, _) => {
                return Err(Error::Argument(format!(
                    "extractor {} needs a working directory for its audio file",
                    spec.id()
                )))
            }
            _ => None,
        };
        match spec {
            ExtractorSpec::Builtin {
                kind: BuiltinKind::Identity,
                params,
            } => {
                let hop = params.frame_interval_s.unwrap_or(1.0 / self.analysis_rate());
                extractors::run_identity(&self.reference.cents, carrier_f0, rate, hop, &spec.id())
            }
            ExtractorSpec::Builtin { .. } => {
                let audio = &bundle.as_ref().expect("rendered above").audio;
                extractors::run_builtin(spec, audio, rate)
            }
            ExtractorSpec::External { .. } => {
                let dir = workdir.expect("checked above");
                extractors::run_external(spec, wav_path.as_deref().expect("written above"), dir)
            }
        }
    }

    /// Extracts, resamples to the analysis grid and analyses one cell.
    pub fn measure(&self, spec: &ExtractorSpec, carrier_f0: f64, workdir: Option<&Path>, keep_audio: bool) -> Result<Measurement> {
        let track = self.extract(spec, carrier_f0, workdir, keep_audio)?;
        let cents = extractors::track_to_cents(&track, carrier_f0, self.analysis_rate(), self.duration_s())?;
        let analysis = self.analyze(&cents.values)?;
        Ok(Measurement {
            extractor_id: spec.id(),
            carrier_f0,
            voiced_fraction: cents.voiced_fraction,
            unvoiced_gaps: cents.gaps.len(),
            track,
            analysis,
        })
    }
}

/// Keeps every `factor`-th sample, `floor(len / factor)` samples in all.
pub fn decimate(x: &[f64], factor: usize) -> Vec<f64> {
    (0..x.len() / factor).map(|n| x[n * factor]).collect()
}
