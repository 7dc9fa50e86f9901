//! Test tone synthesis: Gaussian smoothing of the excitation into a cents
//! modulation track, and a harmonic oscillator whose fundamental follows it
//! in the log-frequency domain.

use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{Error, Result};
use crate::sequence::{ModulationExcitation, SequenceLayout};

pub const AUDIO_RATE: f64 = 44100.0;
pub const MAX_HARMONICS: usize = 40;
pub const PEAK_LEVEL: f64 = 0.5;

/// Sidelobe-less Gaussian FIR: truncated where it decays to machine
/// epsilon, normalised to unity DC gain.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSmoother {
    pub kernel: Vec<f64>,
    pub sigma_s: f64,
    pub half_length_s: f64,
    pub sample_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmootherConfig {
    pub sigma_s: f64,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        Self { sigma_s: 0.005 }
    }
}

impl GaussianSmoother {
    pub fn new(sigma_s: f64, sample_rate: f64) -> Result<Self> {
        if !(sigma_s > 0.0) || !(sample_rate > 0.0) {
            return Err(Error::Config(format!(
                "smoother needs positive sigma and rate (got {sigma_s} s, {sample_rate} Hz)"
            )));
        }
        let half_length_s = sigma_s * (2.0 * (1.0 / f64::EPSILON).ln()).sqrt();
        let half = (half_length_s * sample_rate).floor() as isize;
        let sigma = sigma_s * sample_rate;
        let raw: Vec<f64> = (-half..=half)
            .map(|n| (-0.5 * (n as f64 / sigma).powi(2)).exp())
            .collect();
        let sum: f64 = raw.iter().sum();
        Ok(Self {
            kernel: raw.iter().map(|v| v / sum).collect(),
            sigma_s,
            half_length_s,
            sample_rate,
        })
    }

    pub fn half_width(&self) -> usize {
        self.kernel.len() / 2
    }

    /// Zero-phase, same-length convolution.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        if x.is_empty() {
            return Vec::new();
        }
        let full = dsp::convolve(x, &self.kernel);
        let h = self.half_width();
        full[h..h + x.len()].to_vec()
    }

    /// Magnitude response at `f` Hz of the continuous Gaussian.
    pub fn gain_at(&self, f: f64) -> f64 {
        (-0.5 * (std::f64::consts::TAU * f * self.sigma_s).powi(2)).exp()
    }
}

/// Smooths the excitation and scales it so that the steady region has the
/// requested RMS in cents. An all-zero excitation stays zero.
pub fn smooth_excitation(ex: &ModulationExcitation, smoother: &GaussianSmoother, depth_cents: f64) -> Result<Vec<f64>> {
    if smoother.kernel.len() >= ex.samples.len() {
        return Err(Error::Argument(format!(
            "smoothing kernel ({} taps) is not shorter than the excitation ({} samples)",
            smoother.kernel.len(),
            ex.samples.len()
        )));
    }
    let mut y = smoother.apply(&ex.samples);
    let (start, end) = ex.steady_region;
    let level = dsp::rms(&y[start..end]);
    if level > 0.0 {
        let scale = depth_cents / level;
        y.iter_mut().for_each(|v| *v *= scale);
    }
    Ok(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VfoConfig {
    /// Average fundamental (Hz).
    pub carrier_f0: f64,
    pub num_harmonics: usize,
    /// RMS modulation depth (cents) over the steady region.
    pub depth_cents: f64,
    pub sample_rate: f64,
}

impl VfoConfig {
    pub fn new(carrier_f0: f64, depth_cents: f64) -> Self {
        Self {
            carrier_f0,
            num_harmonics: default_harmonics(carrier_f0, AUDIO_RATE),
            depth_cents,
            sample_rate: AUDIO_RATE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_f0 > 0.0) || !(self.sample_rate > 0.0) {
            return Err(Error::Config("carrier and sample rate must be positive".into()));
        }
        if !(self.depth_cents > 0.0) {
            return Err(Error::Config(format!(
                "modulation depth must be positive, got {}",
                self.depth_cents
            )));
        }
        if self.num_harmonics == 0 {
            return Err(Error::Config("at least one harmonic is required".into()));
        }
        let nyquist = 0.5 * self.sample_rate;
        let top = self.carrier_f0 * self.num_harmonics as f64;
        if top >= nyquist {
            return Err(Error::Aliasing {
                harmonic: (nyquist / self.carrier_f0).ceil() as usize,
                frequency_hz: top,
                nyquist_hz: nyquist,
            });
        }
        Ok(())
    }
}

pub fn default_harmonics(carrier_f0: f64, sample_rate: f64) -> usize {
    ((0.45 * sample_rate / carrier_f0).floor() as usize).clamp(1, MAX_HARMONICS)
}

/// Log-frequency grid `min * 2^(k / steps)`, kept while a point does not
/// exceed `max` by more than 1/96 octave.
pub fn f0_grid(min_hz: f64, max_hz: f64, steps_per_octave: u32) -> Vec<f64> {
    let steps = steps_per_octave.max(1) as f64;
    let limit = max_hz * 2f64.powf(1.0 / 96.0);
    (0..)
        .map(|k| min_hz * 2f64.powf(k as f64 / steps))
        .take_while(|&f| f <= limit)
        .collect()
}

/// Formant centres and bandwidths (Hz) of the /a/ envelope.
pub const VOWEL_A_FORMANTS: [(f64, f64); 4] = [(800.0, 80.0), (1200.0, 100.0), (2500.0, 150.0), (3500.0, 200.0)];

/// Amplitude of harmonic `harmonic_index` of a tone with fundamental `f`
/// under the /a/ envelope: cascaded two-pole resonances (unity at DC) on a
/// -6 dB/oct source tilt.
pub fn vowel_shape(harmonic_index: usize, f: f64) -> f64 {
    vowel_envelope(harmonic_index as f64 * f, &VOWEL_A_FORMANTS)
}

pub fn vowel_envelope(freq: f64, formants: &[(f64, f64)]) -> f64 {
    use std::f64::consts::{PI, TAU};
    let w = TAU * freq;
    let resonances: f64 = formants
        .iter()
        .map(|&(fc, bw)| {
            let pole_sq = (PI * bw).powi(2) + (TAU * fc).powi(2);
            let re = pole_sq - w * w;
            let im = TAU * PI * bw * freq;
            pole_sq / (re * re + im * im).sqrt()
        })
        .product();
    resonances * (100.0 / freq)
}

/// Harmonic tone whose instantaneous fundamental is
/// `carrier * 2^(m[n] / 1200)`. Phase starts at zero; output peak is 0.5.
pub fn fm_harmonic_tone(m_cents: &[f64], vfo: &VfoConfig) -> Result<Vec<f64>> {
    vfo.validate()?;
    let nyquist = 0.5 * vfo.sample_rate;
    let peak_cents = m_cents.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if peak_cents.is_finite() {
        let peak_f = vfo.carrier_f0 * 2f64.powf(peak_cents / 1200.0);
        if let Some(h) = (1..=vfo.num_harmonics).find(|&h| h as f64 * peak_f >= nyquist) {
            return Err(Error::Aliasing {
                harmonic: h,
                frequency_hz: h as f64 * peak_f,
                nyquist_hz: nyquist,
            });
        }
    }

    let amps: Vec<f64> = (1..=vfo.num_harmonics)
        .map(|h| vowel_shape(h, vfo.carrier_f0))
        .collect();
    let mut out = Vec::with_capacity(m_cents.len());
    let mut cycles = 0.0f64;
    for &m in m_cents {
        let phase = std::f64::consts::TAU * cycles;
        let (s1, c1) = phase.sin_cos();
        let two_c = 2.0 * c1;
        let (mut prev, mut cur) = (0.0, s1);
        let mut acc = 0.0;
        for &a in &amps {
            acc += a * cur;
            let next = two_c * cur - prev;
            prev = cur;
            cur = next;
        }
        out.push(acc);
        cycles += vfo.carrier_f0 * 2f64.powf(m / 1200.0) / vfo.sample_rate;
        cycles -= cycles.floor();
    }

    let peak = out.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if peak > 0.0 {
        let scale = PEAK_LEVEL / peak;
        out.iter_mut().for_each(|v| *v *= scale);
    }
    Ok(out)
}

/// The carrier-independent part of a test signal: excitation and smoothed
/// cents track at the audio rate.
#[derive(Debug, Clone)]
pub struct ReferenceModulation {
    pub excitation: ModulationExcitation,
    pub cents: Vec<f64>,
    pub smoother: GaussianSmoother,
    pub depth_cents: f64,
}

impl ReferenceModulation {
    pub fn new(excitation: ModulationExcitation, smoother: GaussianSmoother, depth_cents: f64) -> Result<Self> {
        let cents = smooth_excitation(&excitation, &smoother, depth_cents)?;
        Ok(Self {
            excitation,
            cents,
            smoother,
            depth_cents,
        })
    }

    pub fn layout(&self) -> &SequenceLayout {
        &self.excitation.layout
    }

    pub fn duration_s(&self) -> f64 {
        self.cents.len() as f64 / self.smoother.sample_rate
    }

    pub fn render(&self, carrier_f0: f64) -> Result<TestSignalBundle> {
        let vfo = VfoConfig {
            sample_rate: self.smoother.sample_rate,
            ..VfoConfig::new(carrier_f0, self.depth_cents)
        };
        let audio = fm_harmonic_tone(&self.cents, &vfo)?;
        Ok(TestSignalBundle {
            audio,
            reference_cents: self.cents.clone(),
            vfo,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TestSignalBundle {
    pub audio: Vec<f64>,
    pub reference_cents: Vec<f64>,
    pub vfo: VfoConfig,
}
