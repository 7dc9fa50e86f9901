//! Pitch extractors under test: three frame-based built-in estimators, an
//! identity fixture that replays the true modulation, and an adapter for
//! external executables speaking a two-column CSV protocol.

use std::fmt;
use std::path::Path;
use std::process::Command;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{Error, Result};

pub const DEFAULT_FRAME_INTERVAL_S: f64 = 0.010;
pub const DEFAULT_WINDOW_S: f64 = 0.040;
pub const DEFAULT_SEARCH_LOW_HZ: f64 = 60.0;
pub const DEFAULT_SEARCH_HIGH_HZ: f64 = 1000.0;

const NCF_VOICING: f64 = 0.5;
const NCF_CANDIDATE_FLOOR: f64 = 0.3;
const MAX_CANDIDATES: usize = 8;
/// Strength bonus per octave of candidate frequency (favours the shortest period).
const OCTAVE_COST: f64 = 0.01;
/// Path cost per octave of change over a 10 ms step.
const OCTAVE_JUMP_COST: f64 = 0.35;
const CEP_VOICING: f64 = 0.05;
const YIN_THRESHOLD: f64 = 0.1;
const YIN_VOICING: f64 = 0.35;
const SILENCE_ENERGY: f64 = 1e-20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitchTrack {
    pub times: Vec<f64>,
    /// Hz; NaN marks an unvoiced frame.
    pub f0: Vec<f64>,
    pub source: String,
    pub frame_interval: f64,
}

impl PitchTrack {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn voiced_count(&self) -> usize {
        self.f0.iter().filter(|f| is_voiced(**f)).count()
    }

    pub fn voiced_fraction(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.voiced_count() as f64 / self.len() as f64
        }
    }
}

pub fn is_voiced(f0: f64) -> bool {
    f0.is_finite() && f0 > 0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BuiltinKind {
    Ncf { interpolate: bool },
    Cep,
    Yin,
    Identity,
}

impl BuiltinKind {
    pub fn name(&self) -> &'static str {
        match self {
            BuiltinKind::Ncf { interpolate: true } => "ncf",
            BuiltinKind::Ncf { interpolate: false } => "ncf-raw",
            BuiltinKind::Cep => "cep",
            BuiltinKind::Yin => "yin",
            BuiltinKind::Identity => "identity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameParams {
    /// `None` selects the default: 10 ms for the estimators, the analysis
    /// sample interval for the identity fixture.
    pub frame_interval_s: Option<f64>,
    pub window_s: f64,
    pub search_low_hz: f64,
    pub search_high_hz: f64,
}

impl Default for FrameParams {
    fn default() -> Self {
        Self {
            frame_interval_s: None,
            window_s: DEFAULT_WINDOW_S,
            search_low_hz: DEFAULT_SEARCH_LOW_HZ,
            search_high_hz: DEFAULT_SEARCH_HIGH_HZ,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ExtractorSpec {
    Builtin { kind: BuiltinKind, params: FrameParams },
    External { name: String, command: String },
}

impl ExtractorSpec {
    pub fn builtin(kind: BuiltinKind) -> Self {
        ExtractorSpec::Builtin {
            kind,
            params: FrameParams::default(),
        }
    }

    pub fn with_frame_interval(self, seconds: f64) -> Self {
        match self {
            ExtractorSpec::Builtin { kind, params } => ExtractorSpec::Builtin {
                kind,
                params: FrameParams {
                    frame_interval_s: Some(seconds),
                    ..params
                },
            },
            other => other,
        }
    }

    /// Stable identifier used for directory names and tables.
    pub fn id(&self) -> String {
        match self {
            ExtractorSpec::Builtin { kind, params } => match params.frame_interval_s {
                Some(t) => format!("{}@{}", kind.name(), format_ms(t)),
                None => kind.name().to_string(),
            },
            ExtractorSpec::External { name, .. } => name.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ExtractorSpec::Builtin { params, .. } => {
                if let Some(t) = params.frame_interval_s {
                    if !(t > 0.0) {
                        return Err(Error::Config(format!("frame interval must be positive, got {t}")));
                    }
                }
                if !(params.window_s > 0.0) {
                    return Err(Error::Config("analysis window must be positive".into()));
                }
                if !(params.search_low_hz > 0.0 && params.search_low_hz < params.search_high_hz) {
                    return Err(Error::Config(format!(
                        "search range {}..{} Hz is empty",
                        params.search_low_hz, params.search_high_hz
                    )));
                }
                Ok(())
            }
            ExtractorSpec::External { name, command } => {
                if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
                    return Err(Error::Config(format!("external extractor name {name:?} is not a plain identifier")));
                }
                if !command.contains("{input}") || !command.contains("{output}") {
                    return Err(Error::Config(
                        "external command needs {input} and {output} placeholders".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

fn format_ms(seconds: f64) -> String {
    let ms = seconds * 1000.0;
    if (ms - ms.round()).abs() < 1e-9 {
        format!("{}", ms.round() as i64)
    } else {
        format!("{ms}")
    }
}

impl fmt::Display for ExtractorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtractorSpec::Builtin { .. } => write!(f, "builtin:{}", self.id()),
            ExtractorSpec::External { name, command } => write!(f, "external:{name}={command}"),
        }
    }
}

/// Parses `builtin:<kind>[@<frame ms>]` or `external:<name>=<command>`.
impl FromStr for ExtractorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let spec = if let Some(rest) = s.strip_prefix("builtin:") {
            let (name, interval) = match rest.split_once('@') {
                Some((n, ms)) => {
                    let ms: f64 = ms
                        .parse()
                        .map_err(|_| Error::Argument(format!("bad frame interval in {s:?}")))?;
                    (n, Some(ms / 1000.0))
                }
                None => (rest, None),
            };
            let kind = match name {
                "ncf" => BuiltinKind::Ncf { interpolate: true },
                "ncf-raw" => BuiltinKind::Ncf { interpolate: false },
                "cep" => BuiltinKind::Cep,
                "yin" => BuiltinKind::Yin,
                "identity" => BuiltinKind::Identity,
                other => return Err(Error::Argument(format!("unknown builtin extractor {other:?}"))),
            };
            let spec = ExtractorSpec::builtin(kind);
            match interval {
                Some(t) => spec.with_frame_interval(t),
                None => spec,
            }
        } else if let Some(rest) = s.strip_prefix("external:") {
            let (name, command) = rest
                .split_once('=')
                .ok_or_else(|| Error::Argument(format!("expected external:<name>=<command>, got {s:?}")))?;
            ExtractorSpec::External {
                name: name.trim().to_string(),
                command: command.to_string(),
            }
        } else {
            return Err(Error::Argument(format!(
                "extractor must start with builtin: or external:, got {s:?}"
            )));
        };
        spec.validate().map_err(|e| Error::Argument(e.to_string()))?;
        Ok(spec)
    }
}

struct FrameGeometry {
    hop_s: f64,
    search_low_hz: f64,
    window: usize,
    min_lag: usize,
    max_lag: usize,
}

impl FrameGeometry {
    fn new(params: &FrameParams, rate: f64) -> Result<Self> {
        let nyquist = 0.5 * rate;
        if !(params.search_high_hz < nyquist) {
            return Err(Error::Argument(format!(
                "search ceiling {} Hz is not below Nyquist ({nyquist} Hz)",
                params.search_high_hz
            )));
        }
        let min_lag = ((rate / params.search_high_hz).floor() as usize).max(2);
        let max_lag = (rate / params.search_low_hz).ceil() as usize;
        Ok(Self {
            hop_s: params.frame_interval_s.unwrap_or(DEFAULT_FRAME_INTERVAL_S),
            search_low_hz: params.search_low_hz,
            window: ((params.window_s * rate).round() as usize).max(1),
            min_lag,
            max_lag,
        })
    }

    fn frame_times(&self, duration_s: f64) -> Vec<f64> {
        (0..)
            .map(|i| i as f64 * self.hop_s)
            .take_while(|&t| t < duration_s)
            .collect()
    }
}

/// Zero-padded excerpt of `len` samples starting at `start` (may be negative).
fn excerpt(audio: &[f64], start: isize, len: usize) -> Vec<f64> {
    (0..len as isize)
        .map(|i| {
            let n = start + i;
            if n >= 0 && (n as usize) < audio.len() {
                audio[n as usize]
            } else {
                0.0
            }
        })
        .collect()
}

/// Lag products `r(tau) = sum_{n<W} x[n] x[n+tau]` for `tau = 0..=max_lag`.
struct LagCorrelator {
    size: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl LagCorrelator {
    fn new(window: usize, max_lag: usize) -> Self {
        let size = (2 * window + max_lag).next_power_of_two();
        let mut planner = FftPlanner::new();
        Self {
            size,
            fwd: planner.plan_fft_forward(size),
            inv: planner.plan_fft_inverse(size),
        }
    }

    fn products(&self, frame: &[f64], window: usize, max_lag: usize) -> Vec<f64> {
        let mut head: Vec<Complex64> = (0..self.size)
            .map(|i| Complex64::new(if i < window { frame[i] } else { 0.0 }, 0.0))
            .collect();
        let mut full: Vec<Complex64> = (0..self.size)
            .map(|i| Complex64::new(frame.get(i).copied().unwrap_or(0.0), 0.0))
            .collect();
        self.fwd.process(&mut head);
        self.fwd.process(&mut full);
        let mut prod: Vec<Complex64> = full.iter().zip(&head).map(|(b, a)| b * a.conj()).collect();
        self.inv.process(&mut prod);
        let scale = 1.0 / self.size as f64;
        prod[..=max_lag].iter().map(|c| c.re * scale).collect()
    }
}

fn window_energies(frame: &[f64], window: usize, max_lag: usize) -> Vec<f64> {
    let mut prefix = Vec::with_capacity(frame.len() + 1);
    prefix.push(0.0);
    for &v in frame {
        prefix.push(prefix.last().unwrap() + v * v);
    }
    (0..=max_lag).map(|t| (prefix[t + window] - prefix[t]).max(0.0)).collect()
}

/// A periodicity candidate of one frame.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    f0: f64,
    strength: f64,
}

/// Local NCF peaks of one frame, strongest first. Empty when the frame is
/// unvoiced.
fn ncf_candidates(frame: &[f64], geo: &FrameGeometry, corr: &LagCorrelator, interpolate: bool, rate: f64) -> Vec<Candidate> {
    let r = corr.products(frame, geo.window, geo.max_lag);
    let mut prefix = Vec::with_capacity(frame.len() + 1);
    prefix.push(0.0);
    for &v in frame {
        prefix.push(prefix.last().unwrap() + v * v);
    }
    let w = frame.len();
    if prefix[w] <= SILENCE_ENERGY {
        return Vec::new();
    }
    // Both segments stay inside the frame: x[0..w-t] against x[t..w].
    let ncf = |t: usize| {
        let d = (prefix[w - t] * (prefix[w] - prefix[t])).sqrt();
        if d > 0.0 {
            r[t] / d
        } else {
            0.0
        }
    };
    let values: Vec<f64> = (0..=geo.max_lag).map(ncf).collect();
    let is_peak = |t: usize| values[t] >= values[t - 1] && values[t] >= values[t + 1];
    let mut peaks: Vec<usize> = (geo.min_lag.max(1)..geo.max_lag)
        .filter(|&t| is_peak(t) && values[t] >= NCF_CANDIDATE_FLOOR)
        .collect();
    let best = peaks.iter().map(|&t| values[t]).fold(f64::NEG_INFINITY, f64::max);
    if !(best >= NCF_VOICING) {
        return Vec::new();
    }
    peaks.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    peaks.truncate(MAX_CANDIDATES);
    peaks
        .into_iter()
        .map(|lag| {
            let offset = if interpolate {
                dsp::parabolic_offset(values[lag - 1], values[lag], values[lag + 1])
            } else {
                0.0
            };
            let f0 = rate / (lag as f64 + offset);
            Candidate {
                f0,
                strength: values[lag] + OCTAVE_COST * (f0 / geo.search_low_hz).log2(),
            }
        })
        .collect()
}

/// Best path through the candidates of each voiced run: total strength
/// minus `jump_cost` per octave of frame-to-frame change.
fn track_candidates(frames: &[Vec<Candidate>], jump_cost: f64) -> Vec<f64> {
    let mut out = vec![f64::NAN; frames.len()];
    let mut i = 0;
    while i < frames.len() {
        if frames[i].is_empty() {
            i += 1;
            continue;
        }
        let start = i;
        while i < frames.len() && !frames[i].is_empty() {
            i += 1;
        }
        let run = &frames[start..i];
        let mut score: Vec<f64> = run[0].iter().map(|c| c.strength).collect();
        let mut back: Vec<Vec<usize>> = vec![Vec::new()];
        for pair in run.windows(2) {
            let (prev, next) = (&pair[0], &pair[1]);
            let mut step_score = Vec::with_capacity(next.len());
            let mut step_back = Vec::with_capacity(next.len());
            for c in next {
                let (arg, value) = prev
                    .iter()
                    .enumerate()
                    .map(|(p, q)| (p, score[p] - jump_cost * (c.f0 / q.f0).log2().abs()))
                    .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
                step_score.push(value + c.strength);
                step_back.push(arg);
            }
            score = step_score;
            back.push(step_back);
        }
        let mut k = (0..score.len()).fold(0, |a, b| if score[b] > score[a] { b } else { a });
        for j in (0..run.len()).rev() {
            out[start + j] = run[j][k].f0;
            if j > 0 {
                k = back[j][k];
            }
        }
    }
    out
}

fn yin_frame(frame: &[f64], geo: &FrameGeometry, corr: &LagCorrelator, rate: f64) -> f64 {
    let r = corr.products(frame, geo.window, geo.max_lag);
    let e = window_energies(frame, geo.window, geo.max_lag);
    if e[0] <= SILENCE_ENERGY {
        return f64::NAN;
    }
    let mut cmnd = vec![1.0; geo.max_lag + 1];
    let mut running = 0.0;
    for t in 1..=geo.max_lag {
        let d = (e[0] + e[t] - 2.0 * r[t]).max(0.0);
        running += d;
        cmnd[t] = if running > 0.0 { d * t as f64 / running } else { 1.0 };
    }
    let lo = geo.min_lag.max(1);
    let mut lag = None;
    let mut t = lo;
    while t < geo.max_lag {
        if cmnd[t] < YIN_THRESHOLD {
            while t + 1 < geo.max_lag && cmnd[t + 1] < cmnd[t] {
                t += 1;
            }
            lag = Some(t);
            break;
        }
        t += 1;
    }
    let lag = match lag {
        Some(t) => t,
        None => {
            let t = (lo..geo.max_lag).min_by(|&a, &b| cmnd[a].total_cmp(&cmnd[b])).unwrap();
            if cmnd[t] > YIN_VOICING {
                return f64::NAN;
            }
            t
        }
    };
    let offset = if lag > 1 {
        dsp::parabolic_offset(cmnd[lag - 1], cmnd[lag], cmnd[lag + 1])
    } else {
        0.0
    };
    rate / (lag as f64 + offset)
}

struct Cepstrum {
    size: usize,
    hann: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Cepstrum {
    fn new(window: usize, max_lag: usize) -> Self {
        let size = (2 * window.max(max_lag + 1)).next_power_of_two();
        let hann = (0..window)
            .map(|n| 0.5 - 0.5 * (std::f64::consts::TAU * (n as f64 + 0.5) / window as f64).cos())
            .collect();
        let mut planner = FftPlanner::new();
        Self {
            size,
            hann,
            fwd: planner.plan_fft_forward(size),
            inv: planner.plan_fft_inverse(size),
        }
    }

    fn frame(&self, frame: &[f64], geo: &FrameGeometry, rate: f64) -> f64 {
        let energy: f64 = frame.iter().map(|v| v * v).sum();
        if energy <= SILENCE_ENERGY {
            return f64::NAN;
        }
        let mut buf: Vec<Complex64> = (0..self.size)
            .map(|i| Complex64::new(if i < self.hann.len() { frame[i] * self.hann[i] } else { 0.0 }, 0.0))
            .collect();
        self.fwd.process(&mut buf);
        let peak = buf.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max);
        let floor = peak * 1e-12;
        for c in buf.iter_mut() {
            *c = Complex64::new(0.5 * (c.norm_sqr() + floor).ln(), 0.0);
        }
        self.inv.process(&mut buf);
        let scale = 1.0 / self.size as f64;
        let ceps: Vec<f64> = buf.iter().map(|c| c.re * scale).collect();
        let hi = geo.max_lag.min(self.size / 2 - 1);
        let lag = (geo.min_lag.max(1)..hi).max_by(|&a, &b| ceps[a].total_cmp(&ceps[b])).unwrap();
        if !(ceps[lag] >= CEP_VOICING) {
            return f64::NAN;
        }
        let offset = dsp::parabolic_offset(ceps[lag - 1], ceps[lag], ceps[lag + 1]);
        rate / (lag as f64 + offset)
    }
}

/// Runs a built-in estimator. The identity fixture needs the true
/// modulation and is served by [`run_identity`] instead.
pub fn run_builtin(spec: &ExtractorSpec, audio: &[f64], rate: f64) -> Result<PitchTrack> {
    spec.validate()?;
    let (kind, params) = match spec {
        ExtractorSpec::Builtin { kind, params } => (*kind, params),
        ExtractorSpec::External { .. } => {
            return Err(Error::Argument("external extractors run through run_external".into()))
        }
    };
    if audio.is_empty() {
        return Err(Error::Argument("audio is empty".into()));
    }
    let geo = FrameGeometry::new(params, rate)?;
    let times = geo.frame_times(audio.len() as f64 / rate);
    let half = (geo.window / 2) as isize;
    let span = geo.window + geo.max_lag + 1;
    let start_of = |t: f64| (t * rate).round() as isize - half;

    let f0: Vec<f64> = match kind {
        BuiltinKind::Ncf { interpolate } => {
            if geo.max_lag >= geo.window {
                return Err(Error::Argument(format!(
                    "ncf window of {} samples does not exceed the longest lag ({} samples)",
                    geo.window, geo.max_lag
                )));
            }
            let corr = LagCorrelator::new(geo.window, geo.max_lag);
            let candidates: Vec<Vec<Candidate>> = times
                .par_iter()
                .map(|&t| ncf_candidates(&excerpt(audio, start_of(t), geo.window), &geo, &corr, interpolate, rate))
                .collect();
            track_candidates(&candidates, OCTAVE_JUMP_COST * DEFAULT_FRAME_INTERVAL_S / geo.hop_s)
        }
        BuiltinKind::Yin => {
            let corr = LagCorrelator::new(geo.window, geo.max_lag);
            times
                .par_iter()
                .map(|&t| yin_frame(&excerpt(audio, start_of(t), span), &geo, &corr, rate))
                .collect()
        }
        BuiltinKind::Cep => {
            let cep = Cepstrum::new(geo.window, geo.max_lag);
            times
                .par_iter()
                .map(|&t| cep.frame(&excerpt(audio, start_of(t), geo.window), &geo, rate))
                .collect()
        }
        BuiltinKind::Identity => {
            return Err(Error::Argument(
                "the identity extractor needs the reference track (use run_identity)".into(),
            ))
        }
    };
    Ok(PitchTrack {
        times,
        f0,
        source: spec.id(),
        frame_interval: geo.hop_s,
    })
}

/// Samples the true modulation every `frame_interval` seconds (linear
/// interpolation between audio samples) and returns it as a pitch track.
pub fn run_identity(reference_cents: &[f64], carrier_f0: f64, rate: f64, frame_interval: f64, source: &str) -> Result<PitchTrack> {
    if reference_cents.is_empty() {
        return Err(Error::Argument("reference track is empty".into()));
    }
    if !(frame_interval > 0.0) {
        return Err(Error::Config(format!("frame interval must be positive, got {frame_interval}")));
    }
    let duration = reference_cents.len() as f64 / rate;
    let times: Vec<f64> = (0..)
        .map(|i| i as f64 * frame_interval)
        .take_while(|&t| t < duration)
        .collect();
    let f0 = times
        .iter()
        .map(|&t| {
            let pos = t * rate;
            let n = (pos.floor() as usize).min(reference_cents.len() - 1);
            let next = (n + 1).min(reference_cents.len() - 1);
            let frac = pos - n as f64;
            let cents = reference_cents[n] + frac * (reference_cents[next] - reference_cents[n]);
            carrier_f0 * 2f64.powf(cents / 1200.0)
        })
        .collect();
    Ok(PitchTrack {
        times,
        f0,
        source: source.to_string(),
        frame_interval,
    })
}

fn shell_quote(path: &Path) -> String {
    format!("'{}'", path.to_string_lossy().replace('\'', r"'\''"))
}

/// Runs an external extractor on an existing WAV file and parses its CSV.
pub fn run_external(spec: &ExtractorSpec, wav_path: &Path, workdir: &Path) -> Result<PitchTrack> {
    spec.validate()?;
    let (name, template) = match spec {
        ExtractorSpec::External { name, command } => (name, command),
        _ => return Err(Error::Argument("run_external needs an external extractor".into())),
    };
    let output = workdir.join(format!("{name}.csv"));
    let command = template
        .replace("{input}", &shell_quote(wav_path))
        .replace("{output}", &shell_quote(&output));
    let result = Command::new("sh").arg("-c").arg(&command).current_dir(workdir).output()?;
    if !result.status.success() {
        return Err(Error::ExtractorFailed {
            command,
            status: result.status.to_string(),
            stderr: String::from_utf8_lossy(&result.stderr).into_owned(),
        });
    }
    let text = std::fs::read_to_string(&output)
        .map_err(|e| Error::Parse {
            path: output.clone(),
            line: 0,
            message: format!("cannot read extractor output: {e}"),
        })?;
    parse_track_csv(&text, template, &output)
}

/// Parses `time_sec,f0_hz` lines. A non-numeric first line is taken as a
/// header; empty, NaN or non-positive f0 marks the frame unvoiced.
pub fn parse_track_csv(text: &str, source: &str, path: &Path) -> Result<PitchTrack> {
    let mut times = Vec::new();
    let mut f0 = Vec::new();
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    for (i, raw) in text.split('\n').enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw).trim();
        if line.is_empty() {
            continue;
        }
        let number = i + 1;
        let (t, f) = line
            .split_once(',')
            .ok_or_else(|| err(number, format!("expected two comma-separated fields in {line:?}")))?;
        if f.contains(',') {
            return Err(err(number, format!("expected two fields in {line:?}")));
        }
        let t = match t.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => v,
            _ if times.is_empty() && f0.is_empty() && number == first_content_line(text) => continue,
            _ => return Err(err(number, format!("bad time value {t:?}"))),
        };
        let f = f.trim();
        let value = if f.is_empty() {
            f64::NAN
        } else {
            let v: f64 = f
                .parse()
                .map_err(|_| err(number, format!("bad f0 value {f:?}")))?;
            if v.is_nan() || v <= 0.0 {
                f64::NAN
            } else if v.is_infinite() {
                return Err(err(number, format!("bad f0 value {f:?}")));
            } else {
                v
            }
        };
        if let Some(&last) = times.last() {
            if t <= last {
                return Err(err(number, format!("time {t} does not increase")));
            }
        }
        times.push(t);
        f0.push(value);
    }
    if times.is_empty() {
        return Err(Error::EmptyOutput);
    }
    let diffs: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    let frame_interval = dsp::median(&diffs).unwrap_or(f64::NAN);
    Ok(PitchTrack {
        times,
        f0,
        source: source.to_string(),
        frame_interval,
    })
}

fn first_content_line(text: &str) -> usize {
    text.split('\n')
        .position(|l| !l.trim().is_empty())
        .map_or(0, |i| i + 1)
}

/// A pitch track resampled to the analysis grid, in cents re the carrier.
#[derive(Debug, Clone, PartialEq)]
pub struct CentsTrack {
    pub values: Vec<f64>,
    pub voiced_fraction: f64,
    /// `(start, end)` times of voiced frames bracketing each unvoiced run.
    pub gaps: Vec<(f64, f64)>,
}

/// Converts to cents and interpolates linearly onto `n / analysis_rate`,
/// bridging unvoiced runs and holding the end values.
pub fn track_to_cents(track: &PitchTrack, carrier_f0: f64, analysis_rate: f64, duration_s: f64) -> Result<CentsTrack> {
    if !(carrier_f0 > 0.0) || !(analysis_rate > 0.0) {
        return Err(Error::Argument("carrier and analysis rate must be positive".into()));
    }
    let voiced: Vec<(f64, f64)> = track
        .times
        .iter()
        .zip(&track.f0)
        .filter(|(_, f)| is_voiced(**f))
        .map(|(&t, &f)| (t, 1200.0 * (f / carrier_f0).log2()))
        .collect();
    if voiced.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} voiced frames in a track of {}",
            voiced.len(),
            track.len()
        )));
    }

    let mut gaps = Vec::new();
    let mut last_voiced: Option<f64> = None;
    let mut in_gap = false;
    for (&t, &f) in track.times.iter().zip(&track.f0) {
        if is_voiced(f) {
            if in_gap {
                if let Some(start) = last_voiced {
                    gaps.push((start, t));
                }
            }
            last_voiced = Some(t);
            in_gap = false;
        } else {
            in_gap = true;
        }
    }

    let n = (duration_s * analysis_rate + 1e-9).floor().max(0.0) as usize;
    let mut values = Vec::with_capacity(n);
    let mut j = 0;
    for i in 0..n {
        let t = i as f64 / analysis_rate;
        while j + 2 < voiced.len() && voiced[j + 1].0 <= t {
            j += 1;
        }
        let (t0, c0) = voiced[j];
        let (t1, c1) = voiced[j + 1];
        let v = if t <= t0 {
            c0
        } else if t >= t1 {
            c1
        } else {
            c0 + (c1 - c0) * (t - t0) / (t1 - t0)
        };
        values.push(v);
    }
    Ok(CentsTrack {
        values,
        voiced_fraction: track.voiced_fraction(),
        gaps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(f: f64, seconds: f64) -> Vec<f64> {
        (0..(seconds * 44100.0) as usize)
            .map(|n| 0.5 * (std::f64::consts::TAU * f * n as f64 / 44100.0).sin())
            .collect()
    }

    #[test]
    fn ncf_without_interpolation_quantizes_the_lag() {
        let spec: ExtractorSpec = "builtin:ncf-raw".parse().unwrap();
        let track = run_builtin(&spec, &tone(240.0, 0.5), 44100.0).unwrap();
        let mid = track.f0[track.len() / 2];
        assert!((mid - 44100.0 / 184.0).abs() < 1e-9, "{mid}");
        let cents = 1200.0 * (240.0 / mid).log2();
        assert!((cents - 2.4).abs() < 0.05, "{cents}");
    }

    #[test]
    fn ncf_with_interpolation_is_closer() {
        let spec = ExtractorSpec::builtin(BuiltinKind::Ncf { interpolate: true });
        let track = run_builtin(&spec, &tone(240.0, 0.5), 44100.0).unwrap();
        let mid = track.f0[track.len() / 2];
        assert!((1200.0 * (mid / 240.0).log2()).abs() < 1.0, "{mid}");
    }

    #[test]
    fn silence_is_unvoiced_everywhere() {
        let silence = vec![0.0; 22050];
        for kind in ["ncf", "ncf-raw", "cep", "yin"] {
            let spec: ExtractorSpec = format!("builtin:{kind}").parse().unwrap();
            let track = run_builtin(&spec, &silence, 44100.0).unwrap();
            assert_eq!(track.len(), 50);
            assert_eq!(track.voiced_count(), 0, "{kind}");
        }
    }

    #[test]
    fn empty_audio_is_rejected() {
        let spec = ExtractorSpec::builtin(BuiltinKind::Yin);
        assert!(matches!(run_builtin(&spec, &[], 44100.0), Err(Error::Argument(_))));
    }

    #[test]
    fn identity_requires_the_reference() {
        let spec = ExtractorSpec::builtin(BuiltinKind::Identity);
        assert!(run_builtin(&spec, &[0.1; 100], 44100.0).is_err());
    }

    #[test]
    fn spec_strings_round_trip() {
        for s in ["builtin:ncf", "builtin:ncf-raw", "builtin:cep", "builtin:yin@5", "builtin:identity@10"] {
            let spec: ExtractorSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        let ext: ExtractorSpec = "external:praat=run {input} {output}".parse().unwrap();
        assert_eq!(ext.id(), "praat");
        assert!("external:x=run {input}".parse::<ExtractorSpec>().is_err());
        assert!("builtin:swipe".parse::<ExtractorSpec>().is_err());
        assert!("external:../x=a {input} {output}".parse::<ExtractorSpec>().is_err());
    }

    #[test]
    fn csv_two_frames() {
        let t = parse_track_csv("0.010,239.7\n0.020,240.1", "x", Path::new("o.csv")).unwrap();
        assert_eq!(t.times, vec![0.010, 0.020]);
        assert_eq!(t.f0, vec![239.7, 240.1]);
    }

    #[test]
    fn csv_unvoiced_conventions() {
        let t = parse_track_csv("time_sec,f0_hz\n0.010,0\n0.020,\n0.030,NaN\n0.040,-1\n", "x", Path::new("o.csv")).unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(t.voiced_count(), 0);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        match parse_track_csv("0.01,100\n0.02,abc\n", "x", Path::new("o.csv")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match parse_track_csv("0.01,100\nhello,100\n", "x", Path::new("o.csv")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match parse_track_csv("0.02,100\n0.01,100\n", "x", Path::new("o.csv")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_track_csv("", "x", Path::new("o.csv")), Err(Error::EmptyOutput)));
        assert!(matches!(parse_track_csv("t,f\n", "x", Path::new("o.csv")), Err(Error::EmptyOutput)));
    }

    #[test]
    fn cents_of_constant_tracks() {
        let track = PitchTrack {
            times: vec![0.0, 0.01, 0.02],
            f0: vec![200.0; 3],
            source: "x".into(),
            frame_interval: 0.01,
        };
        let c = track_to_cents(&track, 200.0, 1000.0, 0.05).unwrap();
        assert_eq!(c.values.len(), 50);
        assert!(c.values.iter().all(|&v| v == 0.0));
        let octave = PitchTrack {
            f0: vec![400.0; 3],
            ..track
        };
        let c = track_to_cents(&octave, 200.0, 1000.0, 0.05).unwrap();
        assert!(c.values.iter().all(|&v| (v - 1200.0).abs() < 1e-9));
    }

    #[test]
    fn gaps_are_bridged_and_recorded() {
        let track = PitchTrack {
            times: vec![0.0, 0.01, 0.02, 0.03],
            f0: vec![100.0, f64::NAN, 0.0, 200.0],
            source: "x".into(),
            frame_interval: 0.01,
        };
        let c = track_to_cents(&track, 100.0, 1000.0, 0.03).unwrap();
        assert_eq!(c.gaps, vec![(0.0, 0.03)]);
        assert_eq!(c.voiced_fraction, 0.5);
        assert!((c.values[15] - 600.0).abs() < 1e-9);
    }

    #[test]
    fn too_few_voiced_frames() {
        let track = PitchTrack {
            times: vec![0.0, 0.01],
            f0: vec![100.0, f64::NAN],
            source: "x".into(),
            frame_interval: 0.01,
        };
        assert!(matches!(track_to_cents(&track, 100.0, 1000.0, 0.02), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn cents_are_ratio_based() {
        let track = PitchTrack {
            times: vec![0.0, 0.013, 0.02, 0.041],
            f0: vec![110.0, 117.0, 104.0, 121.0],
            source: "x".into(),
            frame_interval: 0.01,
        };
        let scaled = PitchTrack {
            f0: track.f0.iter().map(|f| f * 3.7).collect(),
            ..track.clone()
        };
        let a = track_to_cents(&track, 110.0, 500.0, 0.05).unwrap();
        let b = track_to_cents(&scaled, 110.0 * 3.7, 500.0, 0.05).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}
