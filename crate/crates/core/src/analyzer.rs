//! Response analyser: pick practically periodic segment pairs, fold each
//! pair into one period, correlate with the three unit pulses, and split the
//! resulting impulse responses into LTI, random, and non-LTI parts.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::capricep::UnitCapricep;
use crate::dsp::{self, db_to_power, power_db, NUMERIC_FLOOR_DB};
use crate::error::{Error, Result};
use crate::sequence::{PolarityMatrix, EXTENDED_WEIGHTS, NUM_SEQUENCES, SLOTS_PER_PERIOD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowKind {
    /// Integrated rectangle: a linear crossfade.
    Rect,
    /// Integrated half cosine: a raised-cosine crossfade.
    HalfCosine,
}

impl WindowKind {
    /// Crossfade weight `w[n]` for `n` in `0..len`; `w[n] + w[len-1-n] = 1`.
    pub fn weight(&self, n: usize, len: usize) -> f64 {
        let t = (n as f64 + 0.5) / len as f64;
        match self {
            WindowKind::Rect => t,
            WindowKind::HalfCosine => 0.5 - 0.5 * (std::f64::consts::PI * t).cos(),
        }
    }

    pub fn weights(&self, len: usize) -> Vec<f64> {
        (0..len).map(|n| self.weight(n, len)).collect()
    }

    /// Gain restoring the variance lost when two independent noise segments
    /// are crossfaded.
    pub fn compensation_db(&self) -> f64 {
        match self {
            WindowKind::Rect => 1.76,
            WindowKind::HalfCosine => 1.25,
        }
    }

    /// Correlation between the noise of two periodised pairs that share a
    /// segment.
    pub fn adjacent_correlation(&self, len: usize) -> f64 {
        let w = self.weights(len);
        let shared: f64 = w.iter().map(|v| v * (1.0 - v)).sum();
        let own: f64 = w.iter().map(|v| v * v + (1.0 - v) * (1.0 - v)).sum();
        shared / own
    }

    pub fn name(&self) -> &'static str {
        match self {
            WindowKind::Rect => "rect",
            WindowKind::HalfCosine => "cos",
        }
    }
}

impl std::str::FromStr for WindowKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rect" => Ok(WindowKind::Rect),
            "cos" => Ok(WindowKind::HalfCosine),
            other => Err(Error::Argument(format!("window must be rect or cos, got {other:?}"))),
        }
    }
}

/// Signal on which the segment-difference SD is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdDomain {
    /// After pulse compression by the three units.
    Pulse,
    RawCents,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub audio_rate: f64,
    /// Allocation interval N_u at the audio rate.
    pub unit_interval: usize,
    pub decimation: usize,
    pub threshold_db: f64,
    pub window: WindowKind,
    pub max_pairs: usize,
    pub sd_domain: SdDomain,
    /// Calibration bins more than this far below the peak are masked.
    pub mask_db: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            audio_rate: 44100.0,
            unit_interval: 24576,
            decimation: 8,
            threshold_db: -150.0,
            window: WindowKind::Rect,
            max_pairs: 6,
            sd_domain: SdDomain::Pulse,
            mask_db: 60.0,
        }
    }
}

impl AnalysisConfig {
    pub fn analysis_rate(&self) -> f64 {
        self.audio_rate / self.decimation as f64
    }

    /// N_a, one slot at the analysis rate.
    pub fn slot_len(&self) -> usize {
        self.unit_interval / self.decimation
    }

    pub fn period_len(&self) -> usize {
        SLOTS_PER_PERIOD * self.slot_len()
    }

    pub fn bin_hz(&self) -> f64 {
        self.analysis_rate() / self.period_len() as f64
    }

    /// Bin frequencies `0..=2 N_a`.
    pub fn freq_axis(&self) -> Vec<f64> {
        let df = self.bin_hz();
        (0..=self.period_len() / 2).map(|i| i as f64 * df).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.decimation == 0 || self.unit_interval == 0 {
            return Err(Error::Config("decimation and allocation interval must be positive".into()));
        }
        if self.unit_interval % self.decimation != 0 {
            return Err(Error::Config(format!(
                "allocation interval {} is not divisible by the decimation {}",
                self.unit_interval, self.decimation
            )));
        }
        if self.slot_len() % 2 != 0 {
            return Err(Error::Config("the slot length at the analysis rate must be even".into()));
        }
        if self.max_pairs < 2 {
            return Err(Error::Config("at least two pairs are needed".into()));
        }
        if !(self.mask_db > 0.0) {
            return Err(Error::Config("mask depth must be positive".into()));
        }
        Ok(())
    }
}

/// Unit spectra at the analysis rate plus the derived analysis kernel.
#[derive(Debug, Clone)]
pub struct UnitTemplates {
    /// DFT over one period (4 N_a bins) of each unit after ideal decimation.
    pub spectra: Vec<Vec<Complex64>>,
    pub polarity: PolarityMatrix,
    /// `sum_k |T_k|^2`, the weighting of the pulse-domain SD.
    pub pulse_weight: Vec<f64>,
    /// `|K|^2` where `E = K * Y` maps a periodised signal to its extended response.
    pub kernel_power: Vec<f64>,
}

/// Per-slot phase factor of the un-mixing: `A_k[m] = 1/4 sum_s p_ks e^{i pi m s / 2}`.
fn unmix_factor(row: &[i8; SLOTS_PER_PERIOD], m: usize) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (s, &p) in row.iter().enumerate() {
        let phase = std::f64::consts::FRAC_PI_2 * ((m * s) % 4) as f64;
        acc += Complex64::from_polar(p as f64, phase);
    }
    acc / SLOTS_PER_PERIOD as f64
}

pub fn build_templates(units: &[UnitCapricep], polarity: &PolarityMatrix, config: &AnalysisConfig) -> Result<UnitTemplates> {
    config.validate()?;
    if units.len() != NUM_SEQUENCES {
        return Err(Error::Argument(format!("{NUM_SEQUENCES} units are required, got {}", units.len())));
    }
    let audio_period = SLOTS_PER_PERIOD * config.unit_interval;
    let period = config.period_len();
    let half = period / 2;
    let scale = 1.0 / config.decimation as f64;
    let mut spectra = Vec::with_capacity(NUM_SEQUENCES);
    for unit in units {
        if unit.sample_rate != config.audio_rate {
            return Err(Error::Argument(format!(
                "unit rate {} Hz differs from the audio rate {} Hz",
                unit.sample_rate, config.audio_rate
            )));
        }
        if unit.len() > audio_period {
            return Err(Error::Argument("unit is longer than the excitation period".into()));
        }
        let full = dsp::real_dft(&unit.samples, audio_period);
        let mut t = vec![Complex64::new(0.0, 0.0); period];
        t[0] = full[0] * scale;
        for m in 1..half {
            t[m] = full[m] * scale;
            t[period - m] = full[audio_period - m] * scale;
        }
        t[half] = Complex64::new(full[half].re * scale, 0.0);
        spectra.push(t);
    }
    let pulse_weight = (0..period)
        .map(|m| spectra.iter().map(|t| t[m].norm_sqr()).sum())
        .collect();
    let kernel_power = (0..period)
        .map(|m| {
            let k: Complex64 = (0..NUM_SEQUENCES)
                .map(|j| EXTENDED_WEIGHTS[j] * unmix_factor(&polarity[j], m) * spectra[j][m].conj())
                .sum();
            k.norm_sqr()
        })
        .collect();
    Ok(UnitTemplates {
        spectra,
        polarity: *polarity,
        pulse_weight,
        kernel_power,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSelection {
    /// Index `j` of each selected pair (segments `j` and `j+1`).
    pub pairs: Vec<usize>,
    pub starts: Vec<usize>,
    /// SD of the difference of consecutive segments, dB re segment level.
    pub sd_curve_db: Vec<f64>,
    /// Start of the first selected pair.
    pub n0: usize,
}

fn segment_level_db(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        power_db(num / den)
    } else if num == 0.0 {
        NUMERIC_FLOOR_DB
    } else {
        -NUMERIC_FLOOR_DB
    }
}

/// SD of the difference between consecutive one-period segments of `y`,
/// in dB re the segment level. Entry `j` compares segments `j` and `j+1`.
pub fn segment_sd_curve(y: &[f64], templates: &UnitTemplates, config: &AnalysisConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let period = config.period_len();
    if y.len() < 3 * period {
        return Err(Error::InsufficientData(format!(
            "{} samples, at least {} (three periods) are needed",
            y.len(),
            3 * period
        )));
    }
    let segments = y.len() / period;
    let weight = match config.sd_domain {
        SdDomain::Pulse => templates.pulse_weight.clone(),
        SdDomain::RawCents => vec![1.0; period],
    };
    let spectra: Vec<Vec<Complex64>> = (0..segments)
        .map(|j| dsp::real_dft(&y[j * period..(j + 1) * period], period))
        .collect();
    Ok((0..segments - 1)
        .map(|j| {
            let (a, b) = (&spectra[j], &spectra[j + 1]);
            let num: f64 = (1..period).map(|m| (b[m] - a[m]).norm_sqr() * weight[m]).sum();
            let den: f64 = (0..period).map(|m| a[m].norm_sqr() * weight[m]).sum();
            segment_level_db(num, 2.0 * den)
        })
        .collect())
}

/// Pairs of `y` whose SD lies below the threshold. At most `max_pairs` are
/// kept, nearest the middle first.
pub fn select_periodic_pairs(y: &[f64], templates: &UnitTemplates, config: &AnalysisConfig) -> Result<PairSelection> {
    let period = config.period_len();
    let sd_curve_db = segment_sd_curve(y, templates, config)?;

    let passing: Vec<usize> = (0..sd_curve_db.len())
        .filter(|&j| sd_curve_db[j] < config.threshold_db)
        .collect();
    if passing.is_empty() {
        let best_db = sd_curve_db.iter().copied().fold(f64::INFINITY, f64::min);
        return Err(Error::NoPeriodicPairs {
            threshold_db: config.threshold_db,
            best_db,
            sd_curve_db,
        });
    }
    let mut pairs = passing;
    if pairs.len() > config.max_pairs {
        let middle = (sd_curve_db.len() - 1) as f64 / 2.0;
        pairs.sort_by(|&a, &b| {
            (a as f64 - middle)
                .abs()
                .total_cmp(&(b as f64 - middle).abs())
                .then(a.cmp(&b))
        });
        pairs.truncate(config.max_pairs);
        pairs.sort_unstable();
    }
    let starts: Vec<usize> = pairs.iter().map(|j| j * period).collect();
    Ok(PairSelection {
        n0: starts[0],
        pairs,
        starts,
        sd_curve_db,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicPair {
    pub x_tilde: Vec<f64>,
    pub y_tilde: Vec<f64>,
    pub pair_index: usize,
    pub window: WindowKind,
}

/// `s~[n] = w[n] s[n + n0] + w[L-1-n] s[n + L + n0]` with `L = 4 N_a`.
pub fn periodize(signal: &[f64], n0: usize, window: WindowKind, period: usize) -> Result<Vec<f64>> {
    if n0 + 2 * period > signal.len() {
        return Err(Error::Argument(format!(
            "segment start {n0} leaves fewer than two periods in {} samples",
            signal.len()
        )));
    }
    let w = window.weights(period);
    Ok((0..period)
        .map(|n| w[n] * signal[n0 + n] + w[period - 1 - n] * signal[n0 + n + period])
        .collect())
}

pub fn periodize_pair(x: &[f64], y: &[f64], n0: usize, config: &AnalysisConfig) -> Result<PeriodicPair> {
    let period = config.period_len();
    Ok(PeriodicPair {
        x_tilde: periodize(x, n0, config.window, period)?,
        y_tilde: periodize(y, n0, config.window, period)?,
        pair_index: n0 / period,
        window: config.window,
    })
}

/// Responses recovered from one periodised pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairResponses {
    pub pair_index: usize,
    /// `short[k][s]`: slot `s` of unit `k`'s compressed train, polarity
    /// removed, starting half a slot before the pulse.
    pub short: Vec<Vec<Vec<f64>>>,
    /// Un-mixed response of each unit over one period.
    pub per_unit: Vec<Vec<f64>>,
    /// Weighted combination of the per-unit responses.
    pub extended: Vec<f64>,
}

pub fn separate_impulse_responses(y_tilde: &[f64], pair_index: usize, templates: &UnitTemplates, config: &AnalysisConfig) -> Result<PairResponses> {
    let period = config.period_len();
    let slot = config.slot_len();
    if y_tilde.len() != period {
        return Err(Error::Argument(format!(
            "periodised signal has {} samples, expected {period}",
            y_tilde.len()
        )));
    }
    let spectrum = dsp::real_dft(y_tilde, period);
    let lead = slot / 2;
    let mut short = Vec::with_capacity(NUM_SEQUENCES);
    let mut per_unit = Vec::with_capacity(NUM_SEQUENCES);
    let mut extended = vec![0.0; period];
    for (k, template) in templates.spectra.iter().enumerate() {
        let c = dsp::circular_correlate_spectra(&spectrum, template);
        let row = &templates.polarity[k];
        let slots: Vec<Vec<f64>> = (0..SLOTS_PER_PERIOD)
            .map(|s| {
                let sign = row[s] as f64;
                (0..slot)
                    .map(|n| sign * c[(s * slot + period - lead + n) % period])
                    .collect()
            })
            .collect();
        let unit: Vec<f64> = (0..period)
            .map(|n| {
                (0..SLOTS_PER_PERIOD)
                    .map(|s| row[s] as f64 * c[(n + s * slot) % period])
                    .sum::<f64>()
                    / SLOTS_PER_PERIOD as f64
            })
            .collect();
        for (e, u) in extended.iter_mut().zip(&unit) {
            *e += EXTENDED_WEIGHTS[k] * u;
        }
        short.push(slots);
        per_unit.push(unit);
    }
    Ok(PairResponses {
        pair_index,
        short,
        per_unit,
        extended,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponseSet {
    pub pairs: Vec<PairResponses>,
}

impl ImpulseResponseSet {
    pub fn short_count(&self) -> usize {
        self.pairs
            .iter()
            .map(|p| p.short.iter().map(Vec::len).sum::<usize>())
            .sum()
    }

    pub fn extended_count(&self) -> usize {
        self.pairs.len()
    }
}

/// Periodises `y` at each selected pair and separates the responses.
pub fn collect_responses(y: &[f64], selection: &PairSelection, templates: &UnitTemplates, config: &AnalysisConfig) -> Result<ImpulseResponseSet> {
    let period = config.period_len();
    let pairs = selection
        .starts
        .iter()
        .map(|&n0| {
            let y_tilde = periodize(y, n0, config.window, period)?;
            separate_impulse_responses(&y_tilde, n0 / period, templates, config)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ImpulseResponseSet { pairs })
}

/// Bias factors of sample statistics over pairs whose noise is correlated
/// when they share a segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCorrelation {
    /// Divides the raw sample variance to make it unbiased.
    pub variance_scale: f64,
    /// `Var(mean) = variance * mean_scale / P`.
    pub mean_scale: f64,
}

impl PairCorrelation {
    pub fn new(pair_indices: &[usize], rho: f64) -> Self {
        let p = pair_indices.len() as f64;
        let adjacent = pair_indices
            .iter()
            .enumerate()
            .flat_map(|(i, a)| pair_indices[i + 1..].iter().map(move |b| (a, b)))
            .filter(|(a, b)| a.abs_diff(**b) == 1)
            .count() as f64;
        let rho_sum = rho * adjacent;
        Self {
            variance_scale: 1.0 / (1.0 - 2.0 * rho_sum / (p * (p - 1.0))),
            mean_scale: 1.0 + 2.0 * rho_sum / p,
        }
    }
}

/// Internal spectra kept for calibration; not serialised.
#[derive(Debug, Clone, Default)]
pub struct DecompositionSpectra {
    /// Mean extended spectrum over pairs, bins `0..=2 N_a`.
    pub lti: Vec<Complex64>,
    /// Unbiased, window-compensated variance of the extended spectrum.
    pub random: Vec<f64>,
    /// Mean time-limited per-unit spectra.
    pub unit_means: Vec<Vec<Complex64>>,
    /// Unbiased, compensated variance of the per-unit spectra.
    pub unit_variances: Vec<Vec<f64>>,
    pub mean_scale: f64,
    pub kernel_power: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResponseDecomposition {
    pub freq_hz: Vec<f64>,
    pub lti_ir: Vec<f64>,
    /// Uncalibrated: `|L|` in dB. Calibrated: gain re the test system.
    pub gain_db: Vec<f64>,
    pub random_db: Vec<f64>,
    pub nonlti_db: Vec<f64>,
    /// Random power referred to the periodised input: white noise of
    /// variance s^2 reads `10 log10 s^2` in every bin.
    pub random_input_db: Vec<f64>,
    /// `true` for bins used by the metrics.
    pub usable: Vec<bool>,
    pub masked_above_hz: f64,
    pub n_pairs: usize,
    pub n_short_responses: usize,
    pub n_extended_responses: usize,
    pub pair_indices: Vec<usize>,
    pub compensation_db: f64,
    pub overlap_correction_db: f64,
    pub window: WindowKind,
    pub calibrated: bool,
    #[serde(skip)]
    pub spectra: DecompositionSpectra,
}

fn sample_variance(values: &[Complex64]) -> f64 {
    let n = values.len() as f64;
    let mean: Complex64 = values.iter().sum::<Complex64>() / n;
    values.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (n - 1.0)
}

/// Keeps `|n| < N_a / 2` of a one-period circular response.
fn time_limit(response: &[f64], slot: usize) -> Vec<f64> {
    let period = response.len();
    let half = slot / 2;
    response
        .iter()
        .enumerate()
        .map(|(n, &v)| if n < half || n >= period - half { v } else { 0.0 })
        .collect()
}

pub fn decompose(set: &ImpulseResponseSet, templates: &UnitTemplates, config: &AnalysisConfig) -> Result<ResponseDecomposition> {
    let p = set.pairs.len();
    if p < 2 {
        return Err(Error::InsufficientData(format!("{p} pairs, at least 2 are needed")));
    }
    let period = config.period_len();
    let slot = config.slot_len();
    let bins = period / 2 + 1;
    let comp = db_to_power(config.window.compensation_db());
    let indices: Vec<usize> = set.pairs.iter().map(|r| r.pair_index).collect();
    let correlation = PairCorrelation::new(&indices, config.window.adjacent_correlation(period));
    let variance_gain = comp * correlation.variance_scale;

    let extended: Vec<Vec<Complex64>> = set.pairs.iter().map(|r| dsp::real_dft(&r.extended, period)).collect();
    let mut lti = Vec::with_capacity(bins);
    let mut random = Vec::with_capacity(bins);
    for m in 0..bins {
        let column: Vec<Complex64> = extended.iter().map(|f| f[m]).collect();
        lti.push(column.iter().sum::<Complex64>() / p as f64);
        random.push(sample_variance(&column) * variance_gain);
    }
    let lti_ir: Vec<f64> = (0..period)
        .map(|n| set.pairs.iter().map(|r| r.extended[n]).sum::<f64>() / p as f64)
        .collect();

    let mut unit_means = Vec::with_capacity(NUM_SEQUENCES);
    let mut unit_variances = Vec::with_capacity(NUM_SEQUENCES);
    for k in 0..NUM_SEQUENCES {
        let spectra: Vec<Vec<Complex64>> = set
            .pairs
            .iter()
            .map(|r| dsp::real_dft(&time_limit(&r.per_unit[k], slot), period))
            .collect();
        let mut means = Vec::with_capacity(bins);
        let mut vars = Vec::with_capacity(bins);
        for m in 0..bins {
            let column: Vec<Complex64> = spectra.iter().map(|f| f[m]).collect();
            means.push(column.iter().sum::<Complex64>() / p as f64);
            vars.push(sample_variance(&column) * variance_gain);
        }
        unit_means.push(means);
        unit_variances.push(vars);
    }
    let nonlti: Vec<f64> = (0..bins)
        .map(|m| {
            let values: Vec<Complex64> = unit_means.iter().map(|u| u[m]).collect();
            let within = unit_variances.iter().map(|v| v[m]).sum::<f64>() / NUM_SEQUENCES as f64;
            (sample_variance(&values) - within * correlation.mean_scale / p as f64).max(0.0)
        })
        .collect();

    let input_scale = |m: usize| templates.kernel_power[m] * period as f64;
    let random_input_db = (0..bins)
        .map(|m| power_db(random[m] / input_scale(m)))
        .collect();
    Ok(ResponseDecomposition {
        freq_hz: config.freq_axis(),
        lti_ir,
        gain_db: lti.iter().map(|c| power_db(c.norm_sqr())).collect(),
        random_db: random.iter().map(|&v| power_db(v)).collect(),
        nonlti_db: nonlti.iter().map(|&v| power_db(v)).collect(),
        random_input_db,
        usable: vec![true; bins],
        masked_above_hz: config.analysis_rate() / 2.0,
        n_pairs: p,
        n_short_responses: set.short_count(),
        n_extended_responses: set.extended_count(),
        pair_indices: indices,
        compensation_db: config.window.compensation_db(),
        overlap_correction_db: 10.0 * correlation.variance_scale.log10(),
        window: config.window,
        calibrated: false,
        spectra: DecompositionSpectra {
            lti,
            random,
            unit_means,
            unit_variances,
            mean_scale: correlation.mean_scale,
            kernel_power: templates.kernel_power[..bins].to_vec(),
        },
    })
}

/// Normalises `target` by the test-system response `calibration` (the same
/// analysis applied to the true modulation). Bins where the calibration
/// power is more than `mask_db` below its peak are masked, as is everything
/// above the first such bin.
pub fn calibrate_and_normalize(target: &ResponseDecomposition, calibration: &ResponseDecomposition, config: &AnalysisConfig) -> Result<ResponseDecomposition> {
    let cal = &calibration.spectra;
    let tgt = &target.spectra;
    let bins = cal.lti.len();
    if bins == 0 || tgt.lti.len() != bins || target.n_pairs != calibration.n_pairs {
        return Err(Error::Calibration(
            "target and calibration were analysed with different settings".into(),
        ));
    }
    let cal_power: Vec<f64> = cal.lti.iter().map(|c| c.norm_sqr()).collect();
    let peak = cal_power.iter().copied().fold(0.0, f64::max);
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::Calibration("calibration response is zero everywhere".into()));
    }
    let floor = peak * db_to_power(-config.mask_db);
    let first_masked = cal_power.iter().position(|&v| v < floor).unwrap_or(bins);
    if first_masked == 0 {
        return Err(Error::Calibration("calibration response is masked at DC".into()));
    }
    let usable: Vec<bool> = (0..bins).map(|m| m < first_masked).collect();
    let masked_above_hz = if first_masked < bins {
        calibration.freq_hz[first_masked]
    } else {
        calibration.freq_hz[bins - 1]
    };

    let p = target.n_pairs as f64;
    let mut gain_db = Vec::with_capacity(bins);
    let mut random_db = Vec::with_capacity(bins);
    let mut nonlti_db = Vec::with_capacity(bins);
    for m in 0..bins {
        if !usable[m] {
            gain_db.push(NUMERIC_FLOOR_DB);
            random_db.push(NUMERIC_FLOOR_DB);
            nonlti_db.push(NUMERIC_FLOOR_DB);
            continue;
        }
        gain_db.push(power_db(tgt.lti[m].norm_sqr() / cal_power[m]));
        random_db.push(power_db(tgt.random[m] / cal_power[m]));
        let ratios: Vec<Complex64> = (0..NUM_SEQUENCES)
            .map(|k| tgt.unit_means[k][m] / cal.unit_means[k][m])
            .collect();
        let within = (0..NUM_SEQUENCES)
            .map(|k| tgt.unit_variances[k][m] / cal.unit_means[k][m].norm_sqr())
            .sum::<f64>()
            / NUM_SEQUENCES as f64;
        let excess = sample_variance(&ratios) - within * tgt.mean_scale / p;
        nonlti_db.push(power_db(if excess.is_finite() { excess.max(0.0) } else { 0.0 }));
    }
    Ok(ResponseDecomposition {
        gain_db,
        random_db,
        nonlti_db,
        usable,
        masked_above_hz,
        calibrated: true,
        ..target.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capricep::{generate_unit, UnitConfig};
    use crate::sequence::{build_excitation, polarity_rows, SequenceLayout};

    fn toy_config() -> AnalysisConfig {
        AnalysisConfig {
            audio_rate: 8000.0,
            unit_interval: 128,
            decimation: 2,
            ..AnalysisConfig::default()
        }
    }

    fn toy_units() -> Vec<UnitCapricep> {
        let cfg = UnitConfig {
            num_sections: 20,
            duration_s: 0.012,
            sample_rate: 8000.0,
            ..UnitConfig::default()
        };
        (0..3).map(|s| generate_unit(100 + s, &cfg).unwrap()).collect()
    }

    /// Excitation decimated by 2 (no smoothing; the toy only checks algebra).
    fn toy_signal() -> (Vec<f64>, UnitTemplates, AnalysisConfig) {
        let config = toy_config();
        let units = toy_units();
        let layout = SequenceLayout::with_interval(config.unit_interval);
        let ex = build_excitation(&units, &layout).unwrap();
        let templates = build_templates(&units, &polarity_rows(), &config).unwrap();
        let y = ex.samples.iter().step_by(2).copied().collect();
        (y, templates, config)
    }

    #[test]
    fn crossfade_weights_are_complementary() {
        for kind in [WindowKind::Rect, WindowKind::HalfCosine] {
            let w = kind.weights(64);
            for n in 0..64 {
                assert!((w[n] + w[63 - n] - 1.0).abs() < 1e-15);
            }
            assert!(w.windows(2).all(|p| p[1] > p[0]));
        }
    }

    #[test]
    fn compensation_matches_crossfade_variance() {
        for (kind, expect, rho) in [(WindowKind::Rect, 2.0 / 3.0, 0.25), (WindowKind::HalfCosine, 0.75, 1.0 / 6.0)] {
            let w = kind.weights(4096);
            let kept = w.iter().map(|v| v * v + (1.0 - v) * (1.0 - v)).sum::<f64>() / 4096.0;
            assert!((kept - expect).abs() < 1e-6);
            assert!((-10.0 * kept.log10() - kind.compensation_db()).abs() < 0.005);
            assert!((kind.adjacent_correlation(4096) - rho).abs() < 1e-6);
        }
    }

    #[test]
    fn periodic_input_gives_one_exact_period() {
        let period = 16;
        let base: Vec<f64> = (0..period).map(|n| ((n * 7) % 5) as f64 - 2.0).collect();
        let signal: Vec<f64> = (0..3 * period).map(|n| base[n % period]).collect();
        for kind in [WindowKind::Rect, WindowKind::HalfCosine] {
            let p = periodize(&signal, 3, kind, period).unwrap();
            for n in 0..period {
                assert!((p[n] - base[(n + 3) % period]).abs() < 1e-14);
            }
        }
    }

    fn max_circular_step(p: &[f64]) -> f64 {
        (0..p.len()).map(|n| (p[(n + 1) % p.len()] - p[n]).abs()).fold(0.0, f64::max)
    }

    /// A drifting, non-periodic signal truncated to one period wraps with a
    /// level step; the crossfaded period is as smooth as the signal itself.
    #[test]
    fn crossfade_removes_wrap_step() {
        let period = 256;
        let signal: Vec<f64> = (0..2 * period)
            .map(|n| 0.01 * n as f64 + (std::f64::consts::TAU * n as f64 / 37.3).sin())
            .collect();
        let naive_step = (signal[0] - signal[period - 1]).abs();
        let local_step = signal.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        let drift = (0..period).map(|n| (signal[n + period] - signal[n]).abs()).fold(0.0, f64::max);
        assert!(naive_step > 1.0);
        for kind in [WindowKind::Rect, WindowKind::HalfCosine] {
            let p = periodize(&signal, 0, kind, period).unwrap();
            assert!(max_circular_step(&p) <= local_step + 2.0 * drift / period as f64, "{kind:?}");
        }
        let curvature = |x: &[f64], circular: bool| {
            let n = x.len();
            let range = if circular { 0..n } else { 0..n - 2 };
            range
                .map(|i| (x[(i + 2) % n] - 2.0 * x[(i + 1) % n] + x[i]).abs())
                .fold(0.0, f64::max)
        };
        let p = periodize(&signal, 0, WindowKind::HalfCosine, period).unwrap();
        assert!(curvature(&p, true) <= 1.1 * curvature(&signal, false));
    }

    #[test]
    fn out_of_range_start_is_rejected() {
        assert!(matches!(periodize(&[0.0; 31], 0, WindowKind::Rect, 16), Err(Error::Argument(_))));
    }

    #[test]
    fn exactly_periodic_signal_selects_every_pair() {
        let (y, templates, config) = toy_signal();
        let period = config.period_len();
        let clean: Vec<f64> = (0..8 * period).map(|n| y[period + n % period]).collect();
        let sel = select_periodic_pairs(&clean, &templates, &AnalysisConfig { max_pairs: 10, ..config }).unwrap();
        assert_eq!(sel.pairs, (0..7).collect::<Vec<_>>());
        assert!(sel.sd_curve_db.iter().all(|&v| v == NUMERIC_FLOOR_DB));
        assert_eq!(sel.n0, 0);
    }

    #[test]
    fn excitation_selects_interior_pairs() {
        let (y, templates, config) = toy_signal();
        let sel = select_periodic_pairs(&y, &templates, &config).unwrap();
        assert_eq!(sel.sd_curve_db.len(), 8);
        assert_eq!(sel.pairs, vec![1, 2, 3, 4, 5, 6]);
        assert_eq!(sel.n0, config.period_len());
    }

    #[test]
    fn too_short_signal_is_rejected() {
        let (_, templates, config) = toy_signal();
        let y = vec![1.0; 3 * config.period_len() - 1];
        assert!(matches!(select_periodic_pairs(&y, &templates, &config), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn noisy_signal_reports_curve() {
        let (y, templates, config) = toy_signal();
        let noisy: Vec<f64> = y.iter().enumerate().map(|(i, v)| v + 1e-3 * ((i * 7919 % 101) as f64 - 50.0)).collect();
        match select_periodic_pairs(&noisy, &templates, &config) {
            Err(Error::NoPeriodicPairs { sd_curve_db, .. }) => assert_eq!(sd_curve_db.len(), 8),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn central_pairs_are_kept() {
        let (y, templates, config) = toy_signal();
        // middle of pairs 0..=7 is 3.5; the tie between 2 and 5 goes low
        let sel = select_periodic_pairs(&y, &templates, &AnalysisConfig { max_pairs: 3, ..config }).unwrap();
        assert_eq!(sel.pairs, vec![2, 3, 4]);
    }

    #[test]
    fn seventy_two_short_responses() {
        let (y, templates, config) = toy_signal();
        let sel = select_periodic_pairs(&y, &templates, &config).unwrap();
        let set = collect_responses(&y, &sel, &templates, &config).unwrap();
        assert_eq!(set.short_count(), 72);
        assert_eq!(set.extended_count(), 6);
        assert!(set.pairs.iter().all(|p| p.extended.len() == config.period_len()));
        assert!(set.pairs.iter().flat_map(|p| p.short.iter().flatten()).all(|r| r.len() == config.slot_len()));
    }

    #[test]
    fn delay_shifts_every_response() {
        let (y, templates, config) = toy_signal();
        let period = config.period_len();
        let n0 = period;
        let base = periodize(&y, n0, config.window, period).unwrap();
        let shifted = periodize(&y, n0 - 5, config.window, period).unwrap();
        let a = separate_impulse_responses(&base, 1, &templates, &config).unwrap();
        let b = separate_impulse_responses(&shifted, 1, &templates, &config).unwrap();
        for n in 0..period {
            assert!((b.extended[(n + 5) % period] - a.extended[n]).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_pairs_have_no_random_part() {
        let (y, templates, config) = toy_signal();
        let sel = select_periodic_pairs(&y, &templates, &config).unwrap();
        let mut set = collect_responses(&y, &sel, &templates, &config).unwrap();
        let first = set.pairs[0].clone();
        for p in set.pairs.iter_mut() {
            p.extended = first.extended.clone();
            p.per_unit = first.per_unit.clone();
        }
        let d = decompose(&set, &templates, &config).unwrap();
        assert!(d.random_db.iter().all(|&v| v == NUMERIC_FLOOR_DB));
    }

    #[test]
    fn one_pair_is_not_enough() {
        let (y, templates, config) = toy_signal();
        let sel = select_periodic_pairs(&y, &templates, &AnalysisConfig { max_pairs: 2, ..config }).unwrap();
        let mut set = collect_responses(&y, &sel, &templates, &config).unwrap();
        set.pairs.truncate(1);
        assert!(matches!(decompose(&set, &templates, &config), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn self_calibration_is_flat() {
        let (y, templates, config) = toy_signal();
        let sel = select_periodic_pairs(&y, &templates, &config).unwrap();
        let set = collect_responses(&y, &sel, &templates, &config).unwrap();
        let d = decompose(&set, &templates, &config).unwrap();
        let c = calibrate_and_normalize(&d, &d, &config).unwrap();
        assert!(c.calibrated);
        for m in (0..c.gain_db.len()).filter(|&m| c.usable[m]) {
            assert!(c.gain_db[m].abs() < 1e-9);
            assert_eq!(c.nonlti_db[m], NUMERIC_FLOOR_DB);
        }
    }

    #[test]
    fn pair_correlation_factors() {
        let c = PairCorrelation::new(&[1, 2, 3, 4, 5, 6], 0.25);
        assert!((c.variance_scale - 1.0 / (1.0 - 2.5 / 30.0)).abs() < 1e-12);
        assert!((c.mean_scale - (1.0 + 2.5 / 6.0)).abs() < 1e-12);
        let apart = PairCorrelation::new(&[1, 3, 5], 0.25);
        assert_eq!(apart.variance_scale, 1.0);
        assert_eq!(apart.mean_scale, 1.0);
    }

    #[test]
    fn kernel_has_unit_weight_per_class() {
        let (_, templates, _) = toy_signal();
        // |K|^2 = |T_k|^2 / 16 on even classes and |T_2|^2 / 8 on odd bins
        for m in 0..templates.kernel_power.len() {
            let k = match m % 4 {
                0 => templates.spectra[0][m].norm_sqr() / 16.0,
                2 => templates.spectra[1][m].norm_sqr() / 16.0,
                _ => templates.spectra[2][m].norm_sqr() / 8.0,
            };
            assert!((templates.kernel_power[m] - k).abs() <= 1e-12 * k.max(1e-30), "bin {m}");
        }
    }
}
