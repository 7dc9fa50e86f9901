//! Unit CAPRICEP pulses: cascaded second-order all-pass sections with
//! randomised centre frequencies and polarity, truncated and energy
//! normalised.
//!
//! A unit pulse has a flat magnitude spectrum, so correlating it with its
//! own time reversal compresses it back into (almost) a single sample. Three
//! units with low mutual crosstalk form the excitation set.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{Error, Result};

const LOWEST_CENTRE_HZ: f64 = 20.0;
const HIGHEST_CENTRE_RATIO: f64 = 0.45;
const RENORMALIZE_EVERY: usize = 8;
const BLOCK_BINS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitConfig {
    pub num_sections: usize,
    pub duration_s: f64,
    pub sample_rate: f64,
    /// Section bandwidth as a fraction of its centre frequency.
    pub bandwidth_ratio: f64,
    /// Lower limit of the section bandwidth, Hz.
    pub min_bandwidth_hz: f64,
}

impl Default for UnitConfig {
    fn default() -> Self {
        Self {
            num_sections: 200,
            duration_s: 0.5,
            sample_rate: 44100.0,
            bandwidth_ratio: 0.02,
            min_bandwidth_hz: 20.0,
        }
    }
}

impl UnitConfig {
    pub fn length_samples(&self) -> usize {
        (self.duration_s * self.sample_rate).round() as usize
    }

    fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0) {
            return Err(Error::Config(format!(
                "sample rate must be positive, got {}",
                self.sample_rate
            )));
        }
        if !(self.duration_s > 0.0) || self.length_samples() < 1 {
            return Err(Error::Config(format!(
                "unit duration must cover at least one sample, got {} s",
                self.duration_s
            )));
        }
        if !(self.bandwidth_ratio > 0.0 && self.bandwidth_ratio.is_finite() && self.min_bandwidth_hz >= 0.0) {
            return Err(Error::Config(format!(
                "bandwidth ratio must be positive, got {}",
                self.bandwidth_ratio
            )));
        }
        if self.num_sections > 0 && HIGHEST_CENTRE_RATIO * self.sample_rate <= LOWEST_CENTRE_HZ {
            return Err(Error::Config(format!(
                "sample rate {} Hz leaves no room for centre frequencies",
                self.sample_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitCapricep {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub seed: u64,
    pub id: usize,
}

impl UnitCapricep {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn negated(&self) -> Self {
        Self {
            samples: self.samples.iter().map(|v| -v).collect(),
            ..self.clone()
        }
    }
}

/// Generates one unit pulse. Deterministic in `seed`.
pub fn generate_unit(seed: u64, config: &UnitConfig) -> Result<UnitCapricep> {
    generate_unit_with_id(seed, seed as usize, config)
}

pub fn generate_unit_with_id(seed: u64, id: usize, config: &UnitConfig) -> Result<UnitCapricep> {
    config.validate()?;
    let len = config.length_samples();
    let mut samples = vec![0.0; len];
    if config.num_sections == 0 {
        samples[0] = 1.0;
        return Ok(UnitCapricep {
            samples,
            sample_rate: config.sample_rate,
            seed,
            id,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = LOWEST_CENTRE_HZ.ln();
    let hi = (HIGHEST_CENTRE_RATIO * config.sample_rate).ln();

    // Cascade response on a grid wide enough for tails on both sides of
    // time zero. Negative polarity conjugates a section's phase, which runs
    // it backwards in time.
    let size = 2 * len;
    let bins = size / 2 + 1;
    let step = std::f64::consts::TAU / size as f64;
    let (w_re, w_im): (Vec<f64>, Vec<f64>) = (0..bins).map(|k| ((k as f64 * step).cos(), -(k as f64 * step).sin())).unzip();
    let (w2_re, w2_im): (Vec<f64>, Vec<f64>) = (0..bins).map(|k| ((2.0 * k as f64 * step).cos(), -(2.0 * k as f64 * step).sin())).unzip();
    let sections: Vec<(f64, f64, f64)> = (0..config.num_sections)
        .map(|_| {
            let centre = rng.gen_range(lo..hi).exp();
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let bandwidth = (config.bandwidth_ratio * centre).max(config.min_bandwidth_hz);
            let r = (-std::f64::consts::PI * bandwidth / config.sample_rate).exp();
            let a1 = -2.0 * r * (std::f64::consts::TAU * centre / config.sample_rate).cos();
            (a1, r * r, sign)
        })
        .collect();
    let mut p_re = vec![1.0; bins];
    let mut p_im = vec![0.0; bins];
    let mut mag = vec![1.0; bins];
    // Each section contributes w^2 conj(D)^2 / |D|^2 with
    // D = 1 + a1 w + a2 w^2, w = exp(-i omega). Magnitudes are collected
    // separately and divided out every few sections.
    for start in (0..bins).step_by(BLOCK_BINS) {
        let end = (start + BLOCK_BINS).min(bins);
        let (w_re, w_im, w2_re, w2_im) = (&w_re[start..end], &w_im[start..end], &w2_re[start..end], &w2_im[start..end]);
        let (p_re, p_im, mag) = (&mut p_re[start..end], &mut p_im[start..end], &mut mag[start..end]);
        for (index, &(a1, a2, sign)) in sections.iter().enumerate() {
            let n = p_re.len();
            let (wr, wi, vr, vi) = (&w_re[..n], &w_im[..n], &w2_re[..n], &w2_im[..n]);
            let (pi, m) = (&mut p_im[..n], &mut mag[..n]);
            for k in 0..n {
                let d_re = 1.0 + a1 * wr[k] + a2 * vr[k];
                let d_im = a1 * wi[k] + a2 * vi[k];
                let q_re = d_re * d_re - d_im * d_im;
                let q_im = -2.0 * d_re * d_im;
                let h_re = vr[k] * q_re - vi[k] * q_im;
                let h_im = sign * (vr[k] * q_im + vi[k] * q_re);
                let (x, y) = (p_re[k], pi[k]);
                p_re[k] = x * h_re - y * h_im;
                pi[k] = x * h_im + y * h_re;
                m[k] *= d_re * d_re + d_im * d_im;
            }
            if index % RENORMALIZE_EVERY == RENORMALIZE_EVERY - 1 || index + 1 == sections.len() {
                for ((pr, pi), m) in p_re.iter_mut().zip(p_im.iter_mut()).zip(mag.iter_mut()) {
                    *pr /= *m;
                    *pi /= *m;
                    *m = 1.0;
                }
            }
        }
    }
    let mut spectrum: Vec<Complex64> = p_re.iter().zip(&p_im).map(|(&re, &im)| Complex64::new(re, im)).collect();
    spectrum[0].im = 0.0;
    spectrum[bins - 1].im = 0.0;
    let mut circular = vec![0.0; size];
    RealFftPlanner::<f64>::new()
        .plan_fft_inverse(size)
        .process(&mut spectrum, &mut circular)
        .map_err(|e| Error::Config(format!("unit synthesis failed: {e}")))?;
    // Time zero moves to the middle of the buffer.
    let x: Vec<f64> = (0..size).map(|n| circular[(n + size / 2) % size] / size as f64).collect();

    let mut prefix = Vec::with_capacity(size + 1);
    prefix.push(0.0);
    for v in &x {
        prefix.push(prefix.last().unwrap() + v * v);
    }
    // Keep the most energetic window; ties go to the latest start.
    let start = (0..=size - len).fold(0, |best, s| {
        if prefix[s + len] - prefix[s] >= prefix[best + len] - prefix[best] {
            s
        } else {
            best
        }
    });
    samples.copy_from_slice(&x[start..start + len]);
    let norm = samples.iter().map(|v| v * v).sum::<f64>().sqrt();
    samples.iter_mut().for_each(|v| *v /= norm);

    Ok(UnitCapricep {
        samples,
        sample_rate: config.sample_rate,
        seed,
        id,
    })
}

/// Correlates `signal` with `unit` (convolution with the time-reversed unit),
/// aligned so that a copy of the unit starting at index `m` peaks at `m`.
pub fn matched_filter(unit: &UnitCapricep, signal: &[f64]) -> Result<Vec<f64>> {
    if signal.len() < unit.len() {
        return Err(Error::Argument(format!(
            "signal ({} samples) is shorter than the unit ({} samples)",
            signal.len(),
            unit.len()
        )));
    }
    let reversed: Vec<f64> = unit.samples.iter().rev().copied().collect();
    let full = dsp::convolve(signal, &reversed);
    let lead = unit.len() - 1;
    Ok(full[lead..lead + signal.len()].to_vec())
}

fn check_compatible(a: &UnitCapricep, b: &UnitCapricep) -> Result<()> {
    if a.sample_rate != b.sample_rate {
        return Err(Error::Argument(format!(
            "sample rates differ ({} vs {})",
            a.sample_rate, b.sample_rate
        )));
    }
    if a.len() != b.len() {
        return Err(Error::Argument(format!(
            "unit lengths differ ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Linear cross-correlation of equal-length units through real FFTs long
/// enough to avoid wrap-around.
struct Correlator {
    len: usize,
    fwd: Arc<dyn RealToComplex<f64>>,
    inv: Arc<dyn ComplexToReal<f64>>,
}

impl Correlator {
    fn new(unit_len: usize) -> Self {
        let len = (2 * unit_len).max(2);
        let mut planner = RealFftPlanner::<f64>::new();
        Self {
            len,
            fwd: planner.plan_fft_forward(len),
            inv: planner.plan_fft_inverse(len),
        }
    }

    fn spectrum(&self, unit: &UnitCapricep) -> Vec<Complex64> {
        let mut buf = unit.samples.clone();
        buf.resize(self.len, 0.0);
        let mut out = self.fwd.make_output_vec();
        self.fwd.process(&mut buf, &mut out).expect("buffer sizes come from the plan");
        out
    }

    /// Crosstalk in dB from two spectra and the product of the energies.
    fn crosstalk_db(&self, fa: &[Complex64], fb: &[Complex64], energy_product: f64) -> f64 {
        let mut prod: Vec<Complex64> = fa.iter().zip(fb).map(|(x, y)| x * y.conj()).collect();
        prod[0].im = 0.0;
        if self.len % 2 == 0 {
            prod[self.len / 2].im = 0.0;
        }
        let mut xc = self.inv.make_output_vec();
        self.inv.process(&mut prod, &mut xc).expect("buffer sizes come from the plan");
        let peak = xc.iter().fold(0.0f64, |m, v| m.max(v.abs())) / self.len as f64;
        (20.0 * (peak / energy_product.sqrt()).log10()).min(0.0)
    }
}

fn energy(unit: &UnitCapricep) -> f64 {
    unit.samples.iter().map(|v| v * v).sum::<f64>()
}

/// Peak absolute cross-correlation over all lags, in dB relative to the
/// geometric mean of the two energies. Never positive.
pub fn crosstalk(a: &UnitCapricep, b: &UnitCapricep) -> Result<f64> {
    check_compatible(a, b)?;
    let corr = Correlator::new(a.len());
    Ok(corr.crosstalk_db(&corr.spectrum(a), &corr.spectrum(b), energy(a) * energy(b)))
}

/// Reproducible description of a selected set. Units are regenerated from
/// their seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapricepSetManifest {
    pub config: Option<UnitConfig>,
    pub candidate_pool_size: usize,
    pub pool_seeds: Vec<u64>,
    pub pool_ids: Vec<usize>,
    /// Indices into the pool of the active units A, B, C.
    pub active: Vec<usize>,
    /// Pairwise crosstalk (dB) over the pool.
    pub crosstalk_db: Vec<Vec<f64>>,
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
pub struct CapricepSet {
    pub units: Vec<UnitCapricep>,
    pub pool: Vec<UnitCapricep>,
    pub candidate_pool_size: usize,
    pub active: Vec<usize>,
    pub crosstalk_db: Vec<Vec<f64>>,
    /// Generation config, known when the set was built from seeds.
    pub config: Option<UnitConfig>,
    /// Set when the active units are (near) copies of one another.
    pub degenerate: bool,
}

/// Active units whose worst crosstalk exceeds this are flagged degenerate.
pub const DEGENERATE_CROSSTALK_DB: f64 = -1.0;

impl CapricepSet {
    /// Worst pairwise crosstalk among the active units.
    pub fn max_active_crosstalk_db(&self) -> f64 {
        max_pairwise(&self.crosstalk_db, &self.active)
    }

    pub fn manifest(&self) -> CapricepSetManifest {
        CapricepSetManifest {
            config: self.config,
            candidate_pool_size: self.candidate_pool_size,
            pool_seeds: self.pool.iter().map(|u| u.seed).collect(),
            pool_ids: self.pool.iter().map(|u| u.id).collect(),
            active: self.active.clone(),
            crosstalk_db: self.crosstalk_db.clone(),
            degenerate: self.degenerate,
        }
    }

    pub fn from_manifest(manifest: &CapricepSetManifest) -> Result<Self> {
        let config = manifest
            .config
            .ok_or_else(|| Error::Argument("manifest lacks the unit generation config".into()))?;
        if manifest.pool_seeds.len() != manifest.pool_ids.len() {
            return Err(Error::Argument("pool seeds and ids differ in length".into()));
        }
        let pool = manifest
            .pool_seeds
            .iter()
            .zip(&manifest.pool_ids)
            .map(|(&seed, &id)| generate_unit_with_id(seed, id, &config))
            .collect::<Result<Vec<_>>>()?;
        let units = manifest
            .active
            .iter()
            .map(|&i| {
                pool.get(i)
                    .cloned()
                    .ok_or_else(|| Error::Argument(format!("active index {i} outside pool")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            units,
            pool,
            candidate_pool_size: manifest.candidate_pool_size,
            active: manifest.active.clone(),
            crosstalk_db: manifest.crosstalk_db.clone(),
            config: manifest.config,
            degenerate: manifest.degenerate,
        })
    }
}

fn max_pairwise(matrix: &[Vec<f64>], members: &[usize]) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for (i, &a) in members.iter().enumerate() {
        for &b in &members[i + 1..] {
            worst = worst.max(matrix[a][b]);
        }
    }
    worst
}

/// Generates `count` candidates with seeds `base_seed, base_seed + 1, ...`.
pub fn generate_candidates(base_seed: u64, count: usize, config: &UnitConfig) -> Result<Vec<UnitCapricep>> {
    (0..count)
        .into_par_iter()
        .map(|i| generate_unit_with_id(base_seed.wrapping_add(i as u64), i, config))
        .collect()
}

/// Greedy pool selection followed by an exhaustive search for the best
/// `active`-subset of the pool.
///
/// The pool starts from the first candidate; each step adds the candidate
/// whose worst crosstalk against the current pool is lowest (ties go to the
/// lower index).
pub fn select_set(candidates: &[UnitCapricep], pool_size: usize, active: usize) -> Result<CapricepSet> {
    if active == 0 {
        return Err(Error::Argument("at least one active unit is required".into()));
    }
    if pool_size < active {
        return Err(Error::Argument(format!(
            "pool size {pool_size} is smaller than the active count {active}"
        )));
    }
    if pool_size > candidates.len() {
        return Err(Error::Argument(format!(
            "pool size {pool_size} exceeds the {} candidates",
            candidates.len()
        )));
    }
    for c in &candidates[1..] {
        check_compatible(&candidates[0], c)?;
    }

    let corr = Correlator::new(candidates[0].len());
    let energies: Vec<f64> = candidates.iter().map(energy).collect();
    let spectra: Vec<Vec<Complex64>> = candidates.par_iter().map(|u| corr.spectrum(u)).collect();
    let mut chosen = vec![0usize];
    let mut worst = vec![f64::NEG_INFINITY; candidates.len()];
    worst[0] = f64::INFINITY;

    while chosen.len() < pool_size {
        let newest = *chosen.last().unwrap();
        let updates: Vec<(usize, f64)> = (0..candidates.len())
            .into_par_iter()
            .filter(|i| worst[*i] != f64::INFINITY)
            .map(|i| (i, corr.crosstalk_db(&spectra[i], &spectra[newest], energies[i] * energies[newest])))
            .collect();
        for (i, xt) in updates {
            worst[i] = worst[i].max(xt);
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, &w) in worst.iter().enumerate() {
            if w == f64::INFINITY {
                continue;
            }
            if best.map_or(true, |(_, bw)| w < bw) {
                best = Some((i, w));
            }
        }
        let (pick, _) = best.expect("pool size checked against candidate count");
        worst[pick] = f64::INFINITY;
        chosen.push(pick);
    }

    let pool: Vec<UnitCapricep> = chosen.iter().map(|&i| candidates[i].clone()).collect();
    let mut matrix = vec![vec![0.0; pool.len()]; pool.len()];
    for i in 0..pool.len() {
        for j in i + 1..pool.len() {
            let (a, b) = (chosen[i], chosen[j]);
            let xt = corr.crosstalk_db(&spectra[a], &spectra[b], energies[a] * energies[b]);
            matrix[i][j] = xt;
            matrix[j][i] = xt;
        }
    }

    let active_idx = best_subset(&matrix, active);
    let worst_active = max_pairwise(&matrix, &active_idx);
    Ok(CapricepSet {
        units: active_idx.iter().map(|&i| pool[i].clone()).collect(),
        pool,
        candidate_pool_size: candidates.len(),
        active: active_idx,
        crosstalk_db: matrix,
        config: None,
        degenerate: worst_active >= DEGENERATE_CROSSTALK_DB,
    })
}

/// Generates candidates and selects a set, recording the generation config so
/// the set can be rebuilt from its manifest.
pub fn build_set(
    base_seed: u64,
    candidates: usize,
    pool_size: usize,
    active: usize,
    config: &UnitConfig,
) -> Result<CapricepSet> {
    let units = generate_candidates(base_seed, candidates, config)?;
    let mut set = select_set(&units, pool_size, active)?;
    set.config = Some(*config);
    Ok(set)
}

/// Lexicographically first subset of size `k` minimising the worst pairwise
/// crosstalk.
fn best_subset(matrix: &[Vec<f64>], k: usize) -> Vec<usize> {
    fn recurse(
        matrix: &[Vec<f64>],
        k: usize,
        start: usize,
        current: &mut Vec<usize>,
        best: &mut (f64, Vec<usize>),
    ) {
        if current.len() == k {
            let score = max_pairwise(matrix, current);
            if score < best.0 || best.1.is_empty() {
                *best = (score, current.clone());
            }
            return;
        }
        for i in start..matrix.len() {
            current.push(i);
            recurse(matrix, k, i + 1, current, best);
            current.pop();
        }
    }
    let mut best = (f64::INFINITY, Vec::new());
    recurse(matrix, k, 0, &mut Vec::new(), &mut best);
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> UnitConfig {
        UnitConfig {
            num_sections: 40,
            duration_s: 0.05,
            ..UnitConfig::default()
        }
    }

    #[test]
    fn empty_cascade_is_identity() {
        let cfg = UnitConfig {
            num_sections: 0,
            duration_s: 0.01,
            ..UnitConfig::default()
        };
        let u = generate_unit(0, &cfg).unwrap();
        assert_eq!(u.samples[0], 1.0);
        assert!(u.samples[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_non_positive_duration() {
        let cfg = UnitConfig {
            duration_s: 0.0,
            ..UnitConfig::default()
        };
        assert!(matches!(generate_unit(1, &cfg), Err(Error::Config(_))));
        let cfg = UnitConfig {
            duration_s: -1.0,
            ..UnitConfig::default()
        };
        assert!(matches!(generate_unit(1, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn generation_is_bit_deterministic() {
        let a = generate_unit(7, &small_config()).unwrap();
        let b = generate_unit(7, &small_config()).unwrap();
        assert_eq!(a.samples, b.samples);
        let c = generate_unit(8, &small_config()).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn unit_energy() {
        let u = generate_unit(3, &small_config()).unwrap();
        let e: f64 = u.samples.iter().map(|v| v * v).sum();
        assert!((e - 1.0).abs() < 1e-9);
    }

    #[test]
    fn matched_filter_peaks_at_shift() {
        let u = generate_unit(11, &small_config()).unwrap();
        let own = matched_filter(&u, &u.samples).unwrap();
        assert!((own[0] - 1.0).abs() < 1e-9);

        let shift = 137;
        let mut delayed = vec![0.0; u.len() + 400];
        delayed[shift..shift + u.len()].copy_from_slice(&u.samples);
        let out = matched_filter(&u, &delayed).unwrap();
        let peak = out
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap()
            .0;
        assert_eq!(peak, shift);
    }

    #[test]
    fn matched_filter_rejects_short_signal() {
        let u = generate_unit(11, &small_config()).unwrap();
        assert!(matches!(
            matched_filter(&u, &u.samples[..10]),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn crosstalk_self_and_polarity() {
        let u = generate_unit(5, &small_config()).unwrap();
        assert!(crosstalk(&u, &u).unwrap().abs() < 1e-9);
        assert!(crosstalk(&u, &u.negated()).unwrap().abs() < 1e-9);
        let v = generate_unit(6, &small_config()).unwrap();
        let x1 = crosstalk(&u, &v).unwrap();
        let x2 = crosstalk(&u.negated(), &v).unwrap();
        assert!(x1 < 0.0);
        assert!((x1 - x2).abs() < 1e-12);
    }

    #[test]
    fn crosstalk_rejects_mismatch() {
        let u = generate_unit(5, &small_config()).unwrap();
        let mut cfg = small_config();
        cfg.duration_s = 0.04;
        let v = generate_unit(5, &cfg).unwrap();
        assert!(crosstalk(&u, &v).is_err());
    }

    #[test]
    fn duplicates_select_degenerate_set() {
        let u = generate_unit(5, &small_config()).unwrap();
        let cands = vec![u.clone(), u.clone(), u];
        let set = select_set(&cands, 2, 2).unwrap();
        assert_eq!(set.pool.len(), 2);
        assert!(set.max_active_crosstalk_db().abs() < 1e-9);
        assert!(set.degenerate);
    }

    #[test]
    fn pool_larger_than_candidates_is_rejected() {
        let u = generate_unit(5, &small_config()).unwrap();
        assert!(matches!(select_set(&[u], 2, 1), Err(Error::Argument(_))));
    }

    #[test]
    fn manifest_rebuilds_identical_units() {
        let set = build_set(100, 12, 4, 3, &small_config()).unwrap();
        let json = serde_json::to_string(&set.manifest()).unwrap();
        let back: CapricepSetManifest = serde_json::from_str(&json).unwrap();
        let rebuilt = CapricepSet::from_manifest(&back).unwrap();
        for (a, b) in set.units.iter().zip(&rebuilt.units) {
            assert_eq!(a.samples, b.samples);
        }
        assert_eq!(rebuilt.active, set.active);
    }

    #[test]
    fn best_subset_is_exhaustive_optimum() {
        let set = build_set(200, 15, 6, 3, &small_config()).unwrap();
        let m = &set.crosstalk_db;
        let mut best = f64::INFINITY;
        for a in 0..6 {
            for b in a + 1..6 {
                for c in b + 1..6 {
                    best = best.min(m[a][b].max(m[a][c]).max(m[b][c]));
                }
            }
        }
        assert_eq!(set.max_active_crosstalk_db(), best);
    }
}
