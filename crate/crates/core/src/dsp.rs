//! FFT plumbing shared by the measurement stages.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Power level used in place of `-inf` dB.
pub const NUMERIC_FLOOR_DB: f64 = -300.0;

pub fn power_db(power: f64) -> f64 {
    if power > 0.0 {
        (10.0 * power.log10()).max(NUMERIC_FLOOR_DB)
    } else {
        NUMERIC_FLOOR_DB
    }
}

/// Inverse of [`power_db`]; the numeric floor maps back to zero.
pub fn db_to_power(db: f64) -> f64 {
    if db <= NUMERIC_FLOOR_DB {
        return 0.0;
    }
    10f64.powf(db / 10.0)
}

pub(crate) fn forward(len: usize) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft_forward(len)
}

pub(crate) fn inverse(len: usize) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft_inverse(len)
}

/// Forward DFT of a real sequence zero-padded (or truncated) to `len`.
pub fn real_dft(x: &[f64], len: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = (0..len)
        .map(|i| Complex64::new(x.get(i).copied().unwrap_or(0.0), 0.0))
        .collect();
    forward(len).process(&mut buf);
    buf
}

/// Inverse DFT (normalised by `1/len`), keeping the real part.
pub fn real_idft(spectrum: &[Complex64]) -> Vec<f64> {
    let len = spectrum.len();
    let mut buf = spectrum.to_vec();
    inverse(len).process(&mut buf);
    let scale = 1.0 / len as f64;
    buf.iter().map(|c| c.re * scale).collect()
}

/// Linear convolution via FFT; output length `a.len() + b.len() - 1`.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();
    let fa = real_dft(a, n);
    let fb = real_dft(b, n);
    let prod: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x * y).collect();
    let mut out = real_idft(&prod);
    out.truncate(out_len);
    out
}

/// Circular cross-correlation `out[n] = sum_m x[(n + m) mod N] * t[m]`
/// evaluated through the spectrum of `x` and the spectrum of the template.
pub fn circular_correlate_spectra(x: &[Complex64], template: &[Complex64]) -> Vec<f64> {
    let prod: Vec<Complex64> = x.iter().zip(template).map(|(a, b)| a * b.conj()).collect();
    real_idft(&prod)
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.iter().sum::<f64>() / x.len() as f64
    }
}

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }
}

/// Population variance (divisor `n`).
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    if x.is_empty() {
        0.0
    } else {
        x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 0 {
        0.5 * (v[mid - 1] + v[mid])
    } else {
        v[mid]
    })
}

/// Vertex offset (in samples, within [-0.5, 0.5]) of the parabola through
/// three equally spaced points.
pub fn parabolic_offset(left: f64, centre: f64, right: f64) -> f64 {
    let denom = left - 2.0 * centre + right;
    if denom.abs() < f64::MIN_POSITIVE {
        return 0.0;
    }
    (0.5 * (left - right) / denom).clamp(-0.5, 0.5)
}
