//! Summary metrics of a calibrated response: bandwidth, total distortion,
//! SNR, and gain smoothness across the fundamental-frequency grid.

use serde::{Deserialize, Serialize};

use crate::dsp::{self, db_to_power, power_db};
use crate::error::{Error, Result};

pub const PLATEAU_LOW_HZ: f64 = 1.0;
pub const PLATEAU_HIGH_HZ: f64 = 4.0;
pub const BANDWIDTH_DROP_DB: f64 = 3.0;
pub const MIN_PLATEAU_BINS: usize = 4;
pub const PROBE_FREQUENCIES_HZ: [f64; 5] = [2.0, 4.0, 8.0, 16.0, 32.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandwidth {
    pub bw_hz: f64,
    pub plateau_gain_db: f64,
    /// No crossing below the mask edge; `bw_hz` is the edge itself.
    pub band_edge_limited: bool,
}

/// `plateau` = median gain over [1, 4] Hz; `bw` = first bin above 4 Hz
/// whose gain is below `plateau - 3 dB`, or the mask edge if none is.
/// Bins at or above `masked_above_hz` are ignored.
pub fn bandwidth(freq_hz: &[f64], gain_db: &[f64], masked_above_hz: f64) -> Result<Bandwidth> {
    if freq_hz.len() != gain_db.len() {
        return Err(Error::Metric("frequency and gain arrays differ in length".into()));
    }
    let usable = |i: usize| freq_hz[i] < masked_above_hz;
    let plateau: Vec<f64> = (0..freq_hz.len())
        .filter(|&i| usable(i) && freq_hz[i] >= PLATEAU_LOW_HZ && freq_hz[i] <= PLATEAU_HIGH_HZ)
        .map(|i| gain_db[i])
        .collect();
    if plateau.len() < MIN_PLATEAU_BINS {
        return Err(Error::Metric(format!(
            "{} unmasked bins in the {PLATEAU_LOW_HZ}-{PLATEAU_HIGH_HZ} Hz plateau, {MIN_PLATEAU_BINS} needed",
            plateau.len()
        )));
    }
    let plateau_gain_db = dsp::median(&plateau).unwrap();
    let limit = plateau_gain_db - BANDWIDTH_DROP_DB;
    let crossing = (0..freq_hz.len()).find(|&i| usable(i) && freq_hz[i] > PLATEAU_HIGH_HZ && gain_db[i] < limit);
    Ok(match crossing {
        Some(i) => Bandwidth {
            bw_hz: freq_hz[i],
            plateau_gain_db,
            band_edge_limited: false,
        },
        None => Bandwidth {
            bw_hz: masked_above_hz,
            plateau_gain_db,
            band_edge_limited: true,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distortion {
    pub td_db: f64,
    /// Mean LTI power (gain squared) below bw, dB.
    pub lti_power_db: f64,
    pub snr_db: f64,
}

/// Averages over bins with `f <= bw` (linear frequency weighting).
pub fn total_distortion_and_snr(freq_hz: &[f64], gain_db: &[f64], random_db: &[f64], nonlti_db: &[f64], bw_hz: f64) -> Result<Distortion> {
    let n = freq_hz.len();
    if gain_db.len() != n || random_db.len() != n || nonlti_db.len() != n {
        return Err(Error::Metric("response arrays differ in length".into()));
    }
    let band: Vec<usize> = (0..n).filter(|&i| freq_hz[i] <= bw_hz).collect();
    if band.is_empty() {
        return Err(Error::Metric(format!("no bins at or below {bw_hz} Hz")));
    }
    let count = band.len() as f64;
    let distortion = band
        .iter()
        .map(|&i| db_to_power(random_db[i]) + db_to_power(nonlti_db[i]))
        .sum::<f64>()
        / count;
    let lti = band.iter().map(|&i| db_to_power(gain_db[i])).sum::<f64>() / count;
    let td_db = power_db(distortion);
    let lti_power_db = power_db(lti);
    Ok(Distortion {
        td_db,
        lti_power_db,
        snr_db: lti_power_db - td_db,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub extractor_id: String,
    pub carrier_f0: f64,
    pub bw_hz: f64,
    pub td_db: f64,
    pub snr_db: f64,
    pub plateau_gain_db: f64,
    pub lti_power_db: f64,
    pub voiced_fraction: f64,
    pub band_edge_limited: bool,
}

/// One extractor's gain curve at one fundamental frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct GainCurve {
    pub carrier_f0: f64,
    pub freq_hz: Vec<f64>,
    pub gain_db: Vec<f64>,
    pub bw_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessRecord {
    pub extractor_id: String,
    pub sd_gain_modfreq_db: f64,
    pub sd_gain_fundfreq_db: f64,
}

fn interpolate(x: &[f64], y: &[f64], at: f64) -> Option<f64> {
    let i = x.iter().position(|&v| v >= at)?;
    if x[i] == at {
        return Some(y[i]);
    }
    if i == 0 {
        return None;
    }
    let t = (at - x[i - 1]) / (x[i] - x[i - 1]);
    Some(y[i - 1] + t * (y[i] - y[i - 1]))
}

fn population_sd(values: &[f64]) -> f64 {
    dsp::variance(values).sqrt()
}

/// SD of first gain differences along modulation frequency (bins up to bw,
/// pooled over the grid) and along the fundamental-frequency grid (at the
/// probe frequencies that lie below every curve's bw, pooled).
pub fn gain_smoothness(extractor_id: &str, curves: &[GainCurve]) -> Result<SmoothnessRecord> {
    if curves.len() < 2 {
        return Err(Error::Metric(format!(
            "{} grid points, at least 2 are needed",
            curves.len()
        )));
    }
    let mut sorted: Vec<&GainCurve> = curves.iter().collect();
    sorted.sort_by(|a, b| a.carrier_f0.total_cmp(&b.carrier_f0));

    let mut along_mod = Vec::new();
    for c in &sorted {
        let band: Vec<f64> = c
            .freq_hz
            .iter()
            .zip(&c.gain_db)
            .filter(|(f, _)| **f <= c.bw_hz)
            .map(|(_, g)| *g)
            .collect();
        along_mod.extend(band.windows(2).map(|w| w[1] - w[0]));
    }
    if along_mod.is_empty() {
        return Err(Error::Metric("fewer than two modulation-frequency bins below bw".into()));
    }

    let min_bw = sorted.iter().map(|c| c.bw_hz).fold(f64::INFINITY, f64::min);
    let mut along_f0 = Vec::new();
    for &probe in PROBE_FREQUENCIES_HZ.iter().filter(|&&p| p <= min_bw) {
        let values: Option<Vec<f64>> = sorted.iter().map(|c| interpolate(&c.freq_hz, &c.gain_db, probe)).collect();
        if let Some(values) = values {
            along_f0.extend(values.windows(2).map(|w| w[1] - w[0]));
        }
    }
    if along_f0.is_empty() {
        return Err(Error::Metric(format!(
            "no probe frequency lies below the smallest bandwidth ({min_bw} Hz)"
        )));
    }
    Ok(SmoothnessRecord {
        extractor_id: extractor_id.to_string(),
        sd_gain_modfreq_db: population_sd(&along_mod),
        sd_gain_fundfreq_db: population_sd(&along_f0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis(n: usize, df: f64) -> Vec<f64> {
        (0..n).map(|i| i as f64 * df).collect()
    }

    fn sinc_db(f: f64, t: f64) -> f64 {
        if f == 0.0 {
            return 0.0;
        }
        let x = std::f64::consts::PI * f * t;
        20.0 * (x.sin() / x).abs().log10()
    }

    #[test]
    fn flat_gain_is_band_edge_limited() {
        let f = axis(300, 0.5);
        let g = vec![0.0; 300];
        let bw = bandwidth(&f, &g, 120.0).unwrap();
        assert!(bw.band_edge_limited);
        assert_eq!(bw.bw_hz, 120.0);
    }

    #[test]
    fn first_crossing_rule() {
        let f = axis(200, 0.5);
        let g: Vec<f64> = f.iter().map(|&x| if x == 30.0 { -3.01 } else { 0.0 }).collect();
        let bw = bandwidth(&f, &g, 100.0).unwrap();
        assert_eq!(bw.bw_hz, 30.0);
        assert!(!bw.band_edge_limited);
    }

    #[test]
    fn boxcar_half_power_point() {
        // |sinc(f T)| = 2^-1/2 for T = 10 ms, solved by bisection
        let target = 0.5f64.sqrt();
        let (mut lo, mut hi) = (1.0, 99.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            let x = std::f64::consts::PI * mid * 0.01;
            if (x.sin() / x) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let df = 44100.0 / 8.0 / 12288.0;
        let f = axis(400, df);
        let g: Vec<f64> = f.iter().map(|&x| sinc_db(x, 0.01)).collect();
        let bw = bandwidth(&f, &g, 150.0).unwrap();
        assert!((bw.bw_hz - lo).abs() <= df, "{} vs {lo}", bw.bw_hz);
        assert!((lo - 44.3).abs() < 0.01);
    }

    #[test]
    fn bandwidth_ignores_gain_scaling() {
        let f = axis(400, 0.4486);
        let g: Vec<f64> = f.iter().map(|&x| sinc_db(x, 0.01)).collect();
        let base = bandwidth(&f, &g, 150.0).unwrap();
        for scale in [0.5f64, 2.0] {
            let shifted: Vec<f64> = g.iter().map(|v| v + 20.0 * scale.log10()).collect();
            assert_eq!(bandwidth(&f, &shifted, 150.0).unwrap().bw_hz, base.bw_hz);
        }
    }

    #[test]
    fn plateau_needs_bins() {
        let f = axis(10, 2.0);
        assert!(matches!(bandwidth(&f, &[0.0; 10], 20.0), Err(Error::Metric(_))));
    }

    #[test]
    fn zero_distortion_hits_the_floor() {
        let f = axis(50, 1.0);
        let floor = vec![dsp::NUMERIC_FLOOR_DB; 50];
        let d = total_distortion_and_snr(&f, &[0.0; 50], &floor, &floor, 20.0).unwrap();
        assert_eq!(d.td_db, dsp::NUMERIC_FLOOR_DB);
        assert_eq!(d.snr_db, d.lti_power_db - d.td_db);
    }

    #[test]
    fn distortion_tracks_noise_power() {
        let f = axis(50, 1.0);
        let a = total_distortion_and_snr(&f, &[0.0; 50], &[-40.0; 50], &[-300.0; 50], 20.0).unwrap();
        let b = total_distortion_and_snr(&f, &[0.0; 50], &[-40.0 + 20.0 * 2f64.log10(); 50], &[-300.0; 50], 20.0).unwrap();
        assert!((b.td_db - a.td_db - 6.0206).abs() < 1e-3);
        assert!((a.snr_db - 40.0).abs() < 1e-9);
    }

    #[test]
    fn empty_band_is_an_error() {
        let f = vec![1.0, 2.0];
        assert!(total_distortion_and_snr(&f, &[0.0; 2], &[0.0; 2], &[0.0; 2], 0.5).is_err());
    }

    fn curve(f0: f64, gain: impl Fn(f64) -> f64, bw: f64) -> GainCurve {
        let freq_hz = axis(200, 0.4486);
        let gain_db = freq_hz.iter().map(|&f| gain(f)).collect();
        GainCurve {
            carrier_f0: f0,
            freq_hz,
            gain_db,
            bw_hz: bw,
        }
    }

    #[test]
    fn flat_surfaces_are_smooth() {
        let curves: Vec<GainCurve> = (0..5).map(|i| curve(80.0 + i as f64, |_| 0.0, 60.0)).collect();
        let s = gain_smoothness("x", &curves).unwrap();
        assert_eq!(s.sd_gain_modfreq_db, 0.0);
        assert_eq!(s.sd_gain_fundfreq_db, 0.0);
    }

    #[test]
    fn alternating_surface_along_f0() {
        let curves: Vec<GainCurve> = (0..21)
            .map(|i| {
                let level = if i % 2 == 0 { 0.5 } else { -0.5 };
                curve(80.0 * 2f64.powf(i as f64 / 6.0), move |_| level, 60.0)
            })
            .collect();
        let s = gain_smoothness("x", &curves).unwrap();
        assert!((s.sd_gain_fundfreq_db - 1.0).abs() < 1e-12);
        assert_eq!(s.sd_gain_modfreq_db, 0.0);
    }

    #[test]
    fn sinc_surface_is_smooth_along_f0_only() {
        let curves: Vec<GainCurve> = (0..6).map(|i| curve(100.0 * (i + 1) as f64, |f| sinc_db(f, 0.01), 44.3)).collect();
        let s = gain_smoothness("x", &curves).unwrap();
        assert!(s.sd_gain_fundfreq_db < 1e-12);
        assert!(s.sd_gain_modfreq_db > 0.0);
    }

    #[test]
    fn degenerate_grid_is_an_error() {
        assert!(gain_smoothness("x", &[curve(100.0, |_| 0.0, 40.0)]).is_err());
        let narrow: Vec<GainCurve> = (0..3).map(|i| curve(100.0 + i as f64, |_| 0.0, 1.0)).collect();
        assert!(gain_smoothness("x", &narrow).is_err());
    }
}
