//! On-disk result formats: per-cell `response.json` / `response.csv` and the
//! run-level `map.csv` / `smoothness.csv` tables.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analyzer::{ResponseDecomposition, WindowKind};
use crate::error::{Error, Result};
use crate::metrics::{self, GainCurve, MetricsRecord, SmoothnessRecord};

/// Summary metrics stored with each response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub bw_hz: f64,
    pub plateau_gain_db: f64,
    pub band_edge_limited: bool,
    pub td_db: f64,
    pub lti_power_db: f64,
    pub snr_db: f64,
}

/// Contents of `response.json`. The spectra cover the unmasked band only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseFile {
    pub extractor_id: String,
    pub carrier_f0_hz: f64,
    pub freq_hz: Vec<f64>,
    pub gain_db: Vec<f64>,
    pub random_db: Vec<f64>,
    pub nonlti_db: Vec<f64>,
    pub masked_above_hz: f64,
    pub n_pairs: usize,
    pub n_short_responses: usize,
    pub n_extended_responses: usize,
    pub pair_indices: Vec<usize>,
    pub window: WindowKind,
    pub compensation_db: f64,
    pub overlap_correction_db: f64,
    pub voiced_fraction: f64,
    pub unvoiced_gaps: usize,
    pub sd_curve_db: Vec<f64>,
    pub metrics: Option<CellMetrics>,
    pub metrics_error: Option<String>,
}

impl ResponseFile {
    /// Builds the file view of a calibrated decomposition and computes its
    /// metrics. A metric failure is recorded rather than returned.
    pub fn new(
        extractor_id: &str,
        carrier_f0_hz: f64,
        response: &ResponseDecomposition,
        voiced_fraction: f64,
        unvoiced_gaps: usize,
        sd_curve_db: Vec<f64>,
    ) -> Self {
        let keep: Vec<usize> = (0..response.freq_hz.len()).filter(|&m| response.usable[m]).collect();
        let pick = |v: &[f64]| keep.iter().map(|&m| v[m]).collect::<Vec<f64>>();
        let mut file = ResponseFile {
            extractor_id: extractor_id.to_string(),
            carrier_f0_hz,
            freq_hz: pick(&response.freq_hz),
            gain_db: pick(&response.gain_db),
            random_db: pick(&response.random_db),
            nonlti_db: pick(&response.nonlti_db),
            masked_above_hz: response.masked_above_hz,
            n_pairs: response.n_pairs,
            n_short_responses: response.n_short_responses,
            n_extended_responses: response.n_extended_responses,
            pair_indices: response.pair_indices.clone(),
            window: response.window,
            compensation_db: response.compensation_db,
            overlap_correction_db: response.overlap_correction_db,
            voiced_fraction,
            unvoiced_gaps,
            sd_curve_db,
            metrics: None,
            metrics_error: None,
        };
        match file.compute_metrics() {
            Ok(m) => file.metrics = Some(m),
            Err(e) => file.metrics_error = Some(e.to_string()),
        }
        file
    }

    /// Recomputes the metrics from the stored spectra.
    pub fn compute_metrics(&self) -> Result<CellMetrics> {
        let bw = metrics::bandwidth(&self.freq_hz, &self.gain_db, self.masked_above_hz)?;
        let d = metrics::total_distortion_and_snr(&self.freq_hz, &self.gain_db, &self.random_db, &self.nonlti_db, bw.bw_hz)?;
        Ok(CellMetrics {
            bw_hz: bw.bw_hz,
            plateau_gain_db: bw.plateau_gain_db,
            band_edge_limited: bw.band_edge_limited,
            td_db: d.td_db,
            lti_power_db: d.lti_power_db,
            snr_db: d.snr_db,
        })
    }

    pub fn record(&self) -> Option<MetricsRecord> {
        self.metrics.map(|m| MetricsRecord {
            extractor_id: self.extractor_id.clone(),
            carrier_f0: self.carrier_f0_hz,
            bw_hz: m.bw_hz,
            td_db: m.td_db,
            snr_db: m.snr_db,
            plateau_gain_db: m.plateau_gain_db,
            lti_power_db: m.lti_power_db,
            voiced_fraction: self.voiced_fraction,
            band_edge_limited: m.band_edge_limited,
        })
    }

    pub fn gain_curve(&self) -> Option<GainCurve> {
        self.metrics.map(|m| GainCurve {
            carrier_f0: self.carrier_f0_hz,
            freq_hz: self.freq_hz.clone(),
            gain_db: self.gain_db.clone(),
            bw_hz: m.bw_hz,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("freq_hz,gain_db,random_db,nonlti_db\n");
        for m in 0..self.freq_hz.len() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                self.freq_hz[m], self.gain_db[m], self.random_db[m], self.nonlti_db[m]
            );
        }
        out
    }
}

/// Directory name of a carrier frequency: integer millihertz.
pub fn millihertz_dir(carrier_f0: f64) -> String {
    format!("{}", (carrier_f0 * 1000.0).round() as u64)
}

pub fn map_csv(records: &[MetricsRecord]) -> String {
    let mut out = String::from("extractor_id,f0_hz,bw_hz,td_db,snr_db\n");
    for r in records {
        let _ = writeln!(out, "{},{},{},{},{}", r.extractor_id, r.carrier_f0, r.bw_hz, r.td_db, r.snr_db);
    }
    out
}

pub fn smoothness_csv(records: &[SmoothnessRecord]) -> String {
    let mut out = String::from("extractor_id,sd_modfreq_db,sd_fundfreq_db\n");
    for r in records {
        let _ = writeln!(out, "{},{},{}", r.extractor_id, r.sd_gain_modfreq_db, r.sd_gain_fundfreq_db);
    }
    out
}

/// Groups responses by extractor (in first-seen order) and computes the
/// smoothness record of each extractor with at least two usable cells.
pub fn smoothness_by_extractor(files: &[ResponseFile]) -> Vec<(String, Result<SmoothnessRecord>)> {
    let mut order: Vec<String> = Vec::new();
    for f in files {
        if !order.contains(&f.extractor_id) {
            order.push(f.extractor_id.clone());
        }
    }
    order
        .into_iter()
        .map(|id| {
            let curves: Vec<GainCurve> = files
                .iter()
                .filter(|f| f.extractor_id == id)
                .filter_map(ResponseFile::gain_curve)
                .collect();
            let record = if curves.is_empty() {
                Err(Error::Metric(format!("no response of {id} has metrics")))
            } else {
                metrics::gain_smoothness(&id, &curves)
            };
            (id, record)
        })
        .collect()
}
