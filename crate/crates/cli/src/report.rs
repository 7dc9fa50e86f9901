use std::path::Path;

use modresp_core::dsp::median;
use modresp_core::metrics::{MetricsRecord, SmoothnessRecord};
use modresp_core::results::{map_csv, millihertz_dir, smoothness_by_extractor, smoothness_csv, ResponseFile};

use crate::run_dir::{self, LoadedRun};
use crate::svg::{Document, Scale};
use crate::{write_file, CliError};

pub struct ReportOutcome {
    pub plots: usize,
    /// Missing or unreadable responses.
    pub problems: Vec<String>,
    pub warnings: Vec<String>,
}

pub fn load_nonempty(run: &Path) -> Result<LoadedRun, CliError> {
    let loaded = run_dir::load(run).map_err(|e| CliError::Usage(format!("cannot read run {}: {e}", run.display())))?;
    if loaded.files.is_empty() {
        return Err(CliError::Usage(format!("no response.json found under {}", run.display())));
    }
    Ok(loaded)
}

fn describe(loaded: &LoadedRun) -> Vec<String> {
    loaded
        .problems
        .iter()
        .map(|(path, e)| format!("{}: {e}", path.display()))
        .collect()
}

/// Per-cell plots plus the map outputs.
pub fn report(run: &Path) -> Result<ReportOutcome, CliError> {
    let loaded = load_nonempty(run)?;
    for file in &loaded.files {
        let dir = run.join(&file.extractor_id).join(millihertz_dir(file.carrier_f0_hz));
        write_file(&dir.join("response.svg"), &crate::svg::response_plot(file))?;
    }
    Ok(ReportOutcome {
        plots: loaded.files.len(),
        problems: describe(&loaded),
        warnings: write_map(run, &loaded.files)?,
    })
}

pub fn map(run: &Path) -> Result<ReportOutcome, CliError> {
    let loaded = load_nonempty(run)?;
    Ok(ReportOutcome {
        plots: 0,
        problems: describe(&loaded),
        warnings: write_map(run, &loaded.files)?,
    })
}

/// Writes map.csv, smoothness.csv and map.svg; returns the extractors whose
/// smoothness could not be computed.
fn write_map(run: &Path, files: &[ResponseFile]) -> Result<Vec<String>, CliError> {
    let records: Vec<MetricsRecord> = files.iter().filter_map(ResponseFile::record).collect();
    write_file(&run.join("map.csv"), &map_csv(&records))?;
    let mut smooth = Vec::new();
    let mut notes = Vec::new();
    for (id, result) in smoothness_by_extractor(files) {
        match result {
            Ok(r) => smooth.push(r),
            Err(e) => notes.push(format!("smoothness of {id}: {e}")),
        }
    }
    write_file(&run.join("smoothness.csv"), &smoothness_csv(&smooth))?;
    write_file(&run.join("map.svg"), &map_plot(&records, &smooth))?;
    Ok(notes)
}

struct Point {
    label: String,
    x: f64,
    y: f64,
}

/// Median bw and SNR of each extractor over its grid.
fn performance_points(records: &[MetricsRecord]) -> Vec<Point> {
    let mut order: Vec<&str> = Vec::new();
    for r in records {
        if !order.contains(&r.extractor_id.as_str()) {
            order.push(&r.extractor_id);
        }
    }
    order
        .into_iter()
        .filter_map(|id| {
            let mine: Vec<&MetricsRecord> = records.iter().filter(|r| r.extractor_id == id).collect();
            let bw: Vec<f64> = mine.iter().map(|r| r.bw_hz).collect();
            let snr: Vec<f64> = mine.iter().map(|r| r.snr_db).collect();
            Some(Point {
                label: id.to_string(),
                x: median(&bw)?,
                y: median(&snr)?,
            })
        })
        .collect()
}

const PALETTE: [&str; 8] = ["#1f5fbf", "#c62828", "#2e7d32", "#d9a400", "#6a1b9a", "#00838f", "#ef6c00", "#5d4037"];

fn scatter(doc: &mut Document, x0: f64, title: &str, x_label: &str, y_label: &str, points: &[Point]) {
    let (y0, w, h) = (50.0, 300.0, 300.0);
    doc.rect(x0, y0, w, h, "none", "#444444");
    doc.text(x0 + w / 2.0, y0 - 12.0, 12.0, "middle", title);
    doc.text(x0 + w / 2.0, y0 + h + 34.0, 11.0, "middle", x_label);
    doc.text(x0 - 40.0, y0 - 4.0, 11.0, "start", y_label);
    let xs = Scale::around(&points.iter().map(|p| p.x).collect::<Vec<_>>());
    let ys = Scale::around(&points.iter().map(|p| p.y).collect::<Vec<_>>());
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = xs.lo + t * (xs.hi - xs.lo);
        let yv = ys.lo + t * (ys.hi - ys.lo);
        let x = x0 + t * w;
        let y = y0 + h - t * h;
        doc.line((x, y0), (x, y0 + h), "#dddddd", 0.5, false);
        doc.line((x0, y), (x0 + w, y), "#dddddd", 0.5, false);
        doc.text(x, y0 + h + 14.0, 9.0, "middle", &format!("{xv:.2}"));
        doc.text(x0 - 4.0, y + 3.0, 9.0, "end", &format!("{yv:.2}"));
    }
    for (i, p) in points.iter().enumerate() {
        let x = xs.map(p.x, x0, w);
        let y = y0 + h - ys.map(p.y, 0.0, h);
        doc.circle(x, y, 4.0, PALETTE[i % PALETTE.len()]);
        doc.text(x + 6.0, y - 6.0, 9.0, "start", &p.label);
    }
}

pub fn map_plot(records: &[MetricsRecord], smooth: &[SmoothnessRecord]) -> String {
    let mut doc = Document::new(820.0, 420.0);
    let performance = performance_points(records);
    scatter(&mut doc, 70.0, "Bandwidth and SNR (median over f0)", "bw (Hz)", "SNR (dB)", &performance);
    let smoothness: Vec<Point> = smooth
        .iter()
        .map(|r| Point {
            label: r.extractor_id.clone(),
            x: r.sd_gain_fundfreq_db,
            y: r.sd_gain_modfreq_db,
        })
        .collect();
    scatter(
        &mut doc,
        480.0,
        "Gain difference SDs",
        "SD along f0 (dB)",
        "SD along fm (dB)",
        &smoothness,
    );
    doc.finish()
}
