//! Minimal SVG writer with fixed number formatting so reruns are
//! byte-identical.

use std::fmt::Write as _;

use modresp_core::results::ResponseFile;

pub const GAIN_RANGE_DB: (f64, f64) = (-80.0, 10.0);
pub const FREQ_RANGE_HZ: (f64, f64) = (0.5, 200.0);

pub const GAIN_COLOR: &str = "#1f5fbf";
pub const NONLTI_COLOR: &str = "#d9a400";
pub const RANDOM_COLOR: &str = "#c62828";

pub struct Document {
    body: String,
    width: f64,
    height: f64,
}

impl Document {
    pub fn new(width: f64, height: f64) -> Self {
        Self {
            body: String::new(),
            width,
            height,
        }
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, stroke: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}" stroke="{stroke}"/>"#
        );
    }

    pub fn line(&mut self, a: (f64, f64), b: (f64, f64), stroke: &str, width: f64, dash: bool) {
        let dash = if dash { r#" stroke-dasharray="4 3""# } else { "" };
        let _ = writeln!(
            self.body,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{stroke}" stroke-width="{width:.2}"{dash}/>"#,
            a.0, a.1, b.0, b.1
        );
    }

    pub fn polyline(&mut self, points: &[(f64, f64)], stroke: &str) {
        if points.len() < 2 {
            return;
        }
        let mut coords = String::new();
        for (i, (x, y)) in points.iter().enumerate() {
            if i > 0 {
                coords.push(' ');
            }
            let _ = write!(coords, "{x:.2},{y:.2}");
        }
        let _ = writeln!(
            self.body,
            r#"<polyline points="{coords}" fill="none" stroke="{stroke}" stroke-width="1.20"/>"#
        );
    }

    pub fn circle(&mut self, x: f64, y: f64, r: f64, fill: &str) {
        let _ = writeln!(self.body, r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r:.2}" fill="{fill}"/>"#);
    }

    pub fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, content: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" font-family="sans-serif" font-size="{size:.1}" text-anchor="{anchor}">{}</text>"#,
            escape(content)
        );
    }

    pub fn finish(self) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

pub fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Plot area in document coordinates.
#[derive(Debug, Clone, Copy)]
pub struct Area {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Area {
    fn freq_x(&self, f: f64) -> f64 {
        let (lo, hi) = FREQ_RANGE_HZ;
        self.x + self.w * (f / lo).ln() / (hi / lo).ln()
    }

    fn gain_y(&self, db: f64) -> f64 {
        let (lo, hi) = GAIN_RANGE_DB;
        let db = db.clamp(lo, hi);
        self.y + self.h * (hi - db) / (hi - lo)
    }
}

fn curve(area: &Area, freq: &[f64], values: &[f64]) -> Vec<(f64, f64)> {
    freq.iter()
        .zip(values)
        .filter(|(f, v)| **f >= FREQ_RANGE_HZ.0 && **f <= FREQ_RANGE_HZ.1 && v.is_finite())
        .map(|(f, v)| (area.freq_x(*f), area.gain_y(*v)))
        .collect()
}

/// Axes, grid and labels of a response panel.
pub fn response_axes(doc: &mut Document, area: &Area, title: &str, small: bool) {
    let font = if small { 8.0 } else { 11.0 };
    doc.rect(area.x, area.y, area.w, area.h, "none", "#444444");
    for f in [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0] {
        let x = area.freq_x(f);
        doc.line((x, area.y), (x, area.y + area.h), "#dddddd", 0.5, false);
        doc.text(x, area.y + area.h + font + 2.0, font, "middle", &format!("{f}"));
    }
    let mut db = GAIN_RANGE_DB.0;
    while db <= GAIN_RANGE_DB.1 {
        let y = area.gain_y(db);
        doc.line((area.x, y), (area.x + area.w, y), "#dddddd", 0.5, false);
        doc.text(area.x - 3.0, y + font / 3.0, font, "end", &format!("{db:.0}"));
        db += 10.0;
    }
    doc.text(area.x + area.w / 2.0, area.y - 4.0, font + 1.0, "middle", title);
    if !small {
        doc.text(area.x + area.w / 2.0, area.y + area.h + 2.0 * font + 6.0, font, "middle", "modulation frequency (Hz)");
        doc.text(area.x - 30.0, area.y - 4.0, font, "start", "dB");
    }
}

/// Gain, non-LTI and random curves with the bandwidth and TD markers.
pub fn response_curves(doc: &mut Document, area: &Area, file: &ResponseFile) {
    doc.polyline(&curve(area, &file.freq_hz, &file.random_db), RANDOM_COLOR);
    doc.polyline(&curve(area, &file.freq_hz, &file.nonlti_db), NONLTI_COLOR);
    doc.polyline(&curve(area, &file.freq_hz, &file.gain_db), GAIN_COLOR);
    if let Some(m) = file.metrics {
        if m.bw_hz >= FREQ_RANGE_HZ.0 && m.bw_hz <= FREQ_RANGE_HZ.1 {
            let x = area.freq_x(m.bw_hz);
            doc.line((x, area.y), (x, area.y + area.h), "#000000", 1.0, true);
        }
        let y = area.gain_y(m.td_db);
        doc.line((area.x, y), (area.x + area.w, y), RANDOM_COLOR, 1.0, true);
    }
}

/// A standalone response plot of one cell.
pub fn response_plot(file: &ResponseFile) -> String {
    let mut doc = Document::new(640.0, 420.0);
    let area = Area {
        x: 60.0,
        y: 40.0,
        w: 550.0,
        h: 320.0,
    };
    let title = format!("{} at {:.2} Hz", file.extractor_id, file.carrier_f0_hz);
    response_axes(&mut doc, &area, &title, false);
    response_curves(&mut doc, &area, file);
    let summary = match file.metrics {
        Some(m) => format!("bw {:.1} Hz, TD {:.1} dB, SNR {:.1} dB", m.bw_hz, m.td_db, m.snr_db),
        None => file.metrics_error.clone().unwrap_or_default(),
    };
    doc.text(area.x + 6.0, area.y + 14.0, 10.0, "start", &summary);
    let legend = [("LTI gain", GAIN_COLOR), ("non-LTI", NONLTI_COLOR), ("random", RANDOM_COLOR)];
    for (i, (name, color)) in legend.iter().enumerate() {
        let y = area.y + 30.0 + 13.0 * i as f64;
        let x = area.x + area.w - 90.0;
        doc.line((x, y - 3.0), (x + 16.0, y - 3.0), color, 2.0, false);
        doc.text(x + 20.0, y, 10.0, "start", name);
    }
    doc.finish()
}

/// Linear axis mapping with a little headroom around the data.
#[derive(Debug, Clone, Copy)]
pub struct Scale {
    pub lo: f64,
    pub hi: f64,
}

impl Scale {
    pub fn around(values: &[f64]) -> Self {
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        if finite.is_empty() {
            return Self { lo: 0.0, hi: 1.0 };
        }
        let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let pad = if hi > lo { 0.1 * (hi - lo) } else { lo.abs().max(1.0) * 0.1 };
        Self { lo: lo - pad, hi: hi + pad }
    }

    pub fn map(&self, v: f64, start: f64, len: f64) -> f64 {
        start + len * (v - self.lo) / (self.hi - self.lo)
    }
}
