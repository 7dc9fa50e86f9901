use std::collections::BTreeSet;
use std::path::Path;

use modresp_core::results::{millihertz_dir, ResponseFile};

use crate::report::load_nonempty;
use crate::run_dir::FRAMES;
use crate::svg::{response_axes, response_curves, Area, Document};
use crate::{write_file, CliError};

const PANEL_W: f64 = 240.0;
const PANEL_H: f64 = 170.0;

pub struct FramesOutcome {
    pub frames: usize,
    pub warnings: Vec<String>,
}

fn key(file: &ResponseFile) -> u64 {
    millihertz_dir(file.carrier_f0_hz).parse().expect("integer millihertz")
}

/// One frame per fundamental shared by every extractor, panels in
/// extractor order on a `cols` x `rows` grid (more rows if needed).
pub fn frames(run: &Path, cols: usize, rows: usize) -> Result<FramesOutcome, CliError> {
    if cols == 0 || rows == 0 {
        return Err(CliError::Usage("the panel grid needs at least one row and column".into()));
    }
    let loaded = load_nonempty(run)?;
    let mut ids: Vec<&str> = Vec::new();
    for f in &loaded.files {
        if !ids.contains(&f.extractor_id.as_str()) {
            ids.push(&f.extractor_id);
        }
    }
    let grids: Vec<BTreeSet<u64>> = ids
        .iter()
        .map(|id| loaded.files.iter().filter(|f| f.extractor_id == *id).map(key).collect())
        .collect();
    let common: BTreeSet<u64> = grids.iter().skip(1).fold(grids[0].clone(), |acc, g| acc.intersection(g).copied().collect());
    let mut warnings: Vec<String> = loaded
        .problems
        .iter()
        .map(|(p, e)| format!("{}: {e}", p.display()))
        .collect();
    if grids.iter().any(|g| g.len() != common.len()) {
        warnings.push(format!(
            "extractors cover different f0 grids; rendering the {} shared points",
            common.len()
        ));
    }

    let rows = rows.max(ids.len().div_ceil(cols));
    let dir = run.join(FRAMES);
    std::fs::create_dir_all(&dir)?;
    for (i, k) in common.iter().enumerate() {
        let panels: Vec<&ResponseFile> = ids
            .iter()
            .map(|id| {
                loaded
                    .files
                    .iter()
                    .find(|f| f.extractor_id == *id && key(f) == *k)
                    .expect("point is shared by every extractor")
            })
            .collect();
        let svg = frame(&panels, *k as f64 / 1000.0, cols, rows);
        write_file(&dir.join(format!("frame_{:04}.svg", i + 1)), &svg)?;
    }
    Ok(FramesOutcome {
        frames: common.len(),
        warnings,
    })
}

fn frame(panels: &[&ResponseFile], f0: f64, cols: usize, rows: usize) -> String {
    let mut doc = Document::new(cols as f64 * PANEL_W, rows as f64 * PANEL_H + 30.0);
    doc.text(
        cols as f64 * PANEL_W / 2.0,
        20.0,
        14.0,
        "middle",
        &format!("fundamental frequency {f0:.2} Hz"),
    );
    for slot in 0..cols * rows {
        let (r, c) = (slot / cols, slot % cols);
        let area = Area {
            x: c as f64 * PANEL_W + 36.0,
            y: r as f64 * PANEL_H + 30.0 + 18.0,
            w: PANEL_W - 48.0,
            h: PANEL_H - 44.0,
        };
        match panels.get(slot) {
            Some(file) => {
                response_axes(&mut doc, &area, &file.extractor_id, true);
                response_curves(&mut doc, &area, file);
            }
            None => doc.rect(area.x, area.y, area.w, area.h, "none", "#eeeeee"),
        }
    }
    doc.finish()
}
