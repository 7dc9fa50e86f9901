//! Run directory layout: `manifest.json`, `calibration/`, `failures.json`
//! and one `<extractor>/<f0 in mHz>/` directory per cell.

use std::path::{Path, PathBuf};

use modresp_core::capricep::CapricepSetManifest;
use modresp_core::results::ResponseFile;
use modresp_core::synth::VfoConfig;
use modresp_core::testbench::SetupConfig;
use serde::{Deserialize, Serialize};

pub const MANIFEST: &str = "manifest.json";
pub const FAILURES: &str = "failures.json";
pub const CALIBRATION: &str = "calibration";
pub const FRAMES: &str = "frames";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub f0_hz: f64,
    pub dir: String,
    pub vfo: VfoConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub pairs: Vec<usize>,
    pub n0: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub started_at: String,
    pub setup: SetupConfig,
    pub set: CapricepSetManifest,
    pub selection: SelectionSummary,
    pub extractors: Vec<String>,
    pub extractor_ids: Vec<String>,
    pub grid: Vec<GridPoint>,
    pub keep_audio: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub extractor_id: String,
    pub f0_hz: f64,
    pub error: String,
}

impl RunManifest {
    pub fn read(run: &Path) -> Option<Self> {
        let text = std::fs::read_to_string(run.join(MANIFEST)).ok()?;
        serde_json::from_str(&text).ok()
    }
}

/// Responses found in a run, in extractor then ascending-f0 order.
pub struct LoadedRun {
    pub files: Vec<ResponseFile>,
    /// Cells whose response.json is missing or unreadable.
    pub problems: Vec<(PathBuf, String)>,
}

fn subdirs(dir: &Path) -> std::io::Result<Vec<String>> {
    let mut names: Vec<String> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().map(|t| t.is_dir()).unwrap_or(false))
        .filter_map(|e| e.file_name().into_string().ok())
        .collect();
    names.sort();
    Ok(names)
}

pub fn load(run: &Path) -> std::io::Result<LoadedRun> {
    let manifest = RunManifest::read(run);
    let mut extractors: Vec<String> = manifest.as_ref().map(|m| m.extractor_ids.clone()).unwrap_or_default();
    for name in subdirs(run)? {
        if name != CALIBRATION && name != FRAMES && !extractors.contains(&name) {
            extractors.push(name);
        }
    }
    let mut files = Vec::new();
    let mut problems = Vec::new();
    for id in &extractors {
        let dir = run.join(id);
        let mut cells: Vec<(u64, String)> = match subdirs(&dir) {
            Ok(names) => names.into_iter().filter_map(|n| n.parse().ok().map(|k| (k, n))).collect(),
            Err(e) => {
                problems.push((dir, e.to_string()));
                continue;
            }
        };
        if let Some(m) = &manifest {
            for point in &m.grid {
                if let Ok(k) = point.dir.parse::<u64>() {
                    if !cells.iter().any(|(c, _)| *c == k) {
                        cells.push((k, point.dir.clone()));
                    }
                }
            }
        }
        cells.sort();
        for (_, name) in cells {
            let path = dir.join(&name).join("response.json");
            match ResponseFile::read(&path) {
                Ok(f) => files.push(f),
                Err(e) => problems.push((path, e.to_string())),
            }
        }
    }
    Ok(LoadedRun { files, problems })
}
