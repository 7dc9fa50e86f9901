use std::path::{Path, PathBuf};
use std::sync::Mutex;

use modresp_core::extractors::ExtractorSpec;
use modresp_core::results::millihertz_dir;
use modresp_core::synth::{f0_grid, VfoConfig};
use modresp_core::testbench::{SetupConfig, Testbench};
use rayon::prelude::*;

use crate::args::MeasureArgs;
use crate::run_dir::{Failure, GridPoint, RunManifest, SelectionSummary, CALIBRATION, FAILURES, MANIFEST};
use crate::{write_file, CliError};

pub struct MeasureOutcome {
    pub run_dir: PathBuf,
    pub cells: usize,
    pub failures: Vec<Failure>,
}

pub fn setup_from(args: &MeasureArgs) -> SetupConfig {
    let mut setup = SetupConfig {
        seed: args.seed,
        candidates: args.candidates,
        depth_cents: args.depth_cents,
        ..SetupConfig::default()
    }
    .with_interval(args.nu);
    setup.analysis.decimation = args.decimation;
    setup.analysis.window = args.window.into();
    setup.analysis.threshold_db = args.threshold_db;
    setup
}

fn choose_run_dir(args: &MeasureArgs) -> PathBuf {
    if let Some(dir) = &args.run_dir {
        return dir.clone();
    }
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ").to_string();
    let mut dir = args.out.join(&stamp);
    let mut n = 1;
    while dir.exists() {
        dir = args.out.join(format!("{stamp}-{n}"));
        n += 1;
    }
    dir
}

fn check_specs(specs: &[ExtractorSpec]) -> Result<Vec<String>, CliError> {
    let mut ids: Vec<String> = Vec::new();
    for spec in specs {
        let id = spec.id();
        if ids.contains(&id) {
            return Err(CliError::Usage(format!("extractor `{id}` is given twice")));
        }
        ids.push(id);
    }
    Ok(ids)
}

fn write_calibration(dir: &Path, bench: &Testbench) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    write_file(&dir.join("set.json"), &json(&bench.set.manifest())?)?;
    write_file(&dir.join("response.json"), &json(&bench.calibration)?)?;
    let mut sd = String::from("pair,sd_db,selected\n");
    for (j, v) in bench.selection.sd_curve_db.iter().enumerate() {
        sd.push_str(&format!("{j},{v},{}\n", u8::from(bench.selection.pairs.contains(&j))));
    }
    write_file(&dir.join("sd_curve.csv"), &sd)
}

fn json<T: serde::Serialize>(value: &T) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

fn run_cell(bench: &Testbench, spec: &ExtractorSpec, f0: f64, dir: &Path, keep_audio: bool) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
    let result = bench.measure(spec, f0, Some(dir), keep_audio);
    if !keep_audio {
        let _ = std::fs::remove_file(dir.join("audio.wav"));
    }
    let file = result.map_err(|e| e.to_string())?.file();
    let text = file.to_json().map_err(|e| e.to_string())?;
    std::fs::write(dir.join("response.json"), text).map_err(|e| e.to_string())?;
    std::fs::write(dir.join("response.csv"), file.to_csv()).map_err(|e| e.to_string())
}

pub fn measure(args: &MeasureArgs) -> Result<MeasureOutcome, CliError> {
    let ids = check_specs(&args.extractors)?;
    if !(args.f0_min > 0.0 && args.f0_max >= args.f0_min) || args.steps_per_octave == 0 {
        return Err(CliError::Usage("the f0 grid needs 0 < --f0-min <= --f0-max and a positive step".into()));
    }
    let grid = f0_grid(args.f0_min, args.f0_max, args.steps_per_octave);
    let setup = setup_from(args);
    setup.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    for &f0 in &grid {
        VfoConfig::new(f0, args.depth_cents).validate().map_err(|e| CliError::Usage(e.to_string()))?;
    }

    let run = choose_run_dir(args);
    std::fs::create_dir_all(&run)
        .map_err(|e| CliError::Usage(format!("cannot create run directory {}: {e}", run.display())))?;
    let started_at = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let bench = pool.install(|| Testbench::new(setup.clone())).map_err(|e| CliError::Internal(e.to_string()))?;

    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        started_at,
        setup,
        set: bench.set.manifest(),
        selection: SelectionSummary {
            pairs: bench.selection.pairs.clone(),
            n0: bench.selection.n0,
        },
        extractors: args.extractors.iter().map(ToString::to_string).collect(),
        extractor_ids: ids.clone(),
        grid: grid
            .iter()
            .map(|&f0| GridPoint {
                f0_hz: f0,
                dir: millihertz_dir(f0),
                vfo: VfoConfig::new(f0, args.depth_cents),
            })
            .collect(),
        keep_audio: args.keep_audio,
    };
    write_file(&run.join(MANIFEST), &json(&manifest)?)?;
    write_calibration(&run.join(CALIBRATION), &bench)?;

    let cells: Vec<(usize, &ExtractorSpec, f64)> = args
        .extractors
        .iter()
        .enumerate()
        .flat_map(|(i, spec)| grid.iter().map(move |&f0| (i, spec, f0)))
        .collect();
    let failures: Mutex<Vec<(usize, Failure)>> = Mutex::new(Vec::new());
    pool.install(|| {
        cells.par_iter().for_each(|&(i, spec, f0)| {
            let dir = run.join(&ids[i]).join(millihertz_dir(f0));
            if let Err(error) = run_cell(&bench, spec, f0, &dir, args.keep_audio) {
                let failure = Failure {
                    extractor_id: ids[i].clone(),
                    f0_hz: f0,
                    error,
                };
                failures.lock().expect("failure list").push((i, failure));
            }
        });
    });
    let mut failures = failures.into_inner().expect("failure list");
    failures.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.f0_hz.total_cmp(&b.1.f0_hz)));
    let failures: Vec<Failure> = failures.into_iter().map(|(_, f)| f).collect();
    write_file(&run.join(FAILURES), &json(&failures)?)?;
    Ok(MeasureOutcome {
        run_dir: run,
        cells: cells.len(),
        failures,
    })
}
