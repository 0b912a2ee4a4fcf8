//! Run orchestration: microstructure, time loop, exports and manifest, plus
//! the multi-grain-size study.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::SimulationConfig;
use crate::error::{Error, Result};
use crate::fem::Simulation;
use crate::microstructure::{generate, Microstructure};
use crate::postprocess::{element_fields, CurveRow, CurveWriter, Snapshot};
use crate::study::{trend_report, TrendCheck};

pub const VERSION: &str = concat!("dpcp-", env!("CARGO_PKG_VERSION"));

pub const CURVES_FILE: &str = "curves.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Stop after this many steps even if the load program continues.
    pub max_steps: Option<usize>,
    /// Overrides `run.threads` from the config.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub steps: usize,
    pub curves: Vec<CurveRow>,
    pub runtime_s: f64,
}

impl RunSummary {
    pub fn final_row(&self) -> Option<&CurveRow> {
        self.curves.last()
    }
}

#[derive(Serialize)]
struct Manifest {
    version: &'static str,
    status: String,
    config_sha256: String,
    steps: usize,
    runtime_s: f64,
    elements: usize,
    files: Vec<ManifestFile>,
}

#[derive(Serialize)]
struct ManifestFile {
    path: String,
    sha256: String,
}

/// Runs `f` on a pool with `threads` workers (0: rayon's default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::ThreadPool(e.to_string()))?;
    Ok(pool.install(f))
}

pub fn build_microstructure(config: &SimulationConfig) -> Result<Microstructure> {
    generate(&config.microstructure_spec())
}

pub fn build_simulation(config: &SimulationConfig, ms: &Microstructure) -> Simulation {
    Simulation::from_microstructure(ms, config.phase_models(), config.load_program(), config.step_settings())
}

/// Writes the microstructure CSV and VTK into `dir`; returns their paths.
pub fn export_microstructure(ms: &Microstructure, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join("microstructure.csv");
    let file = fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    ms.write_csv(file).map_err(|e| Error::format(&csv_path, e.to_string()))?;
    let vtk_path = dir.join("microstructure.vtk");
    Snapshot {
        nx: ms.nx,
        ny: ms.ny,
        spacing: [ms.dx, ms.dy],
        fields: vec![
            ("phase".into(), ms.phase.iter().map(|p| p.index() as f64).collect()),
            ("grain_id".into(), ms.grain_id.iter().map(|&g| g as f64).collect()),
            ("phi_z".into(), ms.orientation.iter().map(|o| o.phi_z).collect()),
        ],
    }
    .export(&vtk_path)?;
    Ok(vec![csv_path, vtk_path])
}

/// Full run into `out_dir`: effective config, microstructure, curves,
/// snapshots, optional checkpoints and a manifest listing every file with
/// its SHA-256. On an aborted step the manifest records the failure and the
/// last checkpoint is left in place.
pub fn run(config: &SimulationConfig, out_dir: &Path, options: &RunOptions) -> Result<RunSummary> {
    let threads = options.threads.unwrap_or(config.run.threads);
    with_threads(threads, || run_inner(config, out_dir, options))?
}

fn run_inner(config: &SimulationConfig, out_dir: &Path, options: &RunOptions) -> Result<RunSummary> {
    let start = Instant::now();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut files = Vec::new();

    let config_path = out_dir.join("config.toml");
    fs::write(&config_path, config.dump()).map_err(|e| Error::io(&config_path, e))?;
    files.push(config_path);

    let ms = build_microstructure(config)?;
    files.extend(export_microstructure(&ms, out_dir)?);
    let mut sim = build_simulation(config, &ms);
    let n_steps = options
        .max_steps
        .map_or(sim.program.n_steps, |m| m.min(sim.program.n_steps));
    log::info!(
        "{} elements, {} steps of {} s, martensite fraction {:.4}",
        sim.n_elements(),
        n_steps,
        sim.program.dt,
        ms.martensite_fraction()
    );

    let snapshot = |sim: &Simulation, files: &mut Vec<PathBuf>| -> Result<()> {
        let path = out_dir.join(format!("snapshot_{:06}.vtk", sim.step));
        Snapshot::from_simulation(sim, &ms.grain_id).export(&path)?;
        files.push(path);
        Ok(())
    };
    snapshot(&sim, &mut files)?;

    let curves_path = out_dir.join(CURVES_FILE);
    let curves_file = fs::File::create(&curves_path).map_err(|e| Error::io(&curves_path, e))?;
    let csv_err = |e: csv::Error| Error::format(&curves_path, e.to_string());
    let mut writer = CurveWriter::new(std::io::BufWriter::new(curves_file)).map_err(csv_err)?;
    files.push(curves_path.clone());

    let mut curves = Vec::with_capacity(n_steps);
    let checkpoint_path = out_dir.join(CHECKPOINT_FILE);
    let mut outcome = Ok(());
    while sim.step < n_steps {
        if let Err(e) = sim.step() {
            log::error!("step {} failed: {e}", sim.step + 1);
            outcome = Err(e);
            break;
        }
        let row = CurveRow::from_fields(&sim, &element_fields(&sim));
        writer.push(&row).map_err(csv_err)?;
        curves.push(row);
        let every = config.run.snapshot_interval;
        if (every > 0 && sim.step.is_multiple_of(every)) || (sim.step == n_steps && (every == 0 || !n_steps.is_multiple_of(every))) {
            snapshot(&sim, &mut files)?;
        }
        let ck = config.run.checkpoint_interval;
        if ck > 0 && sim.step.is_multiple_of(ck) {
            sim.write_checkpoint(&checkpoint_path)?;
        }
        if sim.step.is_multiple_of(100) {
            log::debug!("step {} t = {:.3} s", sim.step, sim.time);
        }
    }
    drop(writer);
    if checkpoint_path.exists() {
        files.push(checkpoint_path);
    }

    let runtime_s = start.elapsed().as_secs_f64();
    write_manifest(config, out_dir, &files, sim.step, runtime_s, sim.n_elements(), &outcome)?;
    outcome?;
    Ok(RunSummary {
        output_dir: out_dir.to_path_buf(),
        steps: sim.step,
        curves,
        runtime_s,
    })
}

fn write_manifest(
    config: &SimulationConfig,
    out_dir: &Path,
    files: &[PathBuf],
    steps: usize,
    runtime_s: f64,
    elements: usize,
    outcome: &Result<()>,
) -> Result<()> {
    let files = files
        .iter()
        .map(|p| {
            let bytes = fs::read(p).map_err(|e| Error::io(p, e))?;
            Ok(ManifestFile {
                path: p
                    .strip_prefix(out_dir)
                    .unwrap_or(p)
                    .to_string_lossy()
                    .into_owned(),
                sha256: hex::encode(Sha256::digest(&bytes)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        version: VERSION,
        status: match outcome {
            Ok(()) => "completed".into(),
            Err(e) => format!("failed: {e}"),
        },
        config_sha256: config.hash(),
        steps,
        runtime_s,
        elements,
        files,
    };
    let path = out_dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Outcome of a grain-size study.
#[derive(Debug)]
pub struct StudyReport {
    pub runs: Vec<(f64, Result<RunSummary>)>,
    pub comparison_path: PathBuf,
    pub checks: Vec<TrendCheck>,
}

/// Directory name for one grain size, e.g. `dF_3.75`.
pub fn study_dir(root: &Path, d_ferrite: f64) -> PathBuf {
    root.join(format!("dF_{d_ferrite}"))
}

/// Runs every grain size with the same seed and load program, merges the
/// curves into `comparison.csv` and evaluates the trend checks on the
/// grain sizes that completed.
pub fn run_study(base: &SimulationConfig, d_list: &[f64], root: &Path, options: &RunOptions) -> Result<StudyReport> {
    if d_list.is_empty() {
        return Err(Error::Microstructure("grain-size list is empty".into()));
    }
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let mut runs = Vec::new();
    for &d in d_list {
        let mut config = base.clone();
        config.microstructure.d_ferrite = d;
        log::info!("study: d_F = {d} um");
        let result = run(&config, &study_dir(root, d), options);
        if let Err(e) = &result {
            log::error!("study: d_F = {d} um failed: {e}");
        }
        runs.push((d, result));
    }

    let comparison_path = root.join("comparison.csv");
    write_comparison(&comparison_path, &runs)?;
    let completed: Vec<(f64, &[CurveRow])> = runs
        .iter()
        .filter_map(|(d, r)| r.as_ref().ok().map(|s| (*d, s.curves.as_slice())))
        .collect();
    let checks = trend_report(&completed);
    let report_path = root.join("trends.txt");
    let text: String = checks.iter().map(|c| format!("{c}\n")).collect();
    fs::write(&report_path, text).map_err(|e| Error::io(&report_path, e))?;
    Ok(StudyReport {
        runs,
        comparison_path,
        checks,
    })
}

fn write_comparison(path: &Path, runs: &[(f64, Result<RunSummary>)]) -> Result<()> {
    let err = |e: csv::Error| Error::format(path, e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    let mut header = vec!["d_F_um"];
    header.extend(crate::postprocess::CURVE_HEADER);
    w.write_record(&header).map_err(err)?;
    for (d, run) in runs {
        let Ok(summary) = run else { continue };
        for row in &summary.curves {
            let mut rec = vec![d.to_string(), row.step.to_string()];
            rec.extend(row.values().iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
