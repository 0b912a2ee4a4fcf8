//! End-to-end runs through the orchestration layer on tiny plates.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use dpcp::config::{Preset, SimulationConfig};
use dpcp::fem::Simulation;
use dpcp::postprocess::{read_curves, Snapshot, CURVE_HEADER};
use dpcp::run::{run, run_study, study_dir, RunOptions, CHECKPOINT_FILE, CURVES_FILE, MANIFEST_FILE};

fn tiny() -> SimulationConfig {
    let mut c = Preset::Desk.config();
    c.geometry.nx = 16;
    c.geometry.ny = 16;
    c.loading.elongation = 0.008;
    c
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE)).unwrap()).unwrap()
}

#[test]
fn zero_step_run_writes_manifest_and_initial_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let summary = run(&tiny(), dir.path(), &RunOptions {
        max_steps: Some(0),
        threads: Some(1),
    })
    .unwrap();
    assert_eq!(summary.steps, 0);
    assert!(summary.curves.is_empty());
    let m = manifest(dir.path());
    assert_eq!(m["status"], "completed");
    assert_eq!(m["steps"], 0);
    let snapshots: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("snapshot_"))
        .collect();
    assert_eq!(snapshots.len(), 1);
    let snap = Snapshot::read(&snapshots[0].path()).unwrap();
    assert!(snap.field("sigma_yy").unwrap().iter().all(|&v| v == 0.0));
}

#[test]
fn manifest_hashes_every_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = tiny();
    config.run.snapshot_interval = 5;
    config.run.checkpoint_interval = 10;
    let summary = run(&config, dir.path(), &RunOptions::default()).unwrap();
    assert_eq!(summary.steps, 10);

    let m = manifest(dir.path());
    assert_eq!(m["config_sha256"], config.hash());
    let files = m["files"].as_array().unwrap();
    let listed: Vec<&str> = files.iter().map(|f| f["path"].as_str().unwrap()).collect();
    for name in [CURVES_FILE, CHECKPOINT_FILE, "config.toml", "microstructure.csv", "snapshot_000010.vtk"] {
        assert!(listed.contains(&name), "{name} missing from {listed:?}");
    }
    for f in files {
        let bytes = fs::read(dir.path().join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"], hex::encode(Sha256::digest(&bytes)));
    }
    let on_disk = fs::read_dir(dir.path()).unwrap().count();
    assert_eq!(on_disk, files.len() + 1);

    let rows = read_curves(&dir.path().join(CURVES_FILE)).unwrap();
    assert_eq!(rows, summary.curves);
    let header = fs::read_to_string(dir.path().join(CURVES_FILE)).unwrap();
    assert_eq!(header.lines().next().unwrap(), CURVE_HEADER.join(","));
}

#[test]
fn curves_do_not_depend_on_worker_count() {
    let config = tiny();
    let read = |threads| {
        let dir = tempfile::tempdir().unwrap();
        run(&config, dir.path(), &RunOptions {
            max_steps: None,
            threads: Some(threads),
        })
        .unwrap();
        fs::read(dir.path().join(CURVES_FILE)).unwrap()
    };
    let one = read(1);
    assert_eq!(one, read(3));
    assert_eq!(one, read(1));
}

#[test]
fn resuming_from_a_checkpoint_matches_an_uninterrupted_run() {
    let config = tiny();
    let ms = dpcp::run::build_microstructure(&config).unwrap();
    let mut straight = dpcp::run::build_simulation(&config, &ms);
    let mut first = dpcp::run::build_simulation(&config, &ms);
    for _ in 0..4 {
        first.step().unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.bin");
    first.write_checkpoint(&path).unwrap();
    let mut resumed = Simulation::read_checkpoint(&path, config.phase_models(), config.step_settings()).unwrap();
    while !straight.is_finished() {
        straight.step().unwrap();
    }
    while !resumed.is_finished() {
        resumed.step().unwrap();
    }
    assert_eq!(straight.step, resumed.step);
    assert_eq!(straight.top_force, resumed.top_force);
    assert_eq!(straight.mesh.coords, resumed.mesh.coords);
}

#[test]
fn study_blocks_share_the_step_grid() {
    let root = tempfile::tempdir().unwrap();
    let opts = RunOptions {
        max_steps: Some(3),
        threads: Some(1),
    };
    let report = run_study(&tiny(), &[15.0, 7.5], root.path(), &opts).unwrap();
    assert_eq!(report.runs.len(), 2);
    assert!(study_dir(root.path(), 7.5).join(MANIFEST_FILE).exists());

    let mut reader = csv::Reader::from_path(&report.comparison_path).unwrap();
    let keys: Vec<(String, String)> = reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].to_string(), r[1].to_string())
        })
        .collect();
    let expected: Vec<(String, String)> = ["15", "7.5"]
        .iter()
        .flat_map(|d| (1..=3).map(move |s| (d.to_string(), s.to_string())))
        .collect();
    assert_eq!(keys, expected);
    assert!(root.path().join("trends.txt").exists());
}

#[test]
fn single_grain_size_study_degenerates_to_one_block() {
    let root = tempfile::tempdir().unwrap();
    let opts = RunOptions {
        max_steps: Some(2),
        threads: Some(1),
    };
    let report = run_study(&tiny(), &[15.0], root.path(), &opts).unwrap();
    assert_eq!(report.runs.len(), 1);
    let text = fs::read_to_string(&report.comparison_path).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(run_study(&tiny(), &[], root.path(), &opts).is_err());
}
