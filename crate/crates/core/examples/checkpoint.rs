//! Stops a run halfway, saves a checkpoint, restores it and finishes; the
//! final reaction force matches an uninterrupted run exactly.

use dpcp::config::Preset;
use dpcp::fem::Simulation;
use dpcp::run::{build_microstructure, build_simulation};

fn main() -> dpcp::Result<()> {
    let mut config = Preset::Desk.config();
    config.geometry.nx = 16;
    config.geometry.ny = 16;
    config.loading.elongation = 0.1;
    let ms = build_microstructure(&config)?;

    let mut straight = build_simulation(&config, &ms);
    while !straight.is_finished() {
        straight.step()?;
    }

    let mut first = build_simulation(&config, &ms);
    while first.step < first.program.n_steps / 2 {
        first.step()?;
    }
    let path = std::env::temp_dir().join("dpcp-example-checkpoint.bin");
    first.write_checkpoint(&path)?;
    let mut resumed = Simulation::read_checkpoint(&path, config.phase_models(), config.step_settings())?;
    while !resumed.is_finished() {
        resumed.step()?;
    }
    println!(
        "uninterrupted {:.6} N/m, resumed at step {} {:.6} N/m",
        straight.top_force,
        first.step,
        resumed.top_force
    );
    Ok(())
}
