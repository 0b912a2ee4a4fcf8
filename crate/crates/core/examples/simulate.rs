//! Short desk-scale plate run: writes curves, snapshots and a manifest to
//! `simulate-out/` and prints the last curve row.
//!
//! cargo run --release --example simulate -- 200

use std::path::Path;

use dpcp::config::Preset;
use dpcp::run::{run, RunOptions};

fn main() -> dpcp::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let steps = std::env::args().nth(1).map(|s| s.parse().expect("step count"));
    let mut config = Preset::Desk.config();
    config.run.snapshot_interval = 100;
    let summary = run(&config, Path::new("simulate-out"), &RunOptions {
        max_steps: Some(steps.unwrap_or(200)),
        threads: None,
    })?;
    if let Some(r) = summary.final_row() {
        println!(
            "step {} strain {:.4}: sigma_yy {:.1} MPa (F {:.1}, M {:.1}), eps_eq F {:.4} M {:.4}",
            r.step, r.strain_nominal, r.sigma_yy_mpa, r.sigma_yy_f_mpa, r.sigma_yy_m_mpa, r.eps_eq_f, r.eps_eq_m
        );
    }
    Ok(())
}
