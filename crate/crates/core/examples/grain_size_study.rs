//! Three ferrite grain sizes on the desk preset, merged into one
//! comparison table with the grain-size trend checks.
//!
//! cargo run --release --example grain_size_study -- 2000

use std::path::Path;

use dpcp::config::Preset;
use dpcp::run::{run_study, RunOptions};

fn main() -> dpcp::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let steps = std::env::args().nth(1).map(|s| s.parse().expect("step count"));
    let report = run_study(
        &Preset::Desk.config(),
        &[3.75, 7.5, 15.0],
        Path::new("study-out"),
        &RunOptions {
            max_steps: Some(steps.unwrap_or(300)),
            threads: None,
        },
    )?;
    for check in &report.checks {
        println!("{check}");
    }
    println!("{}", report.comparison_path.display());
    Ok(())
}
