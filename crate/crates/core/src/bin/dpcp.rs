use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dpcp::config::{load_config, Preset, SimulationConfig};
use dpcp::constitutive::{drive_point, read_strain_path, write_point_records, IntegrationPointState, MaterialParams, PhaseModel};
use dpcp::crystal::Orientation;
use dpcp::microstructure::{boundary_length_per_area, Phase};
use dpcp::run::{build_microstructure, export_microstructure, run, run_study, RunOptions};
use dpcp::study::CheckStatus;

/// Crystal-plasticity FE simulation of ferrite/martensite dual-phase steel.
///
/// Relative output directories are placed under $DPCP_OUTPUT_ROOT when set.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// Base profile the config file is layered over.
    #[arg(long, global = true, value_parser = parse_preset)]
    preset: Option<Preset>,

    /// Worker threads (0: all cores). Overrides `run.threads`.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one plate simulation.
    Simulate {
        config: PathBuf,
        /// Output directory (default: `run.output_dir`).
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Stop after this many steps.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Run several ferrite grain sizes and compare them.
    Study {
        config: PathBuf,
        /// Ferrite grain sizes in um.
        #[arg(long = "dF", value_delimiter = ',', required = true)]
        d_ferrite: Vec<f64>,
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Generate the microstructure and print its statistics.
    Microstructure {
        config: PathBuf,
        /// Write microstructure.csv and microstructure.vtk.
        #[arg(long)]
        export: bool,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Drive a single material point along a deformation-rate history.
    PointDriver {
        /// CSV with header t,d_xx,d_yy,d_zz,d_yz,d_xz,d_xy.
        path_file: PathBuf,
        #[arg(long, value_enum, default_value = "ferrite")]
        phase: PhaseArg,
        /// Lattice rotation angles about x, y, z in degrees.
        #[arg(long, value_parser = parse_angles, default_value = "0,0,0")]
        angles: [f64; 3],
        /// Increments per path interval.
        #[arg(long, default_value_t = 200)]
        substeps: usize,
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
        /// Output CSV (default: stdout).
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PhaseArg {
    Ferrite,
    Martensite,
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse()
}

fn parse_angles(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}")))
        .collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| "expected three comma-separated angles".to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            log::error!("{e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> dpcp::Result<ExitCode> {
    let options = |steps| RunOptions {
        max_steps: steps,
        threads: cli.threads,
    };
    match cli.command {
        Command::Simulate { config, output, steps } => {
            let config = load_config(&config, cli.preset)?;
            let out = output.unwrap_or_else(|| config.output_dir());
            let summary = run(&config, &out, &options(steps))?;
            log::info!(
                "{} steps in {:.1} s, results in {}",
                summary.steps,
                summary.runtime_s,
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Study {
            config,
            d_ferrite,
            output,
            steps,
        } => {
            let config = load_config(&config, cli.preset)?;
            let out = output.unwrap_or_else(|| config.output_dir());
            let report = run_study(&config, &d_ferrite, &out, &options(steps))?;
            let mut failed = false;
            for (d, r) in &report.runs {
                match r {
                    Ok(s) => println!("dF = {d}: {} steps", s.steps),
                    Err(e) => {
                        failed = true;
                        println!("dF = {d}: FAILED: {e}");
                    }
                }
            }
            for check in &report.checks {
                println!("{check}");
            }
            println!("comparison table: {}", report.comparison_path.display());
            let trend_fail = report.checks.iter().any(|c| c.status == CheckStatus::Fail);
            Ok(if failed || trend_fail {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Microstructure { config, export, output } => {
            let config = load_config(&config, cli.preset)?;
            let ms = build_microstructure(&config)?;
            println!("grid             {} x {}", ms.nx, ms.ny);
            println!("grains           {}", ms.n_grains());
            println!("martensite frac  {:.4}", ms.martensite_fraction());
            println!("F-M boundary     {:.4} um^-1", boundary_length_per_area(&ms));
            if export {
                let out = output.unwrap_or_else(|| config.output_dir());
                for p in export_microstructure(&ms, &out)? {
                    println!("wrote {}", p.display());
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::PointDriver {
            path_file,
            phase,
            angles,
            substeps,
            theta,
            output,
        } => {
            let params = match phase {
                PhaseArg::Ferrite => MaterialParams::for_phase(Phase::Ferrite),
                PhaseArg::Martensite => MaterialParams::for_phase(Phase::Martensite),
            };
            let model = PhaseModel::new(params, SimulationConfig::default().geometry.domain_size);
            let [phi_x, phi_y, phi_z] = angles;
            let orientation = Orientation { phi_x, phi_y, phi_z };
            let samples = read_strain_path(&path_file)?;
            let mut state = IntegrationPointState::new(&model, &orientation);
            let records = drive_point(&mut state, &model, &samples, substeps, theta)?;
            let written = match &output {
                Some(p) => {
                    let file = std::fs::File::create(p).map_err(|e| dpcp::Error::Io {
                        path: p.clone(),
                        source: e,
                    })?;
                    write_point_records(&records, file)
                }
                None => write_point_records(&records, std::io::stdout().lock()),
            };
            written.map_err(|e| dpcp::Error::Format {
                path: output.unwrap_or_else(|| "<stdout>".into()),
                message: e.to_string(),
            })?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
