//! Single-phase, single-orientation plates.
//!
//! An orientation whose slip systems are symmetric about the tensile axis
//! deforms homogeneously, so no geometrically necessary dislocations may
//! appear. Orientations that couple tension to shear bend the plate once
//! it yields (the sheared free edges cannot stay traction free), which is
//! why the null check uses a symmetric one.

use dpcp::constitutive::{MaterialParams, PhaseModel};
use dpcp::crystal::Orientation;
use dpcp::fem::{LoadProgram, Mesh, Simulation, StepSettings};
use dpcp::microstructure::Phase;
use dpcp::postprocess::{element_fields, CurveRow};

const SIZE: f64 = 80.0;

const SYMMETRIC: Orientation = Orientation {
    phi_x: 0.0,
    phi_y: 0.0,
    phi_z: 45.0,
};

const GENERAL: Orientation = Orientation {
    phi_x: 12.0,
    phi_y: 31.0,
    phi_z: 47.0,
};

fn plate(orientation: Orientation, origin: [f64; 2], steps: usize) -> Simulation {
    let n = 6;
    let mesh = Mesh::structured_at(n, n, SIZE, SIZE, origin);
    let models = [
        PhaseModel::new(MaterialParams::ferrite(), SIZE),
        PhaseModel::new(MaterialParams::martensite(), SIZE),
    ];
    let mut program = LoadProgram::tensile(SIZE, 1e-4, 0.4, 0.1);
    program.n_steps = steps;
    Simulation::new(
        mesh,
        vec![Phase::Ferrite; n * n],
        &vec![orientation; n * n],
        models,
        program,
        StepSettings::default(),
    )
}

fn run(sim: &mut Simulation) -> CurveRow {
    while !sim.is_finished() {
        sim.step().unwrap();
    }
    CurveRow::from_fields(sim, &element_fields(sim))
}

#[test]
fn no_gn_density_and_uniform_fields() {
    let mut sim = plate(SYMMETRIC, [0.0, 0.0], 150);
    let row = run(&mut sim);
    // Past yield
    assert!(row.eps_eq_f > 5e-4, "{}", row.eps_eq_f);

    let max_gn = sim
        .states
        .iter()
        .flat_map(|s| (0..24).map(move |a| s.dislocations.gn(a).abs()))
        .fold(0.0, f64::max);
    assert!(max_gn <= 1e-10, "max GN density {max_gn:e}");

    let f = element_fields(&sim);
    for field in [&f.sigma_yy, &f.strain_eq, &f.rho_s] {
        let mean = field.iter().sum::<f64>() / field.len() as f64;
        let dev = field.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
        assert!(dev <= 1e-8 * mean.abs(), "deviation {dev:e} around {mean}");
    }
}

#[test]
fn rigid_translation_of_the_plate_changes_nothing() {
    let a = run(&mut plate(GENERAL, [0.0, 0.0], 40));
    let b = run(&mut plate(GENERAL, [250.0, -75.0], 40));
    for (x, y) in a.values().iter().zip(b.values()) {
        // Martensite averages are NaN: the plate has none.
        assert!(x.is_nan() && y.is_nan() || (x - y).abs() <= 1e-9 * x.abs().max(1e-12), "{x} vs {y}");
    }
}
