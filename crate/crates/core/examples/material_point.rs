//! Drives one ferrite material point through plane-strain tension and
//! prints the axial stress together with the most active slip system.

use dpcp::constitutive::{drive_point, IntegrationPointState, MaterialParams, PathSample, PhaseModel};
use dpcp::crystal::Orientation;
use dpcp::tensor::Tensor2;

fn main() -> dpcp::Result<()> {
    let model = PhaseModel::new(MaterialParams::ferrite(), 80.0);
    let orientation = Orientation {
        phi_x: 15.0,
        phi_y: 25.0,
        phi_z: 35.0,
    };
    let mut state = IntegrationPointState::new(&model, &orientation);

    // 1e-4 /s stretch along y, incompressible in the x-y plane
    let d = Tensor2::from_diagonal(&nalgebra::Vector3::new(-1e-4, 1e-4, 0.0));
    let mut t = 0.0;
    println!("{:>8} {:>10} {:>6} {:>10} {:>10}", "strain", "sigma_yy", "sys", "tau", "g");
    for _ in 0..20 {
        let samples = [PathSample { t, d }, PathSample { t: t + 10.0, d }];
        drive_point(&mut state, &model, &samples, 100, 0.5)?;
        t += 10.0;
        let tau = state.resolved_shear_stresses();
        let a = (0..tau.len())
            .max_by(|&i, &j| tau[i].abs().total_cmp(&tau[j].abs()))
            .unwrap();
        println!(
            "{:8.5} {:10.3} {a:>6} {:10.3} {:10.3}",
            1e-4 * t,
            state.stress[(1, 1)],
            tau[a],
            state.flow_stress[a]
        );
    }
    Ok(())
}
