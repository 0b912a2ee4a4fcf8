//! Lists the 24 BCC slip systems of a rotated crystal with their Schmid
//! factors for uniaxial tension along y.
//!
//! cargo run --example slip_systems -- 10 20 30

use dpcp::crystal::{oriented_slip_systems, resolved_shear_stress, Orientation};
use dpcp::tensor::Tensor2;

fn main() {
    let angles: Vec<f64> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("angles in degrees"))
        .collect();
    let [phi_x, phi_y, phi_z] = match angles[..] {
        [] => [0.0, 0.0, 0.0],
        [x, y, z] => [x, y, z],
        _ => panic!("pass three angles or none"),
    };
    let systems = oriented_slip_systems(&Orientation { phi_x, phi_y, phi_z });

    let mut tension = Tensor2::zeros();
    tension[(1, 1)] = 1.0;
    println!("{:>3} {:>8} {:>26} {:>26} {:>7}", "#", "family", "slip direction", "plane normal", "schmid");
    for (i, sys) in systems.iter().enumerate() {
        println!(
            "{i:>3} {:>8} [{:7.4} {:7.4} {:7.4}] [{:7.4} {:7.4} {:7.4}] {:7.4}",
            format!("{:?}", sys.family),
            sys.s.x,
            sys.s.y,
            sys.s.z,
            sys.m.x,
            sys.m.y,
            sys.m.z,
            resolved_shear_stress(&tension, sys)
        );
    }
}
