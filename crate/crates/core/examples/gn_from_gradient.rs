//! Geometrically necessary dislocation rates from a slip-rate field that
//! jumps across a vertical interface, as happens at a ferrite-martensite
//! boundary.

use dpcp::crystal::{oriented_slip_systems, Orientation, N_SLIP};
use dpcp::dislocation::{gn_net, gn_rates};
use dpcp::fem::{slip_rate_gradient, Mesh};
use nalgebra::Vector3;

fn main() {
    let n = 8;
    let mesh = Mesh::structured(n, n, 80.0, 80.0);
    let systems = oriented_slip_systems(&Orientation::about_z(30.0));
    // System 0 slips at 1e-4 /s on the left half only
    let rates: Vec<[f64; N_SLIP]> = (0..n * n)
        .map(|e| {
            let mut r = [0.0; N_SLIP];
            if e % n < n / 2 {
                r[0] = 1e-4;
            }
            r
        })
        .collect();
    let grad = slip_rate_gradient(&mesh, &rates);
    println!("column  d(gamma)/dx   GN rate (um^-2/s)");
    for i in 0..n {
        let g = grad[n * (n / 2) + i][0];
        let (screw, edge) = gn_rates(&Vector3::new(g[0], g[1], 0.0), &systems[0], 2.49e-4);
        println!("{i:>6} {:12.4e} {:12.4e}", g[0], gn_net(screw, edge));
    }
}
