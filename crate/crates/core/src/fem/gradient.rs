//! Slip-rate gradients by nodal averaging.
//!
//! Element values are scattered to nodes with area weights, then the
//! bilinear interpolant of the nodal field is differentiated at each element
//! centre.

use rayon::prelude::*;

use super::element::shape_derivatives;
use super::mesh::Mesh;
use crate::crystal::N_SLIP;
use crate::dislocation::SlipVector;

pub type SlipGradient = [[f64; 2]; N_SLIP];

/// Current area of every element (shoelace formula).
pub fn element_areas(mesh: &Mesh) -> Vec<f64> {
    (0..mesh.n_elements())
        .map(|e| {
            let c = mesh.element_coords(e);
            0.5 * (0..4)
                .map(|a| {
                    let (p, q) = (c[a], c[(a + 1) % 4]);
                    p[0] * q[1] - q[0] * p[1]
                })
                .sum::<f64>()
        })
        .collect()
}

/// Area-weighted average of element values at every node.
pub fn nodal_average(mesh: &Mesh, areas: &[f64], values: &[SlipVector]) -> Vec<SlipVector> {
    let mut sum = vec![[0.0; N_SLIP]; mesh.n_nodes()];
    let mut weight = vec![0.0; mesh.n_nodes()];
    for e in 0..mesh.n_elements() {
        for n in mesh.element_nodes(e) {
            weight[n] += areas[e];
            for a in 0..N_SLIP {
                sum[n][a] += areas[e] * values[e][a];
            }
        }
    }
    for (s, w) in sum.iter_mut().zip(&weight) {
        for v in s.iter_mut() {
            *v /= w;
        }
    }
    sum
}

/// Gradient (μm⁻¹ per unit of the field) of every system's field at each
/// element centre.
pub fn slip_rate_gradient(mesh: &Mesh, element_rates: &[SlipVector]) -> Vec<SlipGradient> {
    let areas = element_areas(mesh);
    let nodal = nodal_average(mesh, &areas, element_rates);
    (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| {
            let (dndx, _) = shape_derivatives(&mesh.element_coords(e), 0.0, 0.0)
                .expect("element Jacobians are checked during assembly");
            let nodes = mesh.element_nodes(e);
            std::array::from_fn(|a| {
                let mut g = [0.0; 2];
                for (k, &n) in nodes.iter().enumerate() {
                    g[0] += dndx[k][0] * nodal[n][a];
                    g[1] += dndx[k][1] * nodal[n][a];
                }
                g
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(mesh: &Mesh, f: impl Fn(f64, f64) -> f64) -> Vec<SlipVector> {
        (0..mesh.n_elements())
            .map(|e| {
                let c = mesh.element_coords(e);
                let x = c.iter().map(|p| p[0]).sum::<f64>() / 4.0;
                let y = c.iter().map(|p| p[1]).sum::<f64>() / 4.0;
                [f(x, y); N_SLIP]
            })
            .collect()
    }

    #[test]
    fn uniform_field_has_zero_gradient() {
        let mesh = Mesh::structured(6, 5, 12.0, 10.0);
        let g = slip_rate_gradient(&mesh, &field(&mesh, |_, _| 3.7e-4));
        assert!(g.iter().flatten().flatten().all(|v| v.abs() < 1e-18));
    }

    #[test]
    fn linear_field_is_exact_in_interior() {
        let (nx, ny) = (8, 6);
        let mesh = Mesh::structured(nx, ny, 8.0, 6.0);
        let k = 2.5e-3;
        let g = slip_rate_gradient(&mesh, &field(&mesh, |x, _| k * x));
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let ge = g[j * nx + i][5];
                assert!((ge[0] - k).abs() < 1e-10 && ge[1].abs() < 1e-10);
            }
        }
    }

    #[test]
    fn step_profile_matches_difference_oracle() {
        let (nx, ny, dx) = (10, 4, 1.25);
        let mesh = Mesh::structured(nx, ny, nx as f64 * dx, ny as f64 * dx);
        let jump = 1e-3;
        let x0 = 5.0 * dx;
        let g = slip_rate_gradient(&mesh, &field(&mesh, |x, _| if x > x0 { jump } else { 0.0 }));
        for j in 0..ny {
            for i in 0..nx {
                let gx = g[j * nx + i][0][0];
                if i == 4 || i == 5 {
                    assert!((gx - jump / (2.0 * dx)).abs() < 1e-15);
                } else {
                    assert!(gx.abs() < 1e-18);
                }
            }
        }
    }
}
