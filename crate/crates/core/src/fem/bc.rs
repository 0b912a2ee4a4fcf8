//! Load program and prescribed velocities.

use serde::{Deserialize, Serialize};

use super::mesh::Mesh;
use super::solver::BandMatrix;

/// Treatment of the left and right edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LateralEdges {
    /// Traction free; only the bottom-left node is pinned in x.
    #[default]
    Free,
    /// Both lateral edges held in x.
    Roller,
}

/// Tensile pull of the top surface at constant velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadProgram {
    /// Prescribed top velocity (μm/s).
    pub top_velocity: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub lateral: LateralEdges,
}

impl LoadProgram {
    /// Step count is the pull time `elongation / (rate·height)` divided by
    /// `dt`, rounded to the nearest integer.
    pub fn tensile(height: f64, strain_rate: f64, elongation: f64, dt: f64) -> Self {
        let top_velocity = strain_rate * height;
        let n_steps = if top_velocity > 0.0 {
            (elongation / top_velocity / dt).round() as usize
        } else {
            0
        };
        LoadProgram {
            top_velocity,
            dt,
            n_steps,
            lateral: LateralEdges::Free,
        }
    }

    pub fn total_time(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    /// `(dof, velocity)` pairs in ascending dof order.
    pub fn prescribed(&self, mesh: &Mesh) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = mesh.bottom_nodes().map(|n| (2 * n + 1, 0.0)).collect();
        out.extend(mesh.top_nodes().map(|n| (2 * n + 1, self.top_velocity)));
        match self.lateral {
            LateralEdges::Free => out.push((0, 0.0)),
            LateralEdges::Roller => {
                for j in 0..=mesh.ny {
                    out.push((2 * mesh.node(0, j), 0.0));
                    out.push((2 * mesh.node(mesh.nx, j), 0.0));
                }
            }
        }
        out.sort_by_key(|&(d, _)| d);
        out
    }
}

/// Imposes every prescribed velocity on a copy of the system.
pub fn apply_bcs(k: &mut BandMatrix, rhs: &mut [f64], prescribed: &[(usize, f64)]) {
    for &(dof, v) in prescribed {
        k.constrain(dof, v, rhs);
    }
}
