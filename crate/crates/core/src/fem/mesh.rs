//! Structured quadrilateral mesh with updated nodal coordinates.

use serde::{Deserialize, Serialize};

/// `nx × ny` bilinear quadrilaterals over `[0, width] × [0, height]`.
/// Nodes are numbered row by row from the bottom-left corner; element
/// nodes run counter-clockwise from the lower-left node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub nx: usize,
    pub ny: usize,
    pub width: f64,
    pub height: f64,
    pub origin: [f64; 2],
    /// Current nodal coordinates (μm).
    pub coords: Vec<[f64; 2]>,
}

impl Mesh {
    pub fn structured(nx: usize, ny: usize, width: f64, height: f64) -> Self {
        Mesh::structured_at(nx, ny, width, height, [0.0, 0.0])
    }

    pub fn structured_at(nx: usize, ny: usize, width: f64, height: f64, origin: [f64; 2]) -> Self {
        let (dx, dy) = (width / nx as f64, height / ny as f64);
        let mut coords = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                coords.push([origin[0] + i as f64 * dx, origin[1] + j as f64 * dy]);
            }
        }
        Mesh {
            nx,
            ny,
            width,
            height,
            origin,
            coords,
        }
    }

    pub fn n_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn n_elements(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.n_nodes()
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn element_nodes(&self, e: usize) -> [usize; 4] {
        let (i, j) = (e % self.nx, e / self.nx);
        [
            self.node(i, j),
            self.node(i + 1, j),
            self.node(i + 1, j + 1),
            self.node(i, j + 1),
        ]
    }

    pub fn element_coords(&self, e: usize) -> [[f64; 2]; 4] {
        self.element_nodes(e).map(|n| self.coords[n])
    }

    pub fn bottom_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..=self.nx).map(move |i| self.node(i, 0))
    }

    pub fn top_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..=self.nx).map(move |i| self.node(i, self.ny))
    }

    /// Largest distance between the global indices of two nodes sharing an
    /// element, in degrees of freedom.
    pub fn dof_bandwidth(&self) -> usize {
        2 * (self.nx + 2) + 1
    }

    /// Nodal velocities `v` advance the coordinates by `v·dt`.
    pub fn advance(&mut self, velocity: &[f64], dt: f64) {
        for (n, x) in self.coords.iter_mut().enumerate() {
            x[0] += velocity[2 * n] * dt;
            x[1] += velocity[2 * n + 1] * dt;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn connectivity_matches_grid() {
        let m = Mesh::structured(3, 2, 3.0, 2.0);
        assert_eq!(m.n_nodes(), 12);
        assert_eq!(m.element_nodes(0), [0, 1, 5, 4]);
        assert_eq!(m.element_nodes(5), [6, 7, 11, 10]);
        assert_eq!(m.coords[11], [3.0, 2.0]);
        assert_eq!(m.top_nodes().collect::<Vec<_>>(), vec![8, 9, 10, 11]);
        for e in 0..m.n_elements() {
            let nodes = m.element_nodes(e);
            let span = 2 * (nodes.iter().max().unwrap() - nodes.iter().min().unwrap()) + 1;
            assert!(span <= m.dof_bandwidth());
        }
    }
}
