//! Four-node plane-strain quadrilateral with 2×2 Gauss integration and a
//! B-bar treatment of the volumetric rate.

use nalgebra::{SMatrix, SVector};

use crate::tensor::{voigt_to_strain, Moduli, Tensor2, Voigt};

pub type ElementMatrix = SMatrix<f64, 8, 8>;
pub type ElementVector = SVector<f64, 8>;
pub type BMatrix = SMatrix<f64, 6, 8>;
/// Maps element velocities to `[L_xx, L_xy, L_yx, L_yy]`.
pub type GradientMatrix = SMatrix<f64, 4, 8>;

const G: f64 = 0.577_350_269_189_625_8;

/// Gauss points in the parent square, ordered like the element nodes.
pub const GAUSS_POINTS: [[f64; 2]; 4] = [[-G, -G], [G, -G], [G, G], [-G, G]];

const PARENT_NODES: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

pub fn shape_functions(xi: f64, eta: f64) -> [f64; 4] {
    PARENT_NODES.map(|[a, b]| 0.25 * (1.0 + a * xi) * (1.0 + b * eta))
}

/// Spatial shape-function derivatives and Jacobian determinant at a
/// parent-domain point. Returns `Err(det)` for a non-positive Jacobian.
pub fn shape_derivatives(
    coords: &[[f64; 2]; 4],
    xi: f64,
    eta: f64,
) -> Result<([[f64; 2]; 4], f64), f64> {
    let dxi = PARENT_NODES.map(|[a, b]| [0.25 * a * (1.0 + b * eta), 0.25 * b * (1.0 + a * xi)]);
    let mut j = [[0.0; 2]; 2];
    for (d, x) in dxi.iter().zip(coords) {
        for r in 0..2 {
            for c in 0..2 {
                j[r][c] += d[r] * x[c];
            }
        }
    }
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    if !(det > 0.0) {
        return Err(det);
    }
    let inv = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
    let dndx = dxi.map(|d| {
        [
            inv[0][0] * d[0] + inv[0][1] * d[1],
            inv[1][0] * d[0] + inv[1][1] * d[1],
        ]
    });
    Ok((dndx, det))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussPoint {
    pub dndx: [[f64; 2]; 4],
    /// Integration weight times Jacobian (area per unit thickness).
    pub dv: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementGeometry {
    pub points: [GaussPoint; 4],
    /// Volume-averaged dilatation row.
    pub mean_dilatation: [f64; 8],
    pub area: f64,
}

impl ElementGeometry {
    pub fn new(coords: &[[f64; 2]; 4]) -> Result<Self, f64> {
        let mut points = Vec::with_capacity(4);
        let mut mean = [0.0; 8];
        let mut area = 0.0;
        for [xi, eta] in GAUSS_POINTS {
            let (dndx, det) = shape_derivatives(coords, xi, eta)?;
            for a in 0..4 {
                mean[2 * a] += dndx[a][0] * det;
                mean[2 * a + 1] += dndx[a][1] * det;
            }
            area += det;
            points.push(GaussPoint { dndx, dv: det });
        }
        for m in mean.iter_mut() {
            *m /= area;
        }
        Ok(ElementGeometry {
            points: points.try_into().expect("four Gauss points"),
            mean_dilatation: mean,
            area,
        })
    }

    pub fn gradient_matrix(&self, q: usize) -> GradientMatrix {
        let d = &self.points[q].dndx;
        let mut g = GradientMatrix::zeros();
        for a in 0..4 {
            g[(0, 2 * a)] = d[a][0];
            g[(1, 2 * a)] = d[a][1];
            g[(2, 2 * a + 1)] = d[a][0];
            g[(3, 2 * a + 1)] = d[a][1];
        }
        g
    }

    /// Strain-Voigt rate operator with the dilatation replaced by its
    /// element average.
    pub fn b_bar(&self, q: usize) -> BMatrix {
        let d = &self.points[q].dndx;
        let mut b = BMatrix::zeros();
        for a in 0..4 {
            let (cx, cy) = (2 * a, 2 * a + 1);
            b[(0, cx)] = d[a][0];
            b[(1, cy)] = d[a][1];
            b[(5, cx)] = d[a][1];
            b[(5, cy)] = d[a][0];
            let shift = [
                (self.mean_dilatation[cx] - d[a][0]) / 3.0,
                (self.mean_dilatation[cy] - d[a][1]) / 3.0,
            ];
            for r in 0..3 {
                b[(r, cx)] += shift[0];
                b[(r, cy)] += shift[1];
            }
        }
        b
    }

    pub fn velocity_gradient(&self, q: usize, v: &ElementVector) -> Tensor2 {
        let g = self.gradient_matrix(q) * v;
        Tensor2::new(g[0], g[1], 0.0, g[2], g[3], 0.0, 0.0, 0.0, 0.0)
    }

    pub fn deformation_rate(&self, q: usize, v: &ElementVector) -> Tensor2 {
        voigt_to_strain(&(self.b_bar(q) * v))
    }
}

/// `H` such that `Ľ:(L T) − Ď:(D T + T D) = ǧᵀ H g` with `g` the in-plane
/// velocity gradient `[L_xx, L_xy, L_yx, L_yy]`.
pub fn geometric_operator(stress: &Tensor2) -> SMatrix<f64, 4, 4> {
    let t = stress.fixed_view::<2, 2>(0, 0).into_owned();
    let unit = |k: usize| {
        let mut l = nalgebra::Matrix2::zeros();
        l[(k / 2, k % 2)] = 1.0;
        l
    };
    SMatrix::<f64, 4, 4>::from_fn(|a, b| {
        let (lv, l) = (unit(a), unit(b));
        let (dv, d) = (0.5 * (lv + lv.transpose()), 0.5 * (l + l.transpose()));
        (l * t).component_mul(&lv).sum() - (d * t + t * d).component_mul(&dv).sum()
    })
}

/// Element stiffness and relaxation load from per-point tangent moduli,
/// plastic relaxation stresses and current Cauchy stresses.
pub fn element_system(
    geom: &ElementGeometry,
    moduli: [&Moduli; 4],
    relaxation: [&Voigt; 4],
    stress: [&Tensor2; 4],
) -> (ElementMatrix, ElementVector) {
    let mut k = ElementMatrix::zeros();
    let mut f = ElementVector::zeros();
    for q in 0..4 {
        let dv = geom.points[q].dv;
        let b = geom.b_bar(q);
        let g = geom.gradient_matrix(q);
        let bt = b.transpose() * dv;
        k += bt * moduli[q] * b;
        k += g.transpose() * (geometric_operator(stress[q]) * dv) * g;
        f += bt * relaxation[q];
    }
    (k, f)
}
