//! Small-tensor helpers shared by the constitutive and FE code.
//!
//! Second-order tensors are `Matrix3`. Voigt vectors use the component order
//! `[xx, yy, zz, yz, xz, xy]`. Stress-like quantities store the plain shear
//! components, strain-like quantities store doubled (engineering) shears, so
//! that `stress_voigt · strain_voigt` equals the double contraction `T : D`.

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};

pub type Tensor2 = Matrix3<f64>;
pub type Voigt = Vector6<f64>;
pub type Moduli = Matrix6<f64>;

const PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)];

pub fn stress_to_voigt(t: &Tensor2) -> Voigt {
    Voigt::from_fn(|k, _| {
        let (i, j) = PAIRS[k];
        0.5 * (t[(i, j)] + t[(j, i)])
    })
}

pub fn strain_to_voigt(d: &Tensor2) -> Voigt {
    Voigt::from_fn(|k, _| {
        let (i, j) = PAIRS[k];
        if i == j {
            d[(i, i)]
        } else {
            d[(i, j)] + d[(j, i)]
        }
    })
}

pub fn voigt_to_stress(v: &Voigt) -> Tensor2 {
    Tensor2::new(v[0], v[5], v[4], v[5], v[1], v[3], v[4], v[3], v[2])
}

pub fn voigt_to_strain(v: &Voigt) -> Tensor2 {
    Tensor2::new(
        v[0],
        0.5 * v[5],
        0.5 * v[4],
        0.5 * v[5],
        v[1],
        0.5 * v[3],
        0.5 * v[4],
        0.5 * v[3],
        v[2],
    )
}

pub fn sym(a: &Tensor2) -> Tensor2 {
    0.5 * (a + a.transpose())
}

pub fn skew(a: &Tensor2) -> Tensor2 {
    0.5 * (a - a.transpose())
}

pub fn ddot(a: &Tensor2, b: &Tensor2) -> f64 {
    a.component_mul(b).sum()
}

pub fn deviator(a: &Tensor2) -> Tensor2 {
    a - Tensor2::identity() * (a.trace() / 3.0)
}

pub fn outer(a: &Vector3<f64>, b: &Vector3<f64>) -> Tensor2 {
    a * b.transpose()
}

/// Isotropic elastic moduli mapping strain-Voigt to stress-Voigt.
pub fn isotropic_moduli(young: f64, poisson: f64) -> Moduli {
    let lambda = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
    let mu = young / (2.0 * (1.0 + poisson));
    let mut c = Moduli::zeros();
    for i in 0..3 {
        for j in 0..3 {
            c[(i, j)] = lambda;
        }
        c[(i, i)] += 2.0 * mu;
        c[(i + 3, i + 3)] = mu;
    }
    c
}

/// Constrained (plane-strain, laterally fixed) modulus `E(1-ν)/((1+ν)(1-2ν))`.
pub fn plane_strain_modulus(young: f64, poisson: f64) -> f64 {
    young * (1.0 - poisson) / ((1.0 + poisson) * (1.0 - 2.0 * poisson))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn voigt_contraction_matches_tensor_ddot() {
        let t = Tensor2::new(1.0, 2.0, 3.0, 2.0, 5.0, 6.0, 3.0, 6.0, 9.0);
        let d = Tensor2::new(0.1, -0.2, 0.3, -0.2, 0.5, 0.7, 0.3, 0.7, -0.9);
        let lhs = stress_to_voigt(&t).dot(&strain_to_voigt(&d));
        assert!((lhs - ddot(&t, &d)).abs() < 1e-14);
        assert_eq!(voigt_to_stress(&stress_to_voigt(&t)), t);
        assert!((voigt_to_strain(&strain_to_voigt(&d)) - d).norm() < 1e-15);
    }

    #[test]
    fn isotropic_moduli_constrained_entry() {
        let c = isotropic_moduli(205_900.0, 0.3);
        assert!((c[(1, 1)] - plane_strain_modulus(205_900.0, 0.3)).abs() < 1e-9);
        assert!((c - c.transpose()).norm() < 1e-12);
    }
}
