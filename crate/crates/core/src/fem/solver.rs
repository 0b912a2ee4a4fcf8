//! Banded storage and LU factorisation for the global stiffness system.
//!
//! The structured mesh keeps every coupling within a fixed distance of the
//! diagonal, so a band solver is exact and cheap. No pivoting is done:
//! stiffness matrices of stable material states have a dominant diagonal,
//! and a vanishing pivot is reported rather than worked around.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    /// Half bandwidth (same below and above the diagonal).
    bw: usize,
    /// Row-major, `2·bw + 1` entries per row.
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandMatrix {
            n,
            bw,
            data: vec![0.0; n * (2 * bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.bw
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        i.abs_diff(j) <= self.bw
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * (2 * self.bw + 1) + (j + self.bw - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.idx(i, j)]
        } else {
            0.0
        }
    }

    /// Panics if `(i, j)` lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band {}", self.bw);
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band {}", self.bw);
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    fn cols(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.bw)..(i + self.bw + 1).min(self.n)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.cols(i).map(|j| self.data[self.idx(i, j)] * x[j]).sum())
            .collect()
    }

    /// Replaces row and column `k` by the identity and moves the known
    /// value to the right-hand side.
    pub fn constrain(&mut self, k: usize, value: f64, rhs: &mut [f64]) {
        for i in self.cols(k) {
            if i != k {
                let idx = self.idx(i, k);
                rhs[i] -= self.data[idx] * value;
                self.data[idx] = 0.0;
                let idx = self.idx(k, i);
                self.data[idx] = 0.0;
            }
        }
        let idx = self.idx(k, k);
        self.data[idx] = 1.0;
        rhs[k] = value;
    }

    /// In-place LU factorisation; the result is only usable through
    /// [`BandMatrix::lu_solve`].
    pub fn factorize(mut self) -> Result<BandLu> {
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..self.n {
            let pivot = self.data[self.idx(k, k)];
            if !(pivot.abs() > 1e-14 * scale) || !pivot.is_finite() {
                return Err(Error::Solver(format!(
                    "pivot {pivot:e} at row {k} (matrix scale {scale:e})"
                )));
            }
            let last = (k + self.bw + 1).min(self.n);
            for i in (k + 1)..last {
                let lik = self.data[self.idx(i, k)] / pivot;
                if lik == 0.0 {
                    continue;
                }
                let ik = self.idx(i, k);
                self.data[ik] = lik;
                let (row_k, row_i) = (self.idx(k, k), self.idx(i, k));
                for off in 1..(last - k) {
                    self.data[row_i + off] -= lik * self.data[row_k + off];
                }
            }
        }
        Ok(BandLu(self))
    }
}

#[derive(Debug, Clone)]
pub struct BandLu(BandMatrix);

impl BandLu {
    pub fn lu_solve(&self, b: &mut [f64]) {
        let m = &self.0;
        for i in 0..m.n {
            let s: f64 = (i.saturating_sub(m.bw)..i).map(|j| m.data[m.idx(i, j)] * b[j]).sum();
            b[i] -= s;
        }
        for i in (0..m.n).rev() {
            let s: f64 = ((i + 1)..(i + m.bw + 1).min(m.n))
                .map(|j| m.data[m.idx(i, j)] * b[j])
                .sum();
            b[i] = (b[i] - s) / m.data[m.idx(i, i)];
        }
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_solves_to_rhs() {
        let mut a = BandMatrix::zeros(5, 2);
        for i in 0..5 {
            a.set(i, i, 1.0);
        }
        let mut b = vec![1.0, -2.0, 3.5, 0.0, 9.0];
        let expected = b.clone();
        a.factorize().unwrap().lu_solve(&mut b);
        assert_eq!(b, expected);
    }

    #[test]
    fn random_spd_matches_dense_factorization() {
        let (n, bw) = (50, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        // banded B with B Bᵀ + n I stays within 2·bw
        let mut bmat = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(bw / 2)..=(i + bw / 2).min(n - 1) {
                bmat[(i, j)] = rng.gen_range(-1.0..1.0);
            }
        }
        let dense = &bmat * bmat.transpose() + DMatrix::identity(n, n) * n as f64;
        let mut band = BandMatrix::zeros(n, bw);
        for i in 0..n {
            for j in 0..n {
                if dense[(i, j)] != 0.0 {
                    band.set(i, j, dense[(i, j)]);
                }
            }
        }
        let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let oracle = dense.clone().lu().solve(&DVector::from_vec(rhs.clone())).unwrap();
        let mut x = rhs.clone();
        band.clone().factorize().unwrap().lu_solve(&mut x);
        for i in 0..n {
            assert!((x[i] - oracle[i]).abs() <= 1e-10 * oracle.amax());
        }
        let r: Vec<f64> = band.mul_vec(&x).iter().zip(&rhs).map(|(a, b)| a - b).collect();
        assert!(norm(&r) <= 1e-10 * norm(&rhs));
    }

    #[test]
    fn nonsymmetric_band_matches_dense() {
        let (n, bw) = (30, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut band = BandMatrix::zeros(n, bw);
        let mut dense = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(bw)..=(i + bw).min(n - 1) {
                let v = if i == j { 20.0 } else { rng.gen_range(-1.0..1.0) };
                band.set(i, j, v);
                dense[(i, j)] = v;
            }
        }
        let rhs: Vec<f64> = (0..n).map(|i| i as f64 - 10.0).collect();
        let oracle = dense.lu().solve(&DVector::from_vec(rhs.clone())).unwrap();
        let mut x = rhs;
        band.factorize().unwrap().lu_solve(&mut x);
        for i in 0..n {
            assert!((x[i] - oracle[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn constraint_fixes_value() {
        let mut a = BandMatrix::zeros(3, 1);
        for (i, j, v) in [(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0), (1, 2, -1.0), (2, 1, -1.0), (2, 2, 2.0)] {
            a.set(i, j, v);
        }
        let mut b = vec![0.0, 0.0, 0.0];
        a.constrain(2, 3.0, &mut b);
        a.factorize().unwrap().lu_solve(&mut b);
        assert!((b[2] - 3.0).abs() < 1e-15);
        assert!((b[1] - 2.0).abs() < 1e-14 && (b[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_pivot_is_reported() {
        let a = BandMatrix::zeros(4, 1);
        assert!(matches!(a.factorize(), Err(Error::Solver(_))));
    }
}
