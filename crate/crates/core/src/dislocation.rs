//! Geometrically necessary (GN) and statistically stored (SS) dislocation
//! densities and the dislocation mean free path.
//!
//! Units: lengths in μm, times in s, densities in μm⁻².

use nalgebra::{SMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::crystal::{SlipSystem, N_SLIP};

pub type SlipVector = [f64; N_SLIP];
pub type SlipMatrix = SMatrix<f64, N_SLIP, N_SLIP>;

/// Forest interaction matrix for the mean free path: every foreign system
/// weighs one, self interaction is excluded.
pub fn foreign_interaction() -> SlipMatrix {
    SlipMatrix::from_fn(|i, j| if i == j { 0.0 } else { 1.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DislocationState {
    /// Time-integrated screw GN component per system (signed).
    pub gn_screw: SlipVector,
    /// Time-integrated edge GN component per system (signed).
    pub gn_edge: SlipVector,
    /// SS density per system.
    pub ss: SlipVector,
    pub rho0: f64,
}

impl DislocationState {
    pub fn initial(rho0: f64) -> Self {
        DislocationState {
            gn_screw: [0.0; N_SLIP],
            gn_edge: [0.0; N_SLIP],
            ss: [rho0; N_SLIP],
            rho0,
        }
    }

    /// Net GN density on system `alpha`.
    pub fn gn(&self, alpha: usize) -> f64 {
        gn_net(self.gn_screw[alpha], self.gn_edge[alpha])
    }

    pub fn gn_total(&self) -> f64 {
        (0..N_SLIP).map(|a| self.gn(a)).sum()
    }

    pub fn ss_total(&self) -> f64 {
        self.ss.iter().sum()
    }

    /// Obstacle density `ρ_L = ρ_G + ρ_S` per system.
    pub fn obstacle_density(&self) -> SlipVector {
        std::array::from_fn(|a| self.gn(a) + self.ss[a])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DislocationRates {
    pub gn_screw: SlipVector,
    pub gn_edge: SlipVector,
    pub ss: SlipVector,
}

impl Default for DislocationState {
    fn default() -> Self {
        DislocationState::initial(1.0)
    }
}

/// Screw and edge GN rates from the sample-frame slip-rate gradient.
pub fn gn_rates(grad_slip_rate: &Vector3<f64>, sys: &SlipSystem, burgers: f64) -> (f64, f64) {
    (
        grad_slip_rate.dot(&sys.t) / burgers,
        -grad_slip_rate.dot(&sys.s) / burgers,
    )
}

pub fn gn_net(screw: f64, edge: f64) -> f64 {
    screw.hypot(edge)
}

/// Bounds applied to the mean free path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathClamp {
    pub min: f64,
    pub max: f64,
}

impl PathClamp {
    /// `[10·b, domain size]`
    pub fn new(burgers: f64, domain_size: f64) -> Self {
        PathClamp {
            min: 10.0 * burgers,
            max: domain_size,
        }
    }
}

/// Mean free path on system `beta`: `c* / sqrt(Σ_γ ω^(βγ) ρ_L^(γ))`, clamped.
pub fn mean_free_path(
    obstacle_density: &SlipVector,
    omega: &SlipMatrix,
    c_star: f64,
    beta: usize,
    clamp: PathClamp,
) -> f64 {
    let weighted: f64 = (0..N_SLIP)
        .map(|g| omega[(beta, g)] * obstacle_density[g])
        .sum();
    if weighted <= 0.0 {
        return clamp.max;
    }
    (c_star / weighted.sqrt()).clamp(clamp.min, clamp.max)
}

/// `ρ̇_S = c·|γ̇| / (b·L)`
pub fn ss_rate(slip_rate: f64, path: f64, c: f64, burgers: f64) -> f64 {
    c * slip_rate.abs() / (burgers * path)
}

/// Forward-Euler update of the densities.
pub fn integrate_state(state: &mut DislocationState, rates: &DislocationRates, dt: f64) {
    for a in 0..N_SLIP {
        state.gn_screw[a] += dt * rates.gn_screw[a];
        state.gn_edge[a] += dt * rates.gn_edge[a];
        state.ss[a] += dt * rates.ss[a];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::SlipFamily;
    use proptest::prelude::*;

    const B: f64 = 2.49e-4;

    fn system() -> SlipSystem {
        SlipSystem::new(
            Vector3::new(1.0, 1.0, 1.0),
            Vector3::new(0.0, 1.0, -1.0),
            SlipFamily::Plane110,
        )
    }

    #[test]
    fn gn_rates_cases() {
        let sys = system();
        assert_eq!(gn_rates(&Vector3::zeros(), &sys, B), (0.0, 0.0));

        let (screw, edge) = gn_rates(&(sys.s * 1e-3), &sys, B);
        assert!(screw.abs() < 1e-12);
        // -1e-3 / 2.49e-4
        assert!((edge - (-4.016_064_257_028_113)).abs() < 1e-12);

        let (screw, edge) = gn_rates(&(sys.m * 0.7), &sys, B);
        assert!(screw.abs() < 1e-12 && edge.abs() < 1e-12);
    }

    #[test]
    fn gn_net_cases() {
        assert_eq!(gn_net(0.0, 0.0), 0.0);
        assert_eq!(gn_net(3.0, 4.0), 5.0);
        assert_eq!(gn_net(-2.5, 0.0), 2.5);
    }

    #[test]
    fn mean_free_path_cases() {
        let clamp = PathClamp::new(B, 80.0);
        let mut omega = SlipMatrix::zeros();
        omega[(0, 1)] = 1.0;
        let mut rho = [0.0; N_SLIP];
        rho[1] = 100.0;
        assert!((mean_free_path(&rho, &omega, 29.0, 0, clamp) - 2.9).abs() < 1e-14);

        let doubled = rho.map(|r| 2.0 * r);
        let ratio = mean_free_path(&rho, &omega, 29.0, 0, clamp)
            / mean_free_path(&doubled, &omega, 29.0, 0, clamp);
        assert!((ratio - 2f64.sqrt()).abs() < 1e-14);

        let mut self_only = [0.0; N_SLIP];
        self_only[0] = 50.0;
        assert_eq!(
            mean_free_path(&self_only, &foreign_interaction(), 29.0, 0, clamp),
            80.0
        );
    }

    #[test]
    fn ss_rate_cases() {
        assert_eq!(ss_rate(0.0, 2.9, 1.1, B), 0.0);
        // 1.1 * 1e-3 / (2.49e-4 * 2.9)
        let r = ss_rate(1e-3, 2.9, 1.1, B);
        assert!((r - 1.523_334_718_183_077_4).abs() < 1e-12);
        assert_eq!(ss_rate(-1e-3, 2.9, 1.1, B), r);
    }

    #[test]
    fn integration_cases() {
        let mut s = DislocationState::initial(1000.0);
        let before = s.clone();
        integrate_state(&mut s, &DislocationRates::default(), 0.01);
        assert_eq!(s, before);

        let mut s = DislocationState::initial(1.0);
        let rates = DislocationRates {
            ss: [0.5; N_SLIP],
            ..Default::default()
        };
        for _ in 0..8 {
            integrate_state(&mut s, &rates, 0.25);
        }
        assert_eq!(s.ss[3], 1.0 + 8.0 * 0.25 * 0.5);
    }

    proptest! {
        #[test]
        fn gn_net_symmetries(a in -1e3..1e3f64, b in -1e3..1e3f64, angle in 0.0..6.3f64) {
            let n = gn_net(a, b);
            prop_assert_eq!(gn_net(-a, b), n);
            prop_assert_eq!(gn_net(a, -b), n);
            let (s, c) = angle.sin_cos();
            let rotated = gn_net(c * a - s * b, s * a + c * b);
            prop_assert!((rotated - n).abs() <= 1e-12 * (1.0 + n));
        }

        #[test]
        fn ss_density_never_decreases(rates in proptest::array::uniform24(-1.0..1.0f64), dt in 1e-4..1.0f64) {
            let mut s = DislocationState::initial(1.0);
            let r = DislocationRates {
                ss: rates.map(|g| ss_rate(g, 2.0, 1.1, B)),
                ..Default::default()
            };
            integrate_state(&mut s, &r, dt);
            prop_assert!(s.ss.iter().all(|&x| x >= 1.0));
        }
    }
}
