//! Updated-Lagrangian rate-form finite-element engine.
//!
//! Each step linearises every integration point with the tangent-modulus
//! method, assembles and solves for nodal velocities, advances the point
//! states, integrates GN densities from the recovered slip-rate gradients and
//! finally moves the nodes. There is no equilibrium iteration within a step.

pub mod bc;
pub mod element;
pub mod gradient;
pub mod mesh;
pub mod solver;

use std::path::Path;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constitutive::{advance_point, point_tangent, IntegrationPointState, PhaseModel, PointTangent};
use crate::crystal::{Orientation, N_SLIP};
use crate::dislocation::{gn_rates, SlipVector};
use crate::error::{Error, Result};
use crate::microstructure::{Microstructure, Phase};
use crate::tensor::skew;

pub use bc::{apply_bcs, LateralEdges, LoadProgram};
pub use element::{ElementGeometry, ElementMatrix, ElementVector};
pub use gradient::slip_rate_gradient;
pub use mesh::Mesh;
pub use solver::{BandMatrix, BandLu};

/// Accepted linear-solve residual, relative to the reduced right-hand side.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSettings {
    /// Tangent-modulus weight θ.
    pub theta: f64,
    /// Co-rotate slip systems with the substructure spin.
    pub rotate_lattice: bool,
}

impl Default for StepSettings {
    fn default() -> Self {
        StepSettings {
            theta: 0.5,
            rotate_lattice: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub step: usize,
    pub time: f64,
    pub residual: f64,
    pub top_force: f64,
    pub bottom_force: f64,
}

/// Assembled global system before constraints.
#[derive(Debug, Clone)]
pub struct GlobalSystem {
    pub stiffness: BandMatrix,
    pub load: Vec<f64>,
    pub geometry: Vec<ElementGeometry>,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub mesh: Mesh,
    pub phase: Vec<Phase>,
    /// Four integration points per element, element-major.
    pub states: Vec<IntegrationPointState>,
    pub models: [PhaseModel; 2],
    pub program: LoadProgram,
    pub settings: StepSettings,
    pub time: f64,
    pub step: usize,
    /// Time-integrated y reactions (force per unit thickness, MPa·μm).
    pub top_force: f64,
    pub bottom_force: f64,
    /// Nodal velocities of the last step.
    pub velocity: Vec<f64>,
}

impl Simulation {
    pub fn new(
        mesh: Mesh,
        phase: Vec<Phase>,
        orientation: &[Orientation],
        models: [PhaseModel; 2],
        program: LoadProgram,
        settings: StepSettings,
    ) -> Self {
        assert_eq!(phase.len(), mesh.n_elements());
        assert_eq!(orientation.len(), mesh.n_elements());
        let states = (0..4 * mesh.n_elements())
            .map(|k| IntegrationPointState::new(&models[phase[k / 4].index()], &orientation[k / 4]))
            .collect();
        Simulation {
            velocity: vec![0.0; mesh.n_dofs()],
            mesh,
            phase,
            states,
            models,
            program,
            settings,
            time: 0.0,
            step: 0,
            top_force: 0.0,
            bottom_force: 0.0,
        }
    }

    pub fn from_microstructure(
        ms: &Microstructure,
        models: [PhaseModel; 2],
        program: LoadProgram,
        settings: StepSettings,
    ) -> Self {
        let mesh = Mesh::structured(ms.nx, ms.ny, ms.nx as f64 * ms.dx, ms.ny as f64 * ms.dy);
        Simulation::new(mesh, ms.phase.clone(), &ms.orientation, models, program, settings)
    }

    pub fn n_elements(&self) -> usize {
        self.mesh.n_elements()
    }

    pub fn is_finished(&self) -> bool {
        self.step >= self.program.n_steps
    }

    fn model(&self, point: usize) -> &PhaseModel {
        &self.models[self.phase[point / 4].index()]
    }

    pub fn tangents(&self) -> Vec<PointTangent> {
        let (dt, theta) = (self.program.dt, self.settings.theta);
        self.states
            .par_iter()
            .enumerate()
            .map(|(k, s)| point_tangent(s, self.model(k), dt, theta))
            .collect()
    }

    /// Element loop and deterministic global assembly.
    pub fn assemble(&self, tangents: &[PointTangent]) -> Result<GlobalSystem> {
        let mesh = &self.mesh;
        let elements: Vec<(ElementGeometry, ElementMatrix, ElementVector)> = (0..mesh.n_elements())
            .into_par_iter()
            .map(|e| {
                let geom = ElementGeometry::new(&mesh.element_coords(e))
                    .map_err(|det| Error::SingularJacobian { element: e, det })?;
                let p = |q: usize| 4 * e + q;
                let (k, f) = element::element_system(
                    &geom,
                    [0, 1, 2, 3].map(|q| &tangents[p(q)].moduli),
                    [0, 1, 2, 3].map(|q| &tangents[p(q)].relaxation),
                    [0, 1, 2, 3].map(|q| &self.states[p(q)].stress),
                );
                Ok((geom, k, f))
            })
            .collect::<Result<_>>()?;

        let n = mesh.n_dofs();
        let mut stiffness = BandMatrix::zeros(n, mesh.dof_bandwidth());
        let mut load = vec![0.0; n];
        let mut geometry = Vec::with_capacity(elements.len());
        for (e, (geom, ke, fe)) in elements.into_iter().enumerate() {
            let dofs = element_dofs(mesh, e);
            for a in 0..8 {
                load[dofs[a]] += fe[a];
                for b in 0..8 {
                    stiffness.add(dofs[a], dofs[b], ke[(a, b)]);
                }
            }
            geometry.push(geom);
        }
        Ok(GlobalSystem {
            stiffness,
            load,
            geometry,
        })
    }

    /// Solves for nodal velocities. Returns the velocities, the full
    /// residual `K v − f` (reactions at prescribed dofs) and the relative
    /// residual on free dofs.
    pub fn solve(&self, system: &GlobalSystem) -> Result<(Vec<f64>, Vec<f64>, f64)> {
        let prescribed = self.program.prescribed(&self.mesh);
        let mut k = system.stiffness.clone();
        let mut rhs = system.load.clone();
        apply_bcs(&mut k, &mut rhs, &prescribed);
        let mut fixed = vec![false; rhs.len()];
        for &(d, _) in &prescribed {
            fixed[d] = true;
        }
        let rhs_norm = free_norm(&rhs, &fixed);
        k.factorize()?.lu_solve(&mut rhs);
        let v = rhs;
        let residual: Vec<f64> = system
            .stiffness
            .mul_vec(&v)
            .iter()
            .zip(&system.load)
            .map(|(kv, f)| kv - f)
            .collect();
        let res_norm = free_norm(&residual, &fixed);
        let relative = if res_norm == 0.0 { 0.0 } else { res_norm / rhs_norm };
        if !(relative <= RESIDUAL_TOLERANCE) {
            return Err(Error::Solver(format!(
                "relative residual {relative:e} exceeds {RESIDUAL_TOLERANCE:e}"
            )));
        }
        Ok((v, residual, relative))
    }

    pub fn step(&mut self) -> Result<StepReport> {
        let dt = self.program.dt;
        let tangents = self.tangents();
        let system = self.assemble(&tangents)?;
        let (v, reactions, residual) = self.solve(&system)?;

        let rotate = self.settings.rotate_lattice;
        let (mesh, phase, models) = (&self.mesh, &self.phase, &self.models);
        let geometry = &system.geometry;
        self.states
            .par_iter_mut()
            .zip(tangents.par_iter())
            .enumerate()
            .try_for_each(|(k, (state, tangent))| {
                let (e, q) = (k / 4, k % 4);
                let ve = element_velocity(mesh, e, &v);
                let l = geometry[e].velocity_gradient(q, &ve);
                let d = geometry[e].deformation_rate(q, &ve);
                let model = &models[phase[e].index()];
                advance_point(state, tangent, &d, &skew(&l), dt, model, rotate)
                    .map_err(|f| f.into_error(e))
            })?;

        self.integrate_gn(dt);
        self.mesh.advance(&v, dt);

        let sum_y = |nodes: Vec<usize>| nodes.iter().map(|n| reactions[2 * n + 1]).sum::<f64>();
        self.top_force += dt * sum_y(self.mesh.top_nodes().collect());
        self.bottom_force += dt * sum_y(self.mesh.bottom_nodes().collect());
        self.velocity = v;
        self.time += dt;
        self.step += 1;
        Ok(StepReport {
            step: self.step,
            time: self.time,
            residual,
            top_force: self.top_force,
            bottom_force: self.bottom_force,
        })
    }

    /// Element-averaged slip rates of the last step.
    pub fn element_slip_rates(&self) -> Vec<SlipVector> {
        self.states
            .chunks(4)
            .map(|pts| std::array::from_fn(|a| pts.iter().map(|s| s.slip_rate[a]).sum::<f64>() / 4.0))
            .collect()
    }

    fn integrate_gn(&mut self, dt: f64) {
        let grads = slip_rate_gradient(&self.mesh, &self.element_slip_rates());
        let (phase, models) = (&self.phase, &self.models);
        self.states.par_iter_mut().enumerate().for_each(|(k, s)| {
            let b = models[phase[k / 4].index()].params.burgers;
            let g = &grads[k / 4];
            for a in 0..N_SLIP {
                let grad = Vector3::new(g[a][0], g[a][1], 0.0);
                let (screw, edge) = gn_rates(&grad, &s.systems[a], b);
                s.dislocations.gn_screw[a] += dt * screw;
                s.dislocations.gn_edge[a] += dt * edge;
            }
        });
    }

    pub fn write_checkpoint(&self, path: &Path) -> Result<()> {
        let data = CheckpointRef {
            version: CHECKPOINT_VERSION,
            mesh: &self.mesh,
            phase: &self.phase,
            states: &self.states,
            program: &self.program,
            time: self.time,
            step: self.step,
            top_force: self.top_force,
            bottom_force: self.bottom_force,
        };
        let bytes = bincode::serialize(&data).map_err(|e| Error::Checkpoint(e.to_string()))?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    /// Restores a checkpoint; material models and step settings come from
    /// the caller.
    pub fn read_checkpoint(path: &Path, models: [PhaseModel; 2], settings: StepSettings) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let c: CheckpointOwned =
            bincode::deserialize(&bytes).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if c.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "version {} not supported (expected {CHECKPOINT_VERSION})",
                c.version
            )));
        }
        if c.states.len() != 4 * c.mesh.n_elements() || c.phase.len() != c.mesh.n_elements() {
            return Err(Error::Checkpoint("inconsistent state sizes".into()));
        }
        Ok(Simulation {
            velocity: vec![0.0; c.mesh.n_dofs()],
            mesh: c.mesh,
            phase: c.phase,
            states: c.states,
            models,
            program: c.program,
            settings,
            time: c.time,
            step: c.step,
            top_force: c.top_force,
            bottom_force: c.bottom_force,
        })
    }
}

#[derive(Serialize)]
struct CheckpointRef<'a> {
    version: u32,
    mesh: &'a Mesh,
    phase: &'a [Phase],
    states: &'a [IntegrationPointState],
    program: &'a LoadProgram,
    time: f64,
    step: usize,
    top_force: f64,
    bottom_force: f64,
}

#[derive(Deserialize)]
struct CheckpointOwned {
    version: u32,
    mesh: Mesh,
    phase: Vec<Phase>,
    states: Vec<IntegrationPointState>,
    program: LoadProgram,
    time: f64,
    step: usize,
    top_force: f64,
    bottom_force: f64,
}

pub fn element_dofs(mesh: &Mesh, e: usize) -> [usize; 8] {
    let nodes = mesh.element_nodes(e);
    std::array::from_fn(|a| 2 * nodes[a / 2] + a % 2)
}

pub fn element_velocity(mesh: &Mesh, e: usize, v: &[f64]) -> ElementVector {
    let dofs = element_dofs(mesh, e);
    ElementVector::from_fn(|a, _| v[dofs[a]])
}

fn free_norm(v: &[f64], fixed: &[bool]) -> f64 {
    v.iter()
        .zip(fixed)
        .filter(|(_, &f)| !f)
        .map(|(x, _)| x * x)
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::MaterialParams;
    use crate::tensor::plane_strain_modulus;

    fn elastic_models() -> [PhaseModel; 2] {
        let stiff = |p: MaterialParams| MaterialParams {
            initial_flow_stress: [1e9, 1e9],
            friction_stress: [1e9, 1e9],
            ..p
        };
        [
            PhaseModel::new(stiff(MaterialParams::ferrite()), 80.0),
            PhaseModel::new(stiff(MaterialParams::martensite()), 80.0),
        ]
    }

    fn uniform(nx: usize, ny: usize, size: f64, models: [PhaseModel; 2], program: LoadProgram) -> Simulation {
        let n = nx * ny;
        Simulation::new(
            Mesh::structured(nx, ny, size, size),
            vec![Phase::Ferrite; n],
            &vec![Orientation::default(); n],
            models,
            program,
            StepSettings::default(),
        )
    }

    #[test]
    fn zero_load_leaves_state_unchanged() {
        let models = [
            PhaseModel::new(MaterialParams::ferrite(), 8.0),
            PhaseModel::new(MaterialParams::martensite(), 8.0),
        ];
        let mut program = LoadProgram::tensile(8.0, 0.0, 0.0, 0.1);
        program.n_steps = 3;
        let mut sim = uniform(3, 3, 8.0, models, program);
        let before = sim.states.clone();
        let coords = sim.mesh.coords.clone();
        for _ in 0..3 {
            sim.step().unwrap();
        }
        assert_eq!(sim.states, before);
        assert_eq!(sim.mesh.coords, coords);
        assert!(sim.velocity.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_element_plane_strain_modulus() {
        let program = LoadProgram {
            top_velocity: 1e-3,
            dt: 0.01,
            n_steps: 1,
            lateral: LateralEdges::Roller,
        };
        let mut sim = uniform(1, 1, 1.0, elastic_models(), program);
        let (v, _, _) = sim.solve(&sim.assemble(&sim.tangents()).unwrap()).unwrap();
        assert!((v[7] - 1e-3).abs() < 1e-12 && v[0].abs() < 1e-15);
        sim.step().unwrap();
        let expected = plane_strain_modulus(205_900.0, 0.3) * 1e-3 * 0.01;
        let syy = sim.states[0].stress[(1, 1)];
        assert!((syy / expected - 1.0).abs() < 1e-9, "{syy} vs {expected}");
        // reaction per unit width equals the stress
        assert!((sim.top_force / expected - 1.0).abs() < 1e-9);
        assert!((sim.top_force + sim.bottom_force).abs() < 1e-8 * sim.top_force.abs());
    }

    #[test]
    fn prescribed_velocities_are_exact() {
        let program = LoadProgram::tensile(4.0, 1e-3, 0.01, 0.1);
        let sim = uniform(4, 4, 4.0, elastic_models(), program);
        let (v, _, res) = sim.solve(&sim.assemble(&sim.tangents()).unwrap()).unwrap();
        for (d, val) in program.prescribed(&sim.mesh) {
            assert!((v[d] - val).abs() < 1e-12);
        }
        assert!(res <= RESIDUAL_TOLERANCE);
    }

    #[test]
    fn checkpoint_round_trip() {
        let program = LoadProgram::tensile(4.0, 1e-3, 0.004, 0.5);
        let models = [
            PhaseModel::new(MaterialParams::ferrite(), 4.0),
            PhaseModel::new(MaterialParams::martensite(), 4.0),
        ];
        let mut sim = uniform(2, 2, 4.0, models.clone(), program);
        sim.step().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.bin");
        sim.write_checkpoint(&path).unwrap();
        let back = Simulation::read_checkpoint(&path, models, sim.settings).unwrap();
        assert_eq!(back.states, sim.states);
        assert_eq!(back.mesh, sim.mesh);
        assert_eq!(back.step, 1);
    }
}
