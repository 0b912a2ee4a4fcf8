//! Initial slip resistance from the Bailey-Hirsch relation for both phases
//! and both slip families, compared with the tabulated starting values.

use dpcp::constitutive::{bailey_hirsch_flow_stress, MaterialParams, PhaseModel};
use dpcp::crystal::N_SLIP;
use dpcp::dislocation::SlipVector;

fn main() {
    for (name, params) in [("ferrite", MaterialParams::ferrite()), ("martensite", MaterialParams::martensite())] {
        let model = PhaseModel::new(params, 80.0);
        let rho: SlipVector = [params.rho0; N_SLIP];
        let g = bailey_hirsch_flow_stress(
            &model.friction,
            &rho,
            &model.hardening_interaction,
            params.hardening_coefficient,
            params.shear_modulus(),
            params.burgers,
        );
        // System 0 is {110}, system 12 is {112}
        for (family, k) in [("{110}", 0), ("{112}", 1)] {
            let computed = g[12 * k];
            let table = params.initial_flow_stress[k];
            println!(
                "{name:>10} {family}: g = {computed:8.4} MPa, table {table:5.1} MPa ({:+.3}%)",
                100.0 * (computed / table - 1.0)
            );
        }
    }
}
