//! Phase-partitioned averages, equivalent measures, stress-strain curves and
//! field snapshots.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::Simulation;
use crate::microstructure::Phase;
use crate::tensor::{ddot, deviator, Tensor2};

/// `σ_yy = E·ε^e_yy`
pub fn axial_stress_from_elastic_strain(young: f64, elastic_strain_yy: f64) -> f64 {
    young * elastic_strain_yy
}

/// Unweighted mean over the elements of one phase.
pub fn phase_average(field: &[f64], phase: &[Phase], which: Phase) -> Result<f64> {
    let (sum, n) = field
        .iter()
        .zip(phase)
        .filter(|(_, &p)| p == which)
        .fold((0.0, 0usize), |(s, n), (v, _)| (s + v, n + 1));
    if n == 0 {
        return Err(Error::EmptyPhase(which.name()));
    }
    Ok(sum / n as f64)
}

pub fn mean(field: &[f64]) -> f64 {
    field.iter().sum::<f64>() / field.len() as f64
}

/// von Mises equivalent stress `√(3/2 s:s)`.
pub fn equivalent_stress(t: &Tensor2) -> f64 {
    let s = deviator(t);
    (1.5 * ddot(&s, &s)).sqrt()
}

/// Equivalent strain `√(2/3 e:e)` of the deviatoric part.
pub fn equivalent_strain(e: &Tensor2) -> f64 {
    let d = deviator(e);
    (2.0 / 3.0 * ddot(&d, &d)).sqrt()
}

pub fn equivalent_measures(stress: &Tensor2, strain: &Tensor2) -> (f64, f64) {
    (equivalent_stress(stress), equivalent_strain(strain))
}

/// Reaction per unit thickness divided by the initial width.
pub fn nominal_stress(reaction: f64, initial_width: f64) -> f64 {
    reaction / initial_width
}

/// Per-element fields, each averaged over the element's integration points.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementFields {
    pub phase: Vec<Phase>,
    /// Hooke's-law axial stress from the elastic strain (MPa).
    pub sigma_yy: Vec<f64>,
    pub stress_eq: Vec<f64>,
    pub strain_eq: Vec<f64>,
    /// Net GN density summed over slip systems (μm⁻²).
    pub rho_g: Vec<f64>,
    /// SS density summed over slip systems (μm⁻²).
    pub rho_s: Vec<f64>,
}

pub fn element_fields(sim: &Simulation) -> ElementFields {
    let n = sim.n_elements();
    let mut f = ElementFields {
        phase: sim.phase.clone(),
        sigma_yy: Vec::with_capacity(n),
        stress_eq: Vec::with_capacity(n),
        strain_eq: Vec::with_capacity(n),
        rho_g: Vec::with_capacity(n),
        rho_s: Vec::with_capacity(n),
    };
    for (e, pts) in sim.states.chunks(4).enumerate() {
        let young = sim.models[sim.phase[e].index()].params.young;
        let avg = |g: &dyn Fn(usize) -> f64| (0..4).map(g).sum::<f64>() / 4.0;
        let stress = pts.iter().map(|s| s.stress).sum::<Tensor2>() / 4.0;
        let strain = pts.iter().map(|s| s.strain).sum::<Tensor2>() / 4.0;
        f.sigma_yy.push(axial_stress_from_elastic_strain(
            young,
            avg(&|q| pts[q].elastic_strain[(1, 1)]),
        ));
        f.stress_eq.push(equivalent_stress(&stress));
        f.strain_eq.push(equivalent_strain(&strain));
        f.rho_g.push(avg(&|q| pts[q].dislocations.gn_total()));
        f.rho_s.push(avg(&|q| pts[q].dislocations.ss_total()));
    }
    f
}

/// One line of the stress-strain / density history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub step: usize,
    pub t_s: f64,
    pub strain_nominal: f64,
    pub eps_eq: f64,
    pub sigma_n_mpa: f64,
    pub sigma_yy_mpa: f64,
    pub sigma_yy_f_mpa: f64,
    pub sigma_yy_m_mpa: f64,
    pub eps_eq_f: f64,
    pub eps_eq_m: f64,
    pub rho_g_f_per_um2: f64,
    pub rho_g_m_per_um2: f64,
    pub rho_s_f_per_um2: f64,
    pub rho_s_m_per_um2: f64,
}

pub const CURVE_HEADER: [&str; 14] = [
    "step",
    "t_s",
    "strain_nominal",
    "eps_eq",
    "sigma_n_MPa",
    "sigma_yy_MPa",
    "sigma_yy_F_MPa",
    "sigma_yy_M_MPa",
    "eps_eq_F",
    "eps_eq_M",
    "rho_G_F_per_um2",
    "rho_G_M_per_um2",
    "rho_S_F_per_um2",
    "rho_S_M_per_um2",
];

impl CurveRow {
    /// Phase averages of a phase without elements are NaN.
    pub fn from_fields(sim: &Simulation, fields: &ElementFields) -> Self {
        let by_phase = |field: &[f64], p: Phase| phase_average(field, &fields.phase, p).unwrap_or(f64::NAN);
        let both = |field: &[f64]| (by_phase(field, Phase::Ferrite), by_phase(field, Phase::Martensite));
        let (sf, sm) = both(&fields.sigma_yy);
        let (ef, em) = both(&fields.strain_eq);
        let (gf, gm) = both(&fields.rho_g);
        let (rf, rm) = both(&fields.rho_s);
        CurveRow {
            step: sim.step,
            t_s: sim.time,
            strain_nominal: sim.time * sim.program.top_velocity / sim.mesh.height,
            eps_eq: mean(&fields.strain_eq),
            sigma_n_mpa: nominal_stress(sim.top_force, sim.mesh.width),
            sigma_yy_mpa: mean(&fields.sigma_yy),
            sigma_yy_f_mpa: sf,
            sigma_yy_m_mpa: sm,
            eps_eq_f: ef,
            eps_eq_m: em,
            rho_g_f_per_um2: gf,
            rho_g_m_per_um2: gm,
            rho_s_f_per_um2: rf,
            rho_s_m_per_um2: rm,
        }
    }

    pub fn values(&self) -> [f64; 13] {
        [
            self.t_s,
            self.strain_nominal,
            self.eps_eq,
            self.sigma_n_mpa,
            self.sigma_yy_mpa,
            self.sigma_yy_f_mpa,
            self.sigma_yy_m_mpa,
            self.eps_eq_f,
            self.eps_eq_m,
            self.rho_g_f_per_um2,
            self.rho_g_m_per_um2,
            self.rho_s_f_per_um2,
            self.rho_s_m_per_um2,
        ]
    }

    fn record(&self) -> Vec<String> {
        std::iter::once(self.step.to_string())
            .chain(self.values().iter().map(|v| v.to_string()))
            .collect()
    }
}

/// Streams curve rows to CSV, flushing after every row so that an aborted
/// run keeps its history.
pub struct CurveWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> CurveWriter<W> {
    pub fn new(out: W) -> csv::Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(CURVE_HEADER)?;
        inner.flush()?;
        Ok(CurveWriter { inner })
    }

    pub fn push(&mut self, row: &CurveRow) -> csv::Result<()> {
        self.inner.write_record(row.record())?;
        self.inner.flush()?;
        Ok(())
    }
}

pub fn export_curves(rows: &[CurveRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = CurveWriter::new(file).map_err(|e| Error::format(path, e.to_string()))?;
    for r in rows {
        w.push(r).map_err(|e| Error::format(path, e.to_string()))?;
    }
    Ok(())
}

pub fn read_curves(path: &Path) -> Result<Vec<CurveRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let header = rdr.headers().map_err(|e| Error::format(path, e.to_string()))?;
    if header.iter().ne(CURVE_HEADER) {
        return Err(Error::format(path, "unexpected curve header"));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::format(path, e.to_string()))?;
        let parse = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|_| Error::format(path, format!("bad number `{}`", &rec[i])))
        };
        let v: Vec<f64> = (1..CURVE_HEADER.len()).map(parse).collect::<Result<_>>()?;
        rows.push(CurveRow {
            step: rec[0]
                .parse()
                .map_err(|_| Error::format(path, format!("bad step `{}`", &rec[0])))?,
            t_s: v[0],
            strain_nominal: v[1],
            eps_eq: v[2],
            sigma_n_mpa: v[3],
            sigma_yy_mpa: v[4],
            sigma_yy_f_mpa: v[5],
            sigma_yy_m_mpa: v[6],
            eps_eq_f: v[7],
            eps_eq_m: v[8],
            rho_g_f_per_um2: v[9],
            rho_g_m_per_um2: v[10],
            rho_s_f_per_um2: v[11],
            rho_s_m_per_um2: v[12],
        });
    }
    Ok(rows)
}

/// Cell fields on an `nx × ny` grid written as a VTK legacy ASCII
/// structured-points dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub nx: usize,
    pub ny: usize,
    pub spacing: [f64; 2],
    pub fields: Vec<(String, Vec<f64>)>,
}

impl Snapshot {
    pub fn from_simulation(sim: &Simulation, grain_id: &[usize]) -> Self {
        let f = element_fields(sim);
        let mesh = &sim.mesh;
        Snapshot {
            nx: mesh.nx,
            ny: mesh.ny,
            spacing: [mesh.width / mesh.nx as f64, mesh.height / mesh.ny as f64],
            fields: vec![
                ("stress_eq".into(), f.stress_eq),
                ("strain_eq".into(), f.strain_eq),
                ("sigma_yy".into(), f.sigma_yy),
                ("rho_G".into(), f.rho_g),
                ("rho_S".into(), f.rho_s),
                ("phase".into(), f.phase.iter().map(|p| p.index() as f64).collect()),
                ("grain_id".into(), grain_id.iter().map(|&g| g as f64).collect()),
            ],
        }
    }

    pub fn field(&self, name: &str) -> Option<&[f64]> {
        self.fields.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn write_vtk<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# vtk DataFile Version 3.0")?;
        writeln!(out, "dpcp cell fields")?;
        writeln!(out, "ASCII")?;
        writeln!(out, "DATASET STRUCTURED_POINTS")?;
        writeln!(out, "DIMENSIONS {} {} 1", self.nx + 1, self.ny + 1)?;
        writeln!(out, "ORIGIN 0 0 0")?;
        writeln!(out, "SPACING {} {} 1", self.spacing[0], self.spacing[1])?;
        writeln!(out, "CELL_DATA {}", self.nx * self.ny)?;
        for (name, values) in &self.fields {
            writeln!(out, "SCALARS {name} double 1")?;
            writeln!(out, "LOOKUP_TABLE default")?;
            for v in values {
                writeln!(out, "{v}")?;
            }
        }
        Ok(())
    }

    pub fn export(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_vtk(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    /// Reads files produced by [`Snapshot::write_vtk`].
    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let bad = |m: &str| Error::format(path, m.to_string());
        let mut lines = Vec::new();
        for l in BufReader::new(file).lines() {
            lines.push(l.map_err(|e| Error::io(path, e))?);
        }
        let mut it = lines.iter().map(|l| l.trim()).filter(|l| !l.is_empty());
        let mut header = |prefix: &str| -> Result<Vec<String>> {
            loop {
                let l = it.next().ok_or_else(|| bad(&format!("missing {prefix}")))?;
                if let Some(rest) = l.strip_prefix(prefix) {
                    return Ok(rest.split_whitespace().map(str::to_string).collect());
                }
            }
        };
        let dims = header("DIMENSIONS")?;
        let spacing = header("SPACING")?;
        let cells = header("CELL_DATA")?;
        let parse_usize = |s: &str| s.parse::<usize>().map_err(|_| bad("bad integer"));
        let parse_f64 = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
        let (nx, ny) = (parse_usize(&dims[0])? - 1, parse_usize(&dims[1])? - 1);
        let n = parse_usize(&cells[0])?;
        if n != nx * ny {
            return Err(bad("cell count does not match dimensions"));
        }
        let spacing = [parse_f64(&spacing[0])?, parse_f64(&spacing[1])?];
        let mut fields = Vec::new();
        while let Some(l) = it.next() {
            let name = l
                .strip_prefix("SCALARS ")
                .and_then(|r| r.split_whitespace().next())
                .ok_or_else(|| bad("expected SCALARS"))?
                .to_string();
            it.next();
            let values = (0..n)
                .map(|_| it.next().ok_or_else(|| bad("truncated field")).and_then(parse_f64))
                .collect::<Result<Vec<f64>>>()?;
            fields.push((name, values));
        }
        Ok(Snapshot {
            nx,
            ny,
            spacing,
            fields,
        })
    }
}
