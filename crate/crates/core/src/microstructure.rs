//! Two-phase hexagonal microstructure on a structured element grid.
//!
//! Ferrite grains are flat-top hexagonal cells of a regular lattice. The
//! martensite network is the set of elements whose centre lies within a band
//! of half-width `w` around the cell edges; `w` is found by bisection so that
//! the rasterised martensite area fraction meets the target. The lattice
//! spacing is chosen so that the ideal ferrite island left inside each cell
//! has an across-flats size of `d_F`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::crystal::Orientation;
use crate::error::{Error, Result};

/// Admissible rotation angles about z, degrees.
pub const PHI_Z_CHOICES: [f64; 7] = [0.0, 15.0, 30.0, 45.0, 60.0, 75.0, 90.0];

/// Martensite fraction tolerance on the raster.
pub const FRACTION_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Ferrite,
    Martensite,
}

impl Phase {
    pub fn index(self) -> usize {
        match self {
            Phase::Ferrite => 0,
            Phase::Martensite => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Phase::Ferrite => "ferrite",
            Phase::Martensite => "martensite",
        }
    }
}

/// Flat-top hexagonal lattice. Columns are `1.5·a` apart (`a` = side
/// length), odd columns are shifted up by half the spacing.
#[derive(Debug, Clone)]
pub struct HexLattice {
    /// Centre-to-centre distance, equal to the cell across-flats size.
    pub spacing: f64,
    pub origin: [f64; 2],
    col_min: i64,
    row_min: i64,
    n_cols: i64,
    n_rows: i64,
}

const EDGE_NORMALS: [[f64; 2]; 3] = [
    [0.866_025_403_784_438_6, 0.5],
    [0.0, 1.0],
    [-0.866_025_403_784_438_6, 0.5],
];

impl HexLattice {
    /// Lattice whose cells cover `[0, extent]²` with one cell centred at `origin`.
    pub fn covering(spacing: f64, origin: [f64; 2], extent: f64) -> Self {
        let side = spacing / 3f64.sqrt();
        let dc = 1.5 * side;
        let col_min = ((0.0 - origin[0]) / dc).floor() as i64 - 1;
        let col_max = ((extent - origin[0]) / dc).ceil() as i64 + 1;
        let row_min = ((0.0 - origin[1]) / spacing).floor() as i64 - 1;
        let row_max = ((extent - origin[1]) / spacing).ceil() as i64 + 1;
        HexLattice {
            spacing,
            origin,
            col_min,
            row_min,
            n_cols: col_max - col_min + 1,
            n_rows: row_max - row_min + 1,
        }
    }

    fn column_pitch(&self) -> f64 {
        1.5 * self.spacing / 3f64.sqrt()
    }

    fn column_offset(&self, col: i64) -> f64 {
        if col.rem_euclid(2) == 1 {
            0.5 * self.spacing
        } else {
            0.0
        }
    }

    pub fn len(&self) -> usize {
        (self.n_cols * self.n_rows) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn id_of(&self, col: i64, row: i64) -> Option<usize> {
        let c = col - self.col_min;
        let r = row - self.row_min;
        if c < 0 || r < 0 || c >= self.n_cols || r >= self.n_rows {
            None
        } else {
            Some((c * self.n_rows + r) as usize)
        }
    }

    fn center_of(&self, col: i64, row: i64) -> [f64; 2] {
        [
            self.origin[0] + col as f64 * self.column_pitch(),
            self.origin[1] + self.column_offset(col) + row as f64 * self.spacing,
        ]
    }

    /// Centre of cell `id`.
    pub fn center(&self, id: usize) -> [f64; 2] {
        let id = id as i64;
        self.center_of(self.col_min + id / self.n_rows, self.row_min + id % self.n_rows)
    }

    /// All centres indexed by id.
    pub fn centers(&self) -> Vec<[f64; 2]> {
        (0..self.len()).map(|i| self.center(i)).collect()
    }

    /// Distance from `p` to the nearest edge of the cell centred at `c`.
    pub fn edge_distance(&self, c: [f64; 2], p: [f64; 2]) -> f64 {
        let d = [p[0] - c[0], p[1] - c[1]];
        let reach = EDGE_NORMALS
            .iter()
            .map(|n| (n[0] * d[0] + n[1] * d[1]).abs())
            .fold(0.0, f64::max);
        0.5 * self.spacing - reach
    }
}

/// Id of the nearest lattice centre (hexagonal Voronoi cell) to `point`,
/// ties resolved to the lowest id.
pub fn rasterize_hex_assignment(lattice: &HexLattice, point: [f64; 2]) -> usize {
    let pitch = lattice.column_pitch();
    let col0 = ((point[0] - lattice.origin[0]) / pitch).round() as i64;
    let mut best: Option<(f64, usize)> = None;
    for col in (col0 - 1)..=(col0 + 1) {
        let off = lattice.column_offset(col);
        let row0 = ((point[1] - lattice.origin[1] - off) / lattice.spacing).round() as i64;
        for row in (row0 - 1)..=(row0 + 1) {
            let Some(id) = lattice.id_of(col, row) else {
                continue;
            };
            let c = lattice.center_of(col, row);
            let d2 = (point[0] - c[0]).powi(2) + (point[1] - c[1]).powi(2);
            let better = match best {
                None => true,
                Some((bd, bid)) => d2 < bd || (d2 == bd && id < bid),
            };
            if better {
                best = Some((d2, id));
            }
        }
    }
    best.map(|(_, id)| id)
        .expect("point lies inside the lattice coverage")
}

/// Inputs to [`generate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MicrostructureSpec {
    pub domain_size: f64,
    pub nx: usize,
    pub ny: usize,
    pub d_ferrite: f64,
    pub d_martensite: f64,
    pub martensite_fraction: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Microstructure {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub phase: Vec<Phase>,
    pub grain_id: Vec<usize>,
    pub orientation: Vec<Orientation>,
    /// Calibrated martensite band half-width (μm); zero when all ferrite.
    pub band_half_width: f64,
    /// Hexagonal lattice spacing (μm).
    pub cell_spacing: f64,
}

impl Microstructure {
    /// Single-phase, single-orientation grid.
    pub fn uniform(
        domain_size: f64,
        nx: usize,
        ny: usize,
        phase: Phase,
        orientation: Orientation,
    ) -> Self {
        let n = nx * ny;
        Microstructure {
            nx,
            ny,
            dx: domain_size / nx as f64,
            dy: domain_size / ny as f64,
            phase: vec![phase; n],
            grain_id: vec![0; n],
            orientation: vec![orientation; n],
            band_half_width: 0.0,
            cell_spacing: 0.0,
        }
    }

    pub fn n_elements(&self) -> usize {
        self.nx * self.ny
    }

    /// Element index for column `i`, row `j` (row-major, `j = 0` at the bottom).
    pub fn element(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn element_center(&self, e: usize) -> [f64; 2] {
        let i = e % self.nx;
        let j = e / self.nx;
        [(i as f64 + 0.5) * self.dx, (j as f64 + 0.5) * self.dy]
    }

    pub fn count(&self, phase: Phase) -> usize {
        self.phase.iter().filter(|&&p| p == phase).count()
    }

    pub fn martensite_fraction(&self) -> f64 {
        self.count(Phase::Martensite) as f64 / self.n_elements() as f64
    }

    pub fn n_grains(&self) -> usize {
        self.grain_id.iter().max().map_or(0, |m| m + 1)
    }

    /// Writes `element,x,y,phase,grain_id,phi_z` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["element", "x_um", "y_um", "phase", "grain_id", "phi_z_deg"])?;
        for e in 0..self.n_elements() {
            let c = self.element_center(e);
            w.write_record([
                e.to_string(),
                c[0].to_string(),
                c[1].to_string(),
                self.phase[e].name().to_string(),
                self.grain_id[e].to_string(),
                self.orientation[e].phi_z.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn fraction_below(distances: &[f64], w: f64) -> f64 {
    distances.iter().filter(|&&d| d < w).count() as f64 / distances.len() as f64
}

/// Builds the two-phase hexagonal microstructure.
pub fn generate(spec: &MicrostructureSpec) -> Result<Microstructure> {
    let MicrostructureSpec {
        domain_size,
        nx,
        ny,
        d_ferrite,
        d_martensite,
        martensite_fraction: target,
        seed,
    } = *spec;
    if nx < 16 || ny < 16 {
        return Err(Error::Microstructure(format!(
            "grid {nx}x{ny} too coarse, need at least 16 elements per axis"
        )));
    }
    if !(domain_size > 0.0 && d_ferrite > 0.0 && d_martensite > 0.0) {
        return Err(Error::Microstructure(
            "domain size and grain sizes must be positive".into(),
        ));
    }
    if !(0.0..1.0).contains(&target) {
        return Err(Error::Microstructure(format!(
            "martensite fraction {target} outside [0, 1)"
        )));
    }

    let spacing = d_ferrite / (1.0 - target).sqrt();
    let ratio = domain_size / spacing;
    if (ratio - ratio.round()).abs() > 1e-6 {
        log::warn!(
            "hexagon spacing {spacing:.4} um does not divide the {domain_size} um domain; tiling is clipped"
        );
    }
    let lattice = HexLattice::covering(spacing, [0.5 * domain_size, 0.5 * domain_size], domain_size);

    let mut ms = Microstructure::uniform(domain_size, nx, ny, Phase::Ferrite, Orientation::default());
    ms.cell_spacing = spacing;
    let n = ms.n_elements();

    let mut cell = Vec::with_capacity(n);
    let mut distances = Vec::with_capacity(n);
    for e in 0..n {
        let p = ms.element_center(e);
        let id = rasterize_hex_assignment(&lattice, p);
        cell.push(id);
        distances.push(lattice.edge_distance(lattice.center(id), p));
    }

    let half_width = if target == 0.0 {
        0.0
    } else {
        calibrate_band(&distances, target, 0.5 * spacing)?
    };
    for (slot, &d) in ms.phase.iter_mut().zip(&distances) {
        if d < half_width {
            *slot = Phase::Martensite;
        }
    }
    ms.band_half_width = half_width;

    // Grain keys: ferrite by hexagon, martensite by square blocks of ~d_M.
    let block = ((d_martensite / ms.dx).round() as usize).max(1);
    let mut key_to_id = std::collections::HashMap::new();
    for e in 0..n {
        let key = match ms.phase[e] {
            Phase::Ferrite => (0usize, cell[e]),
            Phase::Martensite => {
                let i = e % nx / block;
                let j = e / nx / block;
                (1usize, j * nx.div_ceil(block) + i)
            }
        };
        let next = key_to_id.len();
        ms.grain_id[e] = *key_to_id.entry(key).or_insert(next);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grain_orientation: Vec<Orientation> = (0..key_to_id.len())
        .map(|_| Orientation::about_z(PHI_Z_CHOICES[rng.gen_range(0..PHI_Z_CHOICES.len())]))
        .collect();
    for e in 0..n {
        ms.orientation[e] = grain_orientation[ms.grain_id[e]];
    }
    Ok(ms)
}

/// Smallest band half-width whose raster fraction reaches the target, or
/// the neighbouring step below it when that one is closer.
fn calibrate_band(distances: &[f64], target: f64, max_width: f64) -> Result<f64> {
    let mut lo = 0.0;
    let mut hi = max_width;
    if fraction_below(distances, hi) < target {
        return Err(Error::Calibration {
            achieved: fraction_below(distances, hi),
            target,
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if fraction_below(distances, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let above = fraction_below(distances, hi);
    let below = fraction_below(distances, lo);
    let (w, achieved) = if (target - below).abs() < (above - target).abs() {
        (lo, below)
    } else {
        (hi, above)
    };
    if (achieved - target).abs() > FRACTION_TOLERANCE {
        return Err(Error::Calibration { achieved, target });
    }
    Ok(w)
}

/// Length of element edges separating ferrite from martensite, per unit area.
pub fn boundary_length_per_area(ms: &Microstructure) -> f64 {
    let mut length = 0.0;
    for j in 0..ms.ny {
        for i in 0..ms.nx {
            let e = ms.element(i, j);
            if i + 1 < ms.nx && ms.phase[e] != ms.phase[ms.element(i + 1, j)] {
                length += ms.dy;
            }
            if j + 1 < ms.ny && ms.phase[e] != ms.phase[ms.element(i, j + 1)] {
                length += ms.dx;
            }
        }
    }
    length / (ms.nx as f64 * ms.dx * ms.ny as f64 * ms.dy)
}
