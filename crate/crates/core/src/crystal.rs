//! BCC slip-system geometry, crystal orientation and resolved shear stress.

use std::fmt;
use std::io::Write;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::tensor::{outer, skew, sym, Tensor2};

/// Number of slip systems carried at every material point.
pub const N_SLIP: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SlipFamily {
    /// `{110}<111>`
    Plane110,
    /// `{112}<111>`
    Plane112,
}

impl SlipFamily {
    pub fn index(self) -> usize {
        match self {
            SlipFamily::Plane110 => 0,
            SlipFamily::Plane112 => 1,
        }
    }
}

impl fmt::Display for SlipFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlipFamily::Plane110 => write!(f, "{{110}}<111>"),
            SlipFamily::Plane112 => write!(f, "{{112}}<111>"),
        }
    }
}

/// A slip system: unit slip direction `s`, unit plane normal `m` and
/// binormal `t = s × m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlipSystem {
    pub s: Vector3<f64>,
    pub m: Vector3<f64>,
    pub t: Vector3<f64>,
    pub family: SlipFamily,
}

impl SlipSystem {
    pub fn new(s: Vector3<f64>, m: Vector3<f64>, family: SlipFamily) -> Self {
        let s = s.normalize();
        let m = m.normalize();
        SlipSystem {
            s,
            m,
            t: s.cross(&m),
            family,
        }
    }

    /// The system expressed in the frame reached by `rotation`.
    pub fn rotated(&self, rotation: &Matrix3<f64>) -> Self {
        SlipSystem {
            s: rotation * self.s,
            m: rotation * self.m,
            t: rotation * self.t,
            family: self.family,
        }
    }

    /// `s ⊗ m`
    pub fn schmid(&self) -> Tensor2 {
        outer(&self.s, &self.m)
    }
}

pub type SlipSystemSet = [SlipSystem; N_SLIP];

/// The 24 BCC slip systems in the crystal frame: 12 `{110}<111>` followed by
/// 12 `{112}<111>`. Each plane/direction pair appears once; reverse slip is
/// carried by the sign of the slip rate.
pub fn bcc_slip_systems() -> SlipSystemSet {
    let directions: [[f64; 3]; 4] = [
        [1.0, 1.0, 1.0],
        [-1.0, 1.0, 1.0],
        [1.0, -1.0, 1.0],
        [1.0, 1.0, -1.0],
    ];
    let normals_110: [[f64; 3]; 6] = [
        [0.0, 1.0, -1.0],
        [1.0, 0.0, -1.0],
        [1.0, -1.0, 0.0],
        [0.0, 1.0, 1.0],
        [1.0, 0.0, 1.0],
        [1.0, 1.0, 0.0],
    ];
    let normals_112: [[f64; 3]; 12] = [
        [1.0, 1.0, -2.0],
        [1.0, -2.0, 1.0],
        [2.0, -1.0, -1.0],
        [1.0, 1.0, 2.0],
        [1.0, -2.0, -1.0],
        [2.0, -1.0, 1.0],
        [1.0, -1.0, 2.0],
        [1.0, 2.0, 1.0],
        [2.0, 1.0, -1.0],
        [1.0, -1.0, -2.0],
        [1.0, 2.0, -1.0],
        [2.0, 1.0, 1.0],
    ];

    let mut out = Vec::with_capacity(N_SLIP);
    for (family, normals) in [
        (SlipFamily::Plane110, &normals_110[..]),
        (SlipFamily::Plane112, &normals_112[..]),
    ] {
        for d in &directions {
            let s = Vector3::from(*d);
            for n in normals {
                let m = Vector3::from(*n);
                if s.dot(&m) == 0.0 {
                    out.push(SlipSystem::new(s, m, family));
                }
            }
        }
    }
    out.try_into()
        .expect("BCC enumeration yields exactly 24 systems")
}

/// Crystal orientation as fixed-axis angles in degrees, applied about x,
/// then y, then z.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Orientation {
    pub phi_x: f64,
    pub phi_y: f64,
    pub phi_z: f64,
}

impl Orientation {
    pub fn about_z(phi_z: f64) -> Self {
        Orientation {
            phi_x: 0.0,
            phi_y: 0.0,
            phi_z,
        }
    }
}

/// `R = Rz(φz)·Ry(φy)·Rx(φx)`, mapping crystal-frame vectors to the sample frame.
pub fn rotation_matrix(o: &Orientation) -> Matrix3<f64> {
    let (sx, cx) = o.phi_x.to_radians().sin_cos();
    let (sy, cy) = o.phi_y.to_radians().sin_cos();
    let (sz, cz) = o.phi_z.to_radians().sin_cos();
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cx, -sx, 0.0, sx, cx);
    let ry = Matrix3::new(cy, 0.0, sy, 0.0, 1.0, 0.0, -sy, 0.0, cy);
    let rz = Matrix3::new(cz, -sz, 0.0, sz, cz, 0.0, 0.0, 0.0, 1.0);
    rz * ry * rx
}

/// Slip systems rotated into the sample frame.
pub fn oriented_slip_systems(o: &Orientation) -> SlipSystemSet {
    let r = rotation_matrix(o);
    bcc_slip_systems().map(|sys| sys.rotated(&r))
}

/// Symmetric and antisymmetric parts of `s ⊗ m`.
pub fn schmid_tensors(sys: &SlipSystem) -> (Tensor2, Tensor2) {
    let p = sys.schmid();
    (sym(&p), skew(&p))
}

/// `τ = s · (T m)`
pub fn resolved_shear_stress(stress: &Tensor2, sys: &SlipSystem) -> f64 {
    sys.s.dot(&(stress * sys.m))
}

/// Writes `index,family,s_x,..,t_z` rows for every system.
pub fn write_slip_systems_csv<W: Write>(systems: &SlipSystemSet, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "index", "family", "s_x", "s_y", "s_z", "m_x", "m_y", "m_z", "t_x", "t_y", "t_z",
    ])?;
    for (i, sys) in systems.iter().enumerate() {
        let mut row = vec![i.to_string(), sys.family.to_string()];
        for v in [&sys.s, &sys.m, &sys.t] {
            row.extend(v.iter().map(|c| c.to_string()));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
