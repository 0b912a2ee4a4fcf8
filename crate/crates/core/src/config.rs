//! Simulation configuration: TOML sections layered over a named preset.
//!
//! A config file may set any subset of keys; everything else comes from the
//! preset (`paper` unless the file or the caller picks another). Unknown
//! keys and invalid values are all reported together, each with the line
//! it appears on.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constitutive::{MaterialParams, PhaseModel};
use crate::error::{ConfigIssue, Error, Result};
use crate::fem::{LateralEdges, LoadProgram, StepSettings};
use crate::microstructure::MicrostructureSpec;

/// Environment variable holding the root for relative output directories.
pub const OUTPUT_ROOT_VAR: &str = "DPCP_OUTPUT_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Full resolution and load program.
    Paper,
    /// Reduced grid, 2% strain and a tenfold time step.
    Desk,
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "paper" => Ok(Preset::Paper),
            "desk" => Ok(Preset::Desk),
            other => Err(format!("unknown preset `{other}` (expected `paper` or `desk`)")),
        }
    }
}

impl Preset {
    pub fn config(self) -> SimulationConfig {
        let paper = SimulationConfig::default();
        match self {
            Preset::Paper => paper,
            Preset::Desk => SimulationConfig {
                geometry: GeometryConfig {
                    nx: DESK_GRID,
                    ny: DESK_GRID,
                    ..paper.geometry
                },
                loading: LoadingConfig {
                    time_step: 0.1,
                    elongation: 1.6,
                    ..paper.loading
                },
                ..paper
            },
        }
    }
}

/// Elements per side in the desk preset.
pub const DESK_GRID: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    /// Side of the square plate (μm).
    pub domain_size: f64,
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicrostructureConfig {
    pub d_ferrite: f64,
    pub d_martensite: f64,
    pub martensite_fraction: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadingConfig {
    pub time_step: f64,
    /// Nominal strain rate (s⁻¹).
    pub strain_rate: f64,
    /// Total top-surface displacement (μm).
    pub elongation: f64,
    pub lateral: LateralEdges,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interaction {
    /// Ω = identity.
    SelfOnly,
    /// Unit diagonal, `latent_ratio` elsewhere.
    UniformLatent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub theta: f64,
    pub rotate_lattice: bool,
    pub interaction: Interaction,
    pub latent_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Relative paths are resolved against `$DPCP_OUTPUT_ROOT` when set.
    pub output_dir: String,
    /// Steps between field snapshots; 0 writes only the first and last.
    pub snapshot_interval: usize,
    /// Steps between checkpoints; 0 disables them.
    pub checkpoint_interval: usize,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub geometry: GeometryConfig,
    pub microstructure: MicrostructureConfig,
    pub loading: LoadingConfig,
    pub model: ModelConfig,
    pub run: RunConfig,
    pub ferrite: MaterialParams,
    pub martensite: MaterialParams,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            geometry: GeometryConfig {
                domain_size: 80.0,
                nx: 64,
                ny: 64,
            },
            microstructure: MicrostructureConfig {
                d_ferrite: 15.0,
                d_martensite: 3.125,
                martensite_fraction: 0.44,
                seed: 1,
            },
            loading: LoadingConfig {
                time_step: 0.01,
                strain_rate: 1.0e-4,
                elongation: 4.0,
                lateral: LateralEdges::Free,
            },
            model: ModelConfig {
                theta: 0.5,
                rotate_lattice: false,
                interaction: Interaction::SelfOnly,
                latent_ratio: 0.0,
            },
            run: RunConfig {
                output_dir: "dpcp-out".into(),
                snapshot_interval: 0,
                checkpoint_interval: 0,
                threads: 0,
            },
            ferrite: MaterialParams::ferrite(),
            martensite: MaterialParams::martensite(),
        }
    }
}

impl SimulationConfig {
    pub fn microstructure_spec(&self) -> MicrostructureSpec {
        MicrostructureSpec {
            domain_size: self.geometry.domain_size,
            nx: self.geometry.nx,
            ny: self.geometry.ny,
            d_ferrite: self.microstructure.d_ferrite,
            d_martensite: self.microstructure.d_martensite,
            martensite_fraction: self.microstructure.martensite_fraction,
            seed: self.microstructure.seed,
        }
    }

    pub fn phase_models(&self) -> [PhaseModel; 2] {
        let latent = match self.model.interaction {
            Interaction::SelfOnly => 0.0,
            Interaction::UniformLatent => self.model.latent_ratio,
        };
        let size = self.geometry.domain_size;
        [self.ferrite, self.martensite].map(|p| PhaseModel::new(p, size).with_latent_hardening(latent))
    }

    pub fn load_program(&self) -> LoadProgram {
        let l = &self.loading;
        LoadProgram {
            lateral: l.lateral,
            ..LoadProgram::tensile(self.geometry.domain_size, l.strain_rate, l.elongation, l.time_step)
        }
    }

    pub fn step_settings(&self) -> StepSettings {
        StepSettings {
            theta: self.model.theta,
            rotate_lattice: self.model.rotate_lattice,
        }
    }

    /// Output directory with the environment root applied.
    pub fn output_dir(&self) -> PathBuf {
        let dir = PathBuf::from(&self.run.output_dir);
        match std::env::var_os(OUTPUT_ROOT_VAR) {
            Some(root) if dir.is_relative() => PathBuf::from(root).join(dir),
            _ => dir,
        }
    }

    /// Canonical TOML text.
    pub fn dump(&self) -> String {
        toml::to_string(self).expect("configuration serialises to TOML")
    }

    /// SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.dump().as_bytes()))
    }

    /// Every out-of-range value as `(section.key, message)`.
    pub fn violations(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut need = |ok: bool, field: &str, msg: &str| {
            if !ok {
                out.push((field.to_string(), msg.to_string()));
            }
        };
        let positive = "must be positive and finite";
        let g = &self.geometry;
        need(g.domain_size > 0.0 && g.domain_size.is_finite(), "geometry.domain_size", positive);
        need(g.nx >= 16, "geometry.nx", "must be at least 16");
        need(g.ny >= 16, "geometry.ny", "must be at least 16");
        let m = &self.microstructure;
        need(m.d_ferrite > 0.0 && m.d_ferrite.is_finite(), "microstructure.d_ferrite", positive);
        need(m.d_martensite > 0.0 && m.d_martensite.is_finite(), "microstructure.d_martensite", positive);
        need(
            (0.0..1.0).contains(&m.martensite_fraction),
            "microstructure.martensite_fraction",
            "must lie in [0, 1)",
        );
        let l = &self.loading;
        need(l.time_step > 0.0 && l.time_step.is_finite(), "loading.time_step", positive);
        need(l.strain_rate > 0.0 && l.strain_rate.is_finite(), "loading.strain_rate", positive);
        need(l.elongation >= 0.0 && l.elongation.is_finite(), "loading.elongation", "must be non-negative");
        need((0.0..=1.0).contains(&self.model.theta), "model.theta", "must lie in [0, 1]");
        need(self.model.latent_ratio >= 0.0, "model.latent_ratio", "must be non-negative");
        for (name, p) in [("ferrite", &self.ferrite), ("martensite", &self.martensite)] {
            if let Err((field, msg)) = p.validate() {
                out.push((format!("{name}.{field}"), msg));
            }
        }
        out
    }
}

/// Parses and validates a config file, layering it over `preset` (or the
/// file's own `preset` key, or `paper`).
pub fn parse_config(text: &str, preset: Option<Preset>) -> Result<SimulationConfig> {
    let issue = |line, field: &str, message: String| ConfigIssue {
        line,
        field: field.to_string(),
        message,
    };
    let mut user: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        let line = e.span().map(|s| line_of(text, s.start));
        Error::Config(vec![issue(line, "<syntax>", e.message().to_string())])
    })?;

    let mut issues = Vec::new();
    let file_preset = match user.remove("preset") {
        None => None,
        Some(toml::Value::String(s)) => match s.parse::<Preset>() {
            Ok(p) => Some(p),
            Err(m) => {
                issues.push(issue(locate(text, None, "preset"), "preset", m));
                None
            }
        },
        Some(_) => {
            issues.push(issue(locate(text, None, "preset"), "preset", "must be a string".into()));
            None
        }
    };
    let base = preset.or(file_preset).unwrap_or(Preset::Paper).config();
    let mut merged = toml::Table::try_from(&base).expect("configuration serialises to a table");

    for (section, value) in user {
        let Some(toml::Value::Table(base_section)) = merged.get_mut(&section) else {
            issues.push(issue(locate(text, None, &section), &section, "unknown key".into()));
            continue;
        };
        let toml::Value::Table(entries) = value else {
            issues.push(issue(locate(text, None, &section), &section, "expected a table".into()));
            continue;
        };
        for (key, v) in entries {
            let field = format!("{section}.{key}");
            let line = locate(text, Some(&section), &key);
            match base_section.get(&key) {
                None => issues.push(issue(line, &field, "unknown key".into())),
                Some(default) => match coerce(default, v) {
                    Ok(v) => {
                        base_section.insert(key, v);
                    }
                    Err(m) => issues.push(issue(line, &field, m)),
                },
            }
        }
    }
    // Range checks run even when structural issues were found so every
    // problem is reported in one pass.
    match toml::Value::Table(merged.clone()).try_into::<SimulationConfig>() {
        Ok(config) => {
            for (field, message) in config.violations() {
                let (section, key) = field.split_once('.').unwrap_or(("", &field));
                let key = key.split('.').next().unwrap_or(key);
                issues.push(issue(locate(text, Some(section), key), &field, message));
            }
            if issues.is_empty() {
                log::info!("effective configuration:\n{}", config.dump());
                return Ok(config);
            }
        }
        Err(e) => issues.push(issue(find_bad_enum(text, &merged), "<value>", e.message().to_string())),
    }
    issues.sort_by_key(|i| i.line);
    Err(Error::Config(issues))
}

pub fn load_config(path: &Path, preset: Option<Preset>) -> Result<SimulationConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, preset)
}

/// Checks `value` against the type of `default`; integers are accepted
/// where floats are expected.
fn coerce(default: &toml::Value, value: toml::Value) -> std::result::Result<toml::Value, String> {
    use toml::Value as V;
    match (default, value) {
        (V::Float(_), V::Integer(i)) => Ok(V::Float(i as f64)),
        (V::Float(_), v @ V::Float(_)) => Ok(v),
        (V::Integer(_), v @ V::Integer(i)) if i >= 0 => Ok(v),
        (V::Integer(_), V::Integer(_)) => Err("must be non-negative".into()),
        (V::Boolean(_), v @ V::Boolean(_)) => Ok(v),
        (V::String(_), v @ V::String(_)) => Ok(v),
        (V::Array(d), V::Array(a)) if d.len() == a.len() => a
            .into_iter()
            .zip(d)
            .map(|(x, dx)| coerce(dx, x))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(V::Array),
        (V::Array(d), V::Array(_)) => Err(format!("expected an array of {} values", d.len())),
        (d, v) => Err(format!("expected {}, found {}", d.type_str(), v.type_str())),
    }
}

/// 1-based line of a byte offset.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line where `key` is assigned inside `[section]` (or at top level, or as
/// a section header when `section` is `None`).
fn locate(text: &str, section: Option<&str>, key: &str) -> Option<usize> {
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim().to_string();
            if section.is_none() && name == key {
                return Some(i + 1);
            }
            current = Some(name);
            continue;
        }
        let Some((lhs, _)) = line.split_once('=') else {
            continue;
        };
        let lhs = lhs.trim().trim_matches('"');
        match (section, current.as_deref()) {
            (Some(s), Some(c)) if s == c && lhs == key => return Some(i + 1),
            (Some(s), None) if lhs == format!("{s}.{key}") => return Some(i + 1),
            (None, None) if lhs == key => return Some(i + 1),
            _ => {}
        }
    }
    None
}

/// Line of the first string-valued key whose value does not deserialise.
fn find_bad_enum(text: &str, merged: &toml::Table) -> Option<usize> {
    for (section, key) in [("loading", "lateral"), ("model", "interaction")] {
        let v = merged.get(section)?.get(key)?.clone();
        let ok = match key {
            "lateral" => v.try_into::<LateralEdges>().is_ok(),
            _ => v.try_into::<Interaction>().is_ok(),
        };
        if !ok {
            return locate(text, Some(section), key);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn issues(r: Result<SimulationConfig>) -> Vec<ConfigIssue> {
        match r {
            Err(Error::Config(v)) => v,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_gives_paper_defaults() {
        let c = parse_config("", None).unwrap();
        assert_eq!(c, SimulationConfig::default());
        assert_eq!(c.geometry.domain_size, 80.0);
        assert_eq!(c.loading.elongation, 4.0);
        assert_eq!(c.loading.time_step, 0.01);
        assert_eq!(c.load_program().n_steps, 50_000);
        assert_eq!(c.ferrite, MaterialParams::ferrite());
    }

    #[test]
    fn out_of_range_fraction_names_field_and_line() {
        let text = "[geometry]\nnx = 32\n\n[microstructure]\nmartensite_fraction = 1.5\n";
        let v = issues(parse_config(text, None));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "microstructure.martensite_fraction");
        assert_eq!(v[0].line, Some(5));
    }

    #[test]
    fn every_violation_is_reported() {
        let text = "[loading]\ntime_step = -1\nbogus = 3\n[ferrite]\npoisson = 0.7\nmobility = [1.0]\n";
        let v = issues(parse_config(text, None));
        let fields: Vec<&str> = v.iter().map(|i| i.field.as_str()).collect();
        assert_eq!(fields, ["loading.time_step", "loading.bogus", "ferrite.poisson", "ferrite.mobility"]);
        let lines: Vec<_> = v.iter().map(|i| i.line).collect();
        assert_eq!(lines, [Some(2), Some(3), Some(5), Some(6)]);
    }

    #[test]
    fn wrong_type_and_unknown_section() {
        let v = issues(parse_config("[geometry]\nnx = \"big\"\n[extra]\na = 1\n", None));
        assert_eq!(v[0].field, "geometry.nx");
        assert_eq!(v[1].field, "extra");
        assert_eq!(v[1].line, Some(3));
        let v = issues(parse_config("[loading]\nlateral = \"sideways\"\n", None));
        assert_eq!(v[0].line, Some(2));
        let v = issues(parse_config("[geometry\n", None));
        assert_eq!(v[0].line, Some(1));
    }

    #[test]
    fn presets_layer_under_the_file() {
        let c = parse_config("preset = \"desk\"\n[geometry]\nnx = 40\n", None).unwrap();
        assert_eq!((c.geometry.nx, c.geometry.ny), (40, DESK_GRID));
        assert_eq!(c.load_program().n_steps, 2000);
        let c = parse_config("preset = \"desk\"\n", Some(Preset::Paper)).unwrap();
        assert_eq!(c, SimulationConfig::default());
    }

    #[test]
    fn dump_round_trip() {
        let text = "preset = \"desk\"\n[microstructure]\nd_ferrite = 7.5\n[model]\ninteraction = \"uniform-latent\"\nlatent_ratio = 1\n";
        let c = parse_config(text, None).unwrap();
        let normalized = c.dump();
        let again = parse_config(&normalized, None).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.dump(), normalized);
        assert_eq!(c.model.latent_ratio, 1.0);
    }

    #[test]
    fn output_root_applies_to_relative_dirs() {
        let c = SimulationConfig::default();
        std::env::set_var(OUTPUT_ROOT_VAR, "/tmp/root");
        assert_eq!(c.output_dir(), PathBuf::from("/tmp/root/dpcp-out"));
        std::env::remove_var(OUTPUT_ROOT_VAR);
        assert_eq!(c.output_dir(), PathBuf::from("dpcp-out"));
    }
}
