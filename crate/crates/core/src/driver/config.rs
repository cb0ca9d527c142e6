//! Simulation configuration, read from TOML. Key names carry their units:
//! `_debye` lengths are in Debye lengths, `_wpe` times in inverse plasma
//! frequencies, `_te` potentials in reference `T/e`.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::particles::{ParticleFace, SpeciesConfig, SpeciesSource};
use crate::solver::PreconditionerKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    OmlSphere,
    LunarCrater,
    Manufactured,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub lower_debye: [f64; 3],
    pub upper_debye: [f64; 3],
    pub cell_size_debye: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionConfig {
    /// Subdomains per axis.
    pub workers: [usize; 3],
    /// Worker threads; 0 picks `min(subdomains, available cores)`.
    #[serde(default)]
    pub threads: usize,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub dt_wpe: f64,
    pub steps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldFace {
    Dirichlet,
    Neumann,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub pcg_max_iterations: usize,
    /// Relative residual.
    pub pcg_tolerance: f64,
    #[serde(default)]
    pub pcg_preconditioner: PreconditionerKind,
    pub ddm_tolerance: f64,
    pub ddm_initial_max_iterations: usize,
    pub ddm_max_iterations: usize,
    /// `x_min, x_max, y_min, y_max, z_min, z_max`.
    pub faces: [FieldFace; 6],
    #[serde(default)]
    pub dirichlet_potential_te: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlasmaConfig {
    pub reference_temperature_ev: f64,
    /// `x_min, x_max, y_min, y_max, z_min, z_max`.
    pub particle_faces: [ParticleFace; 6],
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeometryConfig {
    Sphere {
        center_debye: [f64; 3],
        radius_debye: f64,
        permittivity: f64,
        #[serde(default = "one")]
        plasma_permittivity: f64,
    },
    Crater {
        center_xy_debye: [f64; 2],
        ground_height_debye: f64,
        inner_rim_radius_debye: f64,
        top_rim_radius_debye: f64,
        outer_rim_radius_debye: f64,
        top_height_debye: f64,
        floor_depth_debye: f64,
        regolith_permittivity: f64,
        bedrock_top_debye: f64,
        bedrock_permittivity: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SunConfig {
    pub elevation_deg: f64,
    /// Measured from +x towards +y.
    pub azimuth_deg: f64,
    /// Photoelectron flux from a surface facing the Sun; defaults to the
    /// one-sided thermal flux `n·v_t/√(2π)` of the photoelectron species.
    #[serde(default)]
    pub reference_flux: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManufacturedConfig {
    /// Uniform surface charge density on the sphere.
    #[serde(default)]
    pub surface_charge: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Steps between history rows.
    #[serde(default = "one_usize")]
    pub history_every_steps: usize,
    /// Steps between field snapshots; 0 writes only the final snapshot.
    #[serde(default)]
    pub snapshot_every_steps: usize,
    /// Radial-profile averaging window (last N steps).
    #[serde(default = "default_window")]
    pub profile_average_steps: usize,
    #[serde(default = "default_bin")]
    pub profile_bin_debye: f64,
    /// Outer radius where the oracle profile is pinned to zero.
    #[serde(default = "default_rmax")]
    pub oracle_r_max_debye: f64,
    /// Radial range of the profile error metric.
    #[serde(default = "default_rms_outer")]
    pub profile_rms_outer_debye: f64,
}

fn one_usize() -> usize {
    1
}
fn default_window() -> usize {
    2000
}
fn default_bin() -> f64 {
    0.1
}
fn default_rmax() -> f64 {
    5.0
}
fn default_rms_outer() -> f64 {
    2.5
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub scenario: Scenario,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub mesh: MeshConfig,
    pub decomposition: DecompositionConfig,
    pub time: TimeConfig,
    pub field: FieldConfig,
    pub plasma: PlasmaConfig,
    #[serde(default)]
    pub species: Vec<SpeciesConfig>,
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub sun: Option<SunConfig>,
    #[serde(default)]
    pub manufactured: Option<ManufacturedConfig>,
    pub output: OutputConfig,
}

fn default_seed() -> u64 {
    20210601
}

fn in_unit(x: f64) -> bool {
    x > 0.0 && x < 1.0
}

impl SimulationConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SimulationConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.time.dt_wpe > 0.0) || !self.time.dt_wpe.is_finite() {
            return bad(format!("dt must be positive, got {}", self.time.dt_wpe));
        }
        let f = &self.field;
        if !in_unit(f.pcg_tolerance) || !in_unit(f.ddm_tolerance) {
            return bad("PCG and DDM tolerances must lie in (0, 1)".into());
        }
        if f.pcg_max_iterations == 0
            || f.ddm_max_iterations == 0
            || f.ddm_initial_max_iterations == 0
        {
            return bad("iteration caps must be at least 1".into());
        }
        if self.decomposition.workers.contains(&0) {
            return bad("every decomposition axis needs at least one subdomain".into());
        }
        if self.output.history_every_steps == 0 {
            return bad("history cadence must be at least 1".into());
        }
        if !(self.output.profile_bin_debye > 0.0) {
            return bad("profile bin width must be positive".into());
        }
        let names: Vec<&str> = self.species.iter().map(|s| s.name.as_str()).collect();
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return bad(format!("duplicate species name {n}"));
            }
        }
        let photo = self
            .species
            .iter()
            .filter(|s| s.source == SpeciesSource::Photoemission)
            .count();
        match self.scenario {
            Scenario::OmlSphere => {
                if !matches!(self.geometry, GeometryConfig::Sphere { .. }) {
                    return bad("oml-sphere needs a sphere geometry".into());
                }
                if self.species.is_empty() {
                    return bad("oml-sphere needs at least one species".into());
                }
            }
            Scenario::LunarCrater => {
                if !matches!(self.geometry, GeometryConfig::Crater { .. }) {
                    return bad("lunar-crater needs a crater geometry".into());
                }
                if photo > 0 && self.sun.is_none() {
                    return bad("photoemission species need a [sun] section".into());
                }
            }
            Scenario::Manufactured => {
                if !matches!(self.geometry, GeometryConfig::Sphere { .. }) {
                    return bad("manufactured needs a sphere geometry".into());
                }
                if !self.species.is_empty() {
                    return bad("manufactured runs carry no particles".into());
                }
            }
        }
        if photo > 1 {
            return bad("at most one photoemission species is supported".into());
        }
        Ok(())
    }

    pub fn ranks(&self) -> usize {
        self.decomposition.workers.iter().product()
    }
}
