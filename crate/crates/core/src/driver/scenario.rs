use std::f64::consts::PI;
use std::sync::Arc;

use super::config::{FieldFace, GeometryConfig, Scenario, SimulationConfig};
use crate::ddm::DecompTopology;
use crate::error::{Error, Result};
use crate::geometry::{CraterTerrain, LevelSetGeometry, SunModel, Vec3};
use crate::ife::{
    BoundarySpec, FaceCondition, FieldProblem, Permittivity, PermittivityLayer, ScalarField,
};
use crate::mesh::GlobalMeshSpec;
use crate::oracle::ManufacturedSphere;
use crate::particles::{Species, SpeciesSource};
use crate::solver::PcgConfig;

/// Everything derived from the configuration before workers are built.
#[derive(Clone, Debug)]
pub struct Setup {
    pub global: GlobalMeshSpec,
    pub topology: DecompTopology,
    pub geometry: LevelSetGeometry,
    pub problem: FieldProblem,
    pub species: Vec<Species>,
    pub sun: Option<SunModel>,
    pub photo_species: Option<usize>,
    pub manufactured: Option<ManufacturedSphere>,
    pub pcg: PcgConfig,
}

impl Setup {
    pub fn build(cfg: &SimulationConfig) -> Result<Self> {
        cfg.validate()?;
        let m = &cfg.mesh;
        let global = GlobalMeshSpec::from_extents(m.lower_debye, m.upper_debye, m.cell_size_debye)?;
        let topology = DecompTopology::build(cfg.decomposition.workers, &global)?;
        let h = global.h;

        let (geometry, permittivity) = match &cfg.geometry {
            GeometryConfig::Sphere {
                center_debye,
                radius_debye,
                permittivity,
                plasma_permittivity,
            } => (
                LevelSetGeometry::sphere(*center_debye, *radius_debye)?,
                Permittivity::two_sided(*permittivity, *plasma_permittivity),
            ),
            GeometryConfig::Crater {
                center_xy_debye,
                ground_height_debye,
                inner_rim_radius_debye,
                top_rim_radius_debye,
                outer_rim_radius_debye,
                top_height_debye,
                floor_depth_debye,
                regolith_permittivity,
                bedrock_top_debye,
                bedrock_permittivity,
            } => (
                LevelSetGeometry::crater(CraterTerrain {
                    center_xy: *center_xy_debye,
                    base_height: *ground_height_debye,
                    inner_rim_radius: *inner_rim_radius_debye,
                    top_rim_radius: *top_rim_radius_debye,
                    outer_rim_radius: *outer_rim_radius_debye,
                    top_height: *top_height_debye,
                    floor_depth: *floor_depth_debye,
                })?,
                Permittivity {
                    minus: *regolith_permittivity,
                    plus: 1.0,
                    layers: vec![PermittivityLayer {
                        below_z: *bedrock_top_debye,
                        eps: *bedrock_permittivity,
                    }],
                },
            ),
        };

        let manufactured = match cfg.scenario {
            Scenario::Manufactured => {
                let GeometryConfig::Sphere {
                    center_debye,
                    radius_debye,
                    ..
                } = &cfg.geometry
                else {
                    unreachable!("validated")
                };
                let sigma = cfg.manufactured.as_ref().map_or(0.0, |m| m.surface_charge);
                Some(
                    ManufacturedSphere::new(
                        *center_debye,
                        *radius_debye,
                        permittivity.minus,
                        permittivity.plus,
                    )
                    .with_surface_charge(sigma),
                )
            }
            _ => None,
        };

        let boundary = match &manufactured {
            Some(ms) => {
                let ms = *ms;
                let g: ScalarField = Arc::new(move |p: &Vec3| ms.phi([p.x, p.y, p.z]));
                BoundarySpec::all_dirichlet(g)
            }
            None => BoundarySpec {
                faces: cfg.field.faces.map(|f| match f {
                    FieldFace::Dirichlet => {
                        FaceCondition::dirichlet_const(cfg.field.dirichlet_potential_te)
                    }
                    FieldFace::Neumann => FaceCondition::neumann_zero(),
                }),
            },
        };
        let problem = FieldProblem::new(permittivity, boundary)?;

        let t_ref = cfg.plasma.reference_temperature_ev;
        let species = cfg
            .species
            .iter()
            .map(|s| Species::new(s.clone(), t_ref, h))
            .collect::<Result<Vec<_>>>()?;
        let photo_species = species
            .iter()
            .position(|s| s.config.source == SpeciesSource::Photoemission);
        let sun = match (&cfg.sun, photo_species) {
            (Some(sc), Some(p)) => {
                let sp = &species[p];
                let flux = sc
                    .reference_flux
                    .unwrap_or(sp.config.density * sp.thermal_speed / (2.0 * PI).sqrt());
                Some(SunModel::from_angles(
                    sc.elevation_deg,
                    sc.azimuth_deg,
                    flux,
                )?)
            }
            (None, Some(_)) => {
                return Err(Error::Config("photoemission needs a [sun] section".into()))
            }
            _ => None,
        };
        let pcg = PcgConfig::new(cfg.field.pcg_max_iterations, cfg.field.pcg_tolerance)?
            .with_preconditioner(cfg.field.pcg_preconditioner);
        Ok(Setup {
            global,
            topology,
            geometry,
            problem,
            species,
            sun,
            photo_species,
            manufactured,
            pcg,
        })
    }
}
