//! Particle creation: pre-load, injection through open faces and
//! photoemission from sunlit facets.
//!
//! Every draw comes from a stream keyed by a global cell, face patch or facet
//! id. Each rank replays every patch and facet in its guarded extent and
//! keeps only the particles that land in its owned region, so the union over
//! ranks is the same particle set for any decomposition.

use rand::Rng;

use super::boundary::{in_material, in_material_global};
use super::sampling::{flux_velocity, maxwellian, one_sided_flux, FluxSampler};
use super::{ParticleBuffer, ParticleFace, Species, SurfaceChargeLedger};
use crate::error::Result;
use crate::geometry::{LevelSetGeometry, RayMarch, SunModel, Vec3};
use crate::mesh::{SubdomainMesh, MIN_FACET_AREA};
use crate::rng::{stream, Purpose};

/// Uniform load of the owned plasma cells: each cell draws
/// `particles_per_cell` candidates and keeps those outside material.
pub fn load_uniform(
    mesh: &SubdomainMesh,
    geometry: Option<&LevelSetGeometry>,
    species: &Species,
    species_index: usize,
    seed: u64,
    buf: &mut ParticleBuffer,
) -> Result<usize> {
    let h = mesh.h();
    let ppc = species.config.particles_per_cell;
    let before = buf.len();
    for k in mesh.owned[2][0]..mesh.owned[2][1] {
        for j in mesh.owned[1][0]..mesh.owned[1][1] {
            for i in mesh.owned[0][0]..mesh.owned[0][1] {
                let g = [i, j, k];
                let lc = mesh.local_cell([0, 1, 2].map(|a| g[a] - mesh.extent[a][0]));
                let corners = mesh.cell_nodes(lc);
                if corners.iter().all(|&n| mesh.node_ls[n] < 0.0) {
                    continue;
                }
                let origin = mesh.global.node_position(g);
                let mut rng = stream(
                    seed,
                    Purpose::Load,
                    species_index,
                    0,
                    mesh.global.cell_id(g) as u64,
                );
                for _ in 0..ppc {
                    let u: [f64; 3] = rng.random();
                    let x = origin + Vec3::from(u) * h;
                    let v = maxwellian(&mut rng, &species.drift, species.thermal_speed);
                    let blocked = match geometry {
                        Some(geo) if mesh.near_material[lc] => in_material(mesh, geo, &x)?,
                        _ => false,
                    };
                    if !blocked {
                        buf.push(x, v);
                    }
                }
            }
        }
    }
    Ok(buf.len() - before)
}

/// Injection state for one species on one face: a sampler for the normal
/// speed and per-patch accumulators of the fractional particle count.
#[derive(Clone, Debug)]
struct FaceInjector {
    species: usize,
    face: usize,
    sampler: FluxSampler,
    /// Expected particles per patch per step.
    rate: f64,
    /// `(global patch id, accumulator)` for patches in the guarded extent.
    patches: Vec<(u64, [usize; 3], f64)>,
}

#[derive(Clone, Debug, Default)]
pub struct Injector {
    faces: Vec<FaceInjector>,
}

/// Counts and charge created on one rank during one step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SourceTally {
    pub created: usize,
    pub created_charge: f64,
    /// Emitted particles returned to the surface in the same step.
    pub reabsorbed: usize,
    pub reabsorbed_charge: f64,
}

impl SourceTally {
    pub fn merge(&mut self, o: &SourceTally) {
        self.created += o.created;
        self.created_charge += o.created_charge;
        self.reabsorbed += o.reabsorbed;
        self.reabsorbed_charge += o.reabsorbed_charge;
    }
}

/// Start value of a fractional accumulator. A per-entity phase keeps
/// entities with equal rates from emitting in lockstep when rates are far
/// below one particle per step.
fn initial_phase(seed: u64, species: usize, entity: u64) -> f64 {
    stream(seed, Purpose::Phase, species, 0, entity).random()
}

fn inward_normal(face: usize) -> Vec3 {
    let mut n = Vec3::zeros();
    n[face / 2] = if face % 2 == 0 { 1.0 } else { -1.0 };
    n
}

impl Injector {
    pub fn new(
        mesh: &SubdomainMesh,
        faces: &[ParticleFace; 6],
        species: &[Species],
        dt: f64,
        seed: u64,
    ) -> Self {
        let h = mesh.h();
        let gc = mesh.global.cells;
        let mut out = Vec::new();
        for (s, sp) in species.iter().enumerate() {
            if !sp.is_ambient() || sp.config.density == 0.0 {
                continue;
            }
            for (face, cond) in faces.iter().enumerate() {
                if *cond != ParticleFace::Open {
                    continue;
                }
                let a = face / 2;
                let layer = if face % 2 == 0 { 0 } else { gc[a] - 1 };
                if layer < mesh.extent[a][0] || layer >= mesh.extent[a][1] {
                    continue;
                }
                let n = inward_normal(face);
                let u = sp.drift.dot(&n);
                let flux = sp.config.density * one_sided_flux(u, sp.thermal_speed);
                let (b, c) = ((a + 1) % 3, (a + 2) % 3);
                let mut patches = Vec::new();
                for j in mesh.extent[c][0]..mesh.extent[c][1] {
                    for i in mesh.extent[b][0]..mesh.extent[b][1] {
                        let mut g = [0; 3];
                        g[a] = layer;
                        g[b] = i;
                        g[c] = j;
                        let id = (face * mesh.global.cell_count() + mesh.global.cell_id(g)) as u64;
                        patches.push((id, g, initial_phase(seed, s, id)));
                    }
                }
                out.push(FaceInjector {
                    species: s,
                    face,
                    sampler: FluxSampler::new(u, sp.thermal_speed),
                    rate: flux * h * h * dt / sp.weight,
                    patches,
                });
            }
        }
        Injector { faces: out }
    }

    /// Inject one step's particles; only those landing in the owned region
    /// outside material are stored.
    #[allow(clippy::too_many_arguments)]
    pub fn inject(
        &mut self,
        mesh: &SubdomainMesh,
        geometry: Option<&LevelSetGeometry>,
        species: &[Species],
        buffers: &mut [ParticleBuffer],
        seed: u64,
        step: u64,
        dt: f64,
    ) -> Result<SourceTally> {
        let h = mesh.h();
        let lo = mesh.global.lower;
        let hi = mesh.global.upper();
        let mut tally = SourceTally::default();
        for fi in &mut self.faces {
            let sp = &species[fi.species];
            let a = fi.face / 2;
            let (b, c) = ((a + 1) % 3, (a + 2) % 3);
            let n = inward_normal(fi.face);
            let plane = if fi.face % 2 == 0 { lo[a] } else { hi[a] };
            for (id, g, acc) in &mut fi.patches {
                *acc += fi.rate;
                let count = acc.floor();
                *acc -= count;
                if count == 0.0 {
                    continue;
                }
                let mut rng = stream(seed, Purpose::Inject, fi.species, step, *id);
                let corner = mesh.global.node_position(*g);
                for _ in 0..count as usize {
                    let (s, t, frac): (f64, f64, f64) = rng.random();
                    let v = flux_velocity(&mut rng, &fi.sampler, &n, &sp.drift, sp.thermal_speed);
                    let mut x = corner;
                    x[a] = plane;
                    x[b] += s * h;
                    x[c] += t * h;
                    x += v * (frac * dt);
                    if !(0..3).all(|k| x[k] >= lo[k] && x[k] <= hi[k]) || !mesh.owns_position(&x) {
                        continue;
                    }
                    if let Some(geo) = geometry {
                        if in_material(mesh, geo, &x)? {
                            continue;
                        }
                    }
                    buffers[fi.species].push(x, v);
                    tally.created += 1;
                    tally.created_charge += sp.macro_charge();
                }
            }
        }
        Ok(tally)
    }

    /// Expected injections per step summed over this rank's patches.
    pub fn expected_rate(&self, species: usize) -> f64 {
        self.faces
            .iter()
            .filter(|f| f.species == species)
            .map(|f| f.rate * f.patches.len() as f64)
            .sum()
    }
}

#[derive(Clone, Debug)]
struct EmittingFacet {
    cut: usize,
    key: u64,
    rate: f64,
    acc: f64,
}

/// Photoelectron emission from sunlit facets of the guarded mesh.
#[derive(Clone, Debug, Default)]
pub struct PhotoEmitter {
    species: usize,
    facets: Vec<EmittingFacet>,
    sampler: Option<FluxSampler>,
}

impl PhotoEmitter {
    /// Emission rate per facet is `flux · sunlight index · area · dt / w`.
    pub fn new(
        mesh: &SubdomainMesh,
        geometry: &LevelSetGeometry,
        sun: &SunModel,
        species: &Species,
        species_index: usize,
        dt: f64,
        seed: u64,
    ) -> Result<Self> {
        let h = mesh.h();
        let march = RayMarch::for_mesh(mesh.global.lower, mesh.global.upper(), h);
        let mut facets = Vec::new();
        for (ci, cut) in mesh.cuts.iter().enumerate() {
            if cut.facet_area < MIN_FACET_AREA * h * h {
                continue;
            }
            let on_surface = geometry.project_to_surface(&cut.facet_centroid);
            let s = geometry.sunlight_index(&on_surface, sun, &march)?;
            if s > 0.0 {
                let key = mesh.facet_key(cut);
                facets.push(EmittingFacet {
                    cut: ci,
                    key,
                    rate: sun.reference_flux * s * cut.facet_area * dt / species.weight,
                    acc: initial_phase(seed, species_index, key),
                });
            }
        }
        Ok(PhotoEmitter {
            species: species_index,
            facets,
            sampler: Some(FluxSampler::new(0.0, species.thermal_speed)),
        })
    }

    pub fn sunlit_facets(&self) -> usize {
        self.facets.len()
    }

    /// Emit one step's photoelectrons. Every replica of a facet debits the
    /// emitted charge; only the owner of the landing position stores the
    /// particle. Particles that would start inside material or outside the
    /// box are not emitted.
    #[allow(clippy::too_many_arguments)]
    pub fn emit(
        &mut self,
        mesh: &SubdomainMesh,
        geometry: &LevelSetGeometry,
        species: &Species,
        buf: &mut ParticleBuffer,
        ledger: &mut SurfaceChargeLedger,
        seed: u64,
        step: u64,
        dt: f64,
    ) -> Result<(SourceTally, f64)> {
        let Some(sampler) = &self.sampler else {
            return Ok((SourceTally::default(), 0.0));
        };
        let (lo, hi) = (mesh.global.lower, mesh.global.upper());
        let q = species.macro_charge();
        let mut tally = SourceTally::default();
        let mut debited_owned = 0.0;
        for f in &mut self.facets {
            f.acc += f.rate;
            let count = f.acc.floor();
            f.acc -= count;
            if count == 0.0 {
                continue;
            }
            let cut = &mesh.cuts[f.cut];
            let mut rng = stream(seed, Purpose::Emit, self.species, step, f.key);
            for _ in 0..count as usize {
                let p = sample_polygon(&cut.polygon, &mut rng);
                let frac: f64 = rng.random();
                let v = flux_velocity(
                    &mut rng,
                    sampler,
                    &cut.normal,
                    &Vec3::zeros(),
                    species.thermal_speed,
                );
                let x = p + v * (frac * dt);
                if !(0..3).all(|k| x[k] >= lo[k] && x[k] <= hi[k])
                    || in_material_global(&mesh.global, geometry, &x)
                {
                    continue;
                }
                ledger.adjust_replicated(f.cut, -q);
                if ledger.is_owned(f.cut) {
                    debited_owned -= q;
                }
                if mesh.owns_position(&x) {
                    tally.created += 1;
                    tally.created_charge += q;
                    if in_material(mesh, geometry, &x)? {
                        // round-off disagreement with the global test: the
                        // particle is re-absorbed by its own facet
                        ledger.deposit(f.cut, q);
                        tally.reabsorbed += 1;
                        tally.reabsorbed_charge += q;
                    } else {
                        buf.push(x, v);
                    }
                }
            }
        }
        Ok((tally, debited_owned))
    }
}

/// Uniform point on a convex planar polygon by area-weighted fan triangles.
fn sample_polygon<R: Rng>(poly: &[Vec3], rng: &mut R) -> Vec3 {
    let o = poly[0];
    let areas: Vec<f64> = (1..poly.len() - 1)
        .map(|i| 0.5 * (poly[i] - o).cross(&(poly[i + 1] - o)).norm())
        .collect();
    let total: f64 = areas.iter().sum();
    let mut pick: f64 = rng.random::<f64>() * total;
    let mut t = areas.len() - 1;
    for (i, a) in areas.iter().enumerate() {
        if pick < *a {
            t = i;
            break;
        }
        pick -= a;
    }
    let (mut r1, mut r2): (f64, f64) = rng.random();
    if r1 + r2 > 1.0 {
        r1 = 1.0 - r1;
        r2 = 1.0 - r2;
    }
    o + (poly[t + 1] - o) * r1 + (poly[t + 2] - o) * r2
}
