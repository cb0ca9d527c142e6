use serde::Deserialize;

use super::{ParticleBuffer, Species, SurfaceChargeLedger};
use crate::error::{Error, Result};
use crate::geometry::{LevelSetGeometry, Vec3};
use crate::mesh::tets::{cell_tets, is_odd_cell, tet_in_cell, CUBE_VERTEX_OFFSETS};
use crate::mesh::{GlobalMeshSpec, SubdomainMesh, TetTag, TETS_PER_CELL};

/// Particle condition on a global face.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParticleFace {
    /// Specular reflection (symmetry plane).
    Reflect,
    /// Outgoing particles are removed; ambient species are injected.
    Open,
    /// Outgoing particles are removed; nothing is injected.
    Absorb,
}

impl ParticleFace {
    pub fn removes(self) -> bool {
        self != ParticleFace::Reflect
    }
}

/// Charge and counts moved across boundaries during one step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BoundaryTally {
    pub exited: usize,
    pub exited_charge: f64,
    pub collected: usize,
    pub collected_charge: f64,
    pub reflected: usize,
}

impl BoundaryTally {
    pub fn merge(&mut self, o: &BoundaryTally) {
        self.exited += o.exited;
        self.exited_charge += o.exited_charge;
        self.collected += o.collected;
        self.collected_charge += o.collected_charge;
        self.reflected += o.reflected;
    }
}

/// Reflect at symmetry faces and remove particles leaving through the others.
pub fn apply_domain_boundaries(
    global: &GlobalMeshSpec,
    faces: &[ParticleFace; 6],
    species: &Species,
    buf: &mut ParticleBuffer,
    tally: &mut BoundaryTally,
) {
    let lo = global.lower;
    let hi = global.upper();
    let q = species.macro_charge();
    buf.retain(|x, v| {
        for a in 0..3 {
            // a reflected particle can only leave through the opposite face
            // if it crossed more than the whole box, which migration limits forbid
            if x[a] < lo[a] {
                if faces[2 * a].removes() {
                    tally.exited += 1;
                    tally.exited_charge += q;
                    return false;
                }
                x[a] = 2.0 * lo[a] - x[a];
                v[a] = -v[a];
                tally.reflected += 1;
            } else if x[a] > hi[a] {
                if faces[2 * a + 1].removes() {
                    tally.exited += 1;
                    tally.exited_charge += q;
                    return false;
                }
                x[a] = 2.0 * hi[a] - x[a];
                v[a] = -v[a];
                tally.reflected += 1;
            }
        }
        true
    });
}

pub const CROSSING_BISECTIONS: usize = 5;

/// `true` if `p` lies in material: negative level set, or inside a
/// tetrahedron whose nodes are all in material.
pub fn in_material(mesh: &SubdomainMesh, geometry: &LevelSetGeometry, p: &Vec3) -> Result<bool> {
    let (c, [u, v, w]) = mesh.cell_coords(p)?;
    let lc = mesh.local_cell(c);
    if !mesh.near_material[lc] {
        return Ok(false);
    }
    let t = tet_in_cell(mesh.cell_is_odd(lc), u, v, w);
    Ok(geometry.value(p) < 0.0 || mesh.tags[lc * TETS_PER_CELL + t] == TetTag::Interior)
}

/// Same test as [`in_material`] evaluated from global data only, so every
/// rank holding a copy of a facet reaches the same answer.
pub fn in_material_global(global: &GlobalMeshSpec, geometry: &LevelSetGeometry, p: &Vec3) -> bool {
    if geometry.value(p) < 0.0 {
        return true;
    }
    let h = global.h;
    let mut c = [0usize; 3];
    let mut f = [0.0; 3];
    for a in 0..3 {
        let s = (p[a] - global.lower[a]) / h;
        c[a] = (s.floor().max(0.0) as usize).min(global.cells[a] - 1);
        f[a] = (s - c[a] as f64).clamp(0.0, 1.0);
    }
    let odd = is_odd_cell(c);
    let t = tet_in_cell(odd, f[0], f[1], f[2]);
    cell_tets(odd)[t].iter().all(|&v| {
        let o = CUBE_VERTEX_OFFSETS[v];
        let n = [c[0] + o[0], c[1] + o[1], c[2] + o[2]];
        geometry.snapped_value(&global.node_position(n), h) < 0.0
    })
}

/// Point where the segment `a → b` enters material, refined by bisection of
/// the level-set sign; `b` itself if `a` is not in plasma.
pub fn crossing_point(geometry: &LevelSetGeometry, a: &Vec3, b: &Vec3) -> Vec3 {
    let (mut lo, mut hi) = (*a, *b);
    if geometry.value(&lo) < 0.0 || geometry.value(&hi) >= 0.0 {
        return *b;
    }
    for _ in 0..CROSSING_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if geometry.value(&mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Remove particles that entered material during the last push and add their
/// charge to the nearest facet. Positions must lie inside the guarded extent.
pub fn collect_at_material(
    mesh: &SubdomainMesh,
    geometry: &LevelSetGeometry,
    species: &Species,
    buf: &mut ParticleBuffer,
    dt: f64,
    ledger: &mut SurfaceChargeLedger,
    tally: &mut BoundaryTally,
) -> Result<()> {
    let q = species.macro_charge();
    let mut err = None;
    buf.retain(|x, v| {
        if err.is_some() {
            return true;
        }
        match in_material(mesh, geometry, x) {
            Ok(false) => true,
            Ok(true) => {
                let start = *x - *v * dt;
                let hit = crossing_point(geometry, &start, x);
                match mesh.nearest_facet(&hit) {
                    Some(cut) => {
                        let ci = mesh.tet_cut[cut.tet].expect("facets come from cut tets") as usize;
                        ledger.deposit(ci, q);
                        tally.collected += 1;
                        tally.collected_charge += q;
                        false
                    }
                    None => {
                        err = Some(Error::Geometry(format!(
                            "particle absorbed at {:?} but the subdomain has no interface facet",
                            [hit.x, hit.y, hit.z]
                        )));
                        true
                    }
                }
            }
            Err(e) => {
                err = Some(e);
                true
            }
        }
    });
    err.map_or(Ok(()), Err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::particles::{SpeciesConfig, SpeciesSource};

    fn species(charge: f64) -> Species {
        Species::new(
            SpeciesConfig {
                name: "s".into(),
                charge,
                mass_ratio: 1.0,
                temperature_ev: 1.0,
                drift: [0.0; 3],
                density: 1.0,
                particles_per_cell: 8,
                source: SpeciesSource::Ambient,
            },
            1.0,
            0.25,
        )
        .unwrap()
    }

    #[test]
    fn mirror_and_exit() {
        let g = GlobalMeshSpec::from_extents([0.0; 3], [1.0; 3], 0.25).unwrap();
        let faces = [
            ParticleFace::Reflect,
            ParticleFace::Open,
            ParticleFace::Reflect,
            ParticleFace::Open,
            ParticleFace::Reflect,
            ParticleFace::Open,
        ];
        let s = species(-1.0);
        let mut b = ParticleBuffer::default();
        b.push(Vec3::new(-0.025, 0.5, 0.5), Vec3::new(-1.0, 0.3, 0.0));
        b.push(Vec3::new(1.01, 0.5, 0.5), Vec3::new(1.0, 0.0, 0.0));
        let mut t = BoundaryTally::default();
        apply_domain_boundaries(&g, &faces, &s, &mut b, &mut t);
        assert_eq!(b.len(), 1);
        assert!((b.pos[0].x - 0.025).abs() < 1e-15);
        assert_eq!(b.vel[0], Vec3::new(1.0, 0.3, 0.0));
        assert_eq!((t.exited, t.reflected), (1, 1));
        assert_eq!(t.exited_charge, s.macro_charge());
    }

    #[test]
    fn particle_entering_sphere_is_collected() {
        let g = GlobalMeshSpec::from_extents([0.0; 3], [2.0; 3], 0.125).unwrap();
        let geo = LevelSetGeometry::sphere([0.0; 3], 0.401).unwrap();
        let m = SubdomainMesh::build(&g, [0; 3], [[0, 16]; 3], [false; 3], [false; 3], Some(&geo))
            .unwrap();
        let mut ledger = SurfaceChargeLedger::new(&m);
        let s = species(-1.0);
        let mut b = ParticleBuffer::default();
        let dt = 0.1;
        // from r = 0.45 to r = 0.35 along the diagonal
        let dir = Vec3::new(1.0, 1.0, 1.0).normalize();
        b.push(dir * 0.35, -dir * 1.0);
        b.push(dir * 1.5, dir);
        let mut t = BoundaryTally::default();
        collect_at_material(&m, &geo, &s, &mut b, dt, &mut ledger, &mut t).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(t.collected, 1);
        let total: f64 = ledger.charge.iter().sum();
        assert!((total - s.macro_charge()).abs() < 1e-15);
        let hit = crossing_point(&geo, &(dir * 0.45), &(dir * 0.35));
        assert!((hit.norm() - 0.401).abs() < 0.1 / 32.0);
    }

    #[test]
    fn global_material_test_matches_subdomain() {
        let g = GlobalMeshSpec::from_extents([0.0; 3], [2.0; 3], 0.125).unwrap();
        let geo = LevelSetGeometry::sphere([0.9, 1.0, 1.1], 0.52).unwrap();
        let m = SubdomainMesh::build(
            &g,
            [1, 0, 0],
            [[6, 16], [0, 16], [0, 16]],
            [true, false, false],
            [false; 3],
            Some(&geo),
        )
        .unwrap();
        let mut n = 0;
        for i in 0..40 {
            for j in 0..40 {
                for k in 0..40 {
                    let p = Vec3::new(
                        0.5 + i as f64 * 0.0217,
                        0.45 + j as f64 * 0.0271,
                        0.55 + k as f64 * 0.0263,
                    );
                    let a = in_material(&m, &geo, &p).unwrap();
                    assert_eq!(a, in_material_global(&g, &geo, &p), "{p:?}");
                    n += a as usize;
                }
            }
        }
        assert!(n > 1000);
    }
}
