//! Charge deposition, field interpolation and the leapfrog push.

use super::{ParticleBuffer, Species};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::ife::ElementFields;
use crate::mesh::tets::tet_in_cell;
use crate::mesh::{SubdomainMesh, TetTag, TETS_PER_CELL};

/// Cloud-in-cell deposit of `q·w` onto the 8 corners of each particle's cell.
pub fn scatter(
    mesh: &SubdomainMesh,
    species: &Species,
    buf: &ParticleBuffer,
    charge: &mut [f64],
) -> Result<()> {
    let q = species.macro_charge();
    for p in &buf.pos {
        let (c, [u, v, w]) = mesh.cell_coords(p)?;
        let nodes = mesh.cell_nodes(mesh.local_cell(c));
        let wx = [1.0 - u, u];
        let wy = [1.0 - v, v];
        let wz = [1.0 - w, w];
        for (k, &node) in nodes.iter().enumerate() {
            charge[node] += q * wx[k & 1] * wy[(k >> 1) & 1] * wz[k >> 2];
        }
    }
    Ok(())
}

/// Nodal charge divided by the node control volume (`h³`, halved for each
/// axis on which the node lies on the global boundary).
pub fn charge_to_density(mesh: &SubdomainMesh, charge: &[f64], rho: &mut Vec<f64>) {
    let h = mesh.h();
    let n = mesh.global.cells;
    rho.clear();
    rho.extend(charge.iter().enumerate().map(|(i, &q)| {
        let g = mesh.global_node_ijk(i);
        let mut vol = h * h * h;
        for a in 0..3 {
            if g[a] == 0 || g[a] == n[a] {
                vol *= 0.5;
            }
        }
        q / vol
    }));
}

/// `E = −∇φ` at `p`: constant per tetrahedron, taken from the side of the
/// cut plane containing `p` in interface tetrahedra.
#[inline]
pub fn gather(mesh: &SubdomainMesh, fields: &ElementFields, p: &Vec3) -> Result<Vec3> {
    let (c, [u, v, w]) = mesh.cell_coords(p)?;
    let lc = mesh.local_cell(c);
    let id = lc * TETS_PER_CELL + tet_in_cell(mesh.cell_is_odd(lc), u, v, w);
    match mesh.tags[id] {
        TetTag::Exterior => Ok(fields.e[id]),
        TetTag::Interface => {
            let ci = mesh.tet_cut[id].expect("interface tets carry cut data") as usize;
            if mesh.cuts[ci].signed_distance(p) >= 0.0 {
                Ok(fields.e_plus[ci])
            } else {
                Ok(fields.e[id])
            }
        }
        TetTag::Interior => Err(Error::Numerical(format!(
            "field gather for a particle inside material at {:?}",
            [p.x, p.y, p.z]
        ))),
    }
}

pub fn gather_all(
    mesh: &SubdomainMesh,
    fields: &ElementFields,
    buf: &ParticleBuffer,
    e: &mut Vec<Vec3>,
) -> Result<()> {
    e.clear();
    for p in &buf.pos {
        e.push(gather(mesh, fields, p)?);
    }
    Ok(())
}

/// `v ← v + (q/m)·E·dt; x ← x + v·dt`. Particles whose update is not finite
/// are removed; their number is returned.
pub fn push_leapfrog(species: &Species, buf: &mut ParticleBuffer, e: &[Vec3], dt: f64) -> usize {
    let qm = species.qm;
    let mut bad = false;
    for ((x, v), f) in buf.pos.iter_mut().zip(buf.vel.iter_mut()).zip(e) {
        *v += f * (qm * dt);
        *x += *v * dt;
        bad |= !(x.iter().all(|c| c.is_finite()) && v.iter().all(|c| c.is_finite()));
    }
    if !bad {
        return 0;
    }
    let before = buf.len();
    buf.retain(|x, v| x.iter().chain(v.iter()).all(|c| c.is_finite()));
    before - buf.len()
}

/// Shift velocities by `−(q/m)·E·dt/2` so they lag positions by half a step.
pub fn half_step_back(species: &Species, buf: &mut ParticleBuffer, e: &[Vec3], dt: f64) {
    for (v, f) in buf.vel.iter_mut().zip(e) {
        *v -= f * (0.5 * species.qm * dt);
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use proptest::prelude::*;

    use super::*;
    use crate::ife::{AssembledSystem, BoundarySpec, FieldProblem, Permittivity};
    use crate::mesh::GlobalMeshSpec;
    use crate::particles::{SpeciesConfig, SpeciesSource};
    use crate::rng::{stream, Purpose};
    use rand::Rng;

    fn electron() -> Species {
        Species::new(
            SpeciesConfig {
                name: "e".into(),
                charge: -1.0,
                mass_ratio: 1.0,
                temperature_ev: 1.0,
                drift: [0.0; 3],
                density: 1.0,
                particles_per_cell: 1,
                source: SpeciesSource::Ambient,
            },
            1.0,
            1.0,
        )
        .unwrap()
    }

    fn cube() -> SubdomainMesh {
        let g = GlobalMeshSpec::from_extents([0.0; 3], [4.0; 3], 1.0).unwrap();
        SubdomainMesh::build(&g, [0; 3], [[0, 4]; 3], [false; 3], [false; 3], None).unwrap()
    }

    #[test]
    fn node_and_center_deposits() {
        let m = cube();
        let s = electron();
        let mut q = vec![0.0; m.node_count()];
        let mut b = ParticleBuffer::default();
        b.push(Vec3::new(1.0, 2.0, 3.0), Vec3::zeros());
        scatter(&m, &s, &b, &mut q).unwrap();
        assert_eq!(q[m.local_node([1, 2, 3])], -1.0);
        assert_eq!(q.iter().filter(|&&x| x != 0.0).count(), 1);
        q.fill(0.0);
        b.pos[0] = Vec3::new(1.5, 1.5, 1.5);
        scatter(&m, &s, &b, &mut q).unwrap();
        for n in m.cell_nodes(m.local_cell([1, 1, 1])) {
            assert_eq!(q[n], -0.125);
        }
    }

    proptest! {
        #[test]
        fn scatter_conserves_charge(seed in 0u64..1000) {
            let m = cube();
            let s = electron();
            let mut rng = stream(seed, Purpose::Test, 0, 0, 0);
            let mut b = ParticleBuffer::default();
            for _ in 0..1000 {
                b.push(Vec3::from([0; 3].map(|_| 4.0 * rng.random::<f64>())), Vec3::zeros());
            }
            let mut q = vec![0.0; m.node_count()];
            scatter(&m, &s, &b, &mut q).unwrap();
            let total: f64 = q.iter().sum();
            prop_assert!((total + 1000.0).abs() <= 1e-12 * 1000.0);
        }
    }

    #[test]
    fn density_halves_boundary_volumes() {
        let m = cube();
        let q = vec![1.0; m.node_count()];
        let mut rho = Vec::new();
        charge_to_density(&m, &q, &mut rho);
        assert_eq!(rho[m.local_node([2, 2, 2])], 1.0);
        assert_eq!(rho[m.local_node([0, 2, 2])], 2.0);
        assert_eq!(rho[m.local_node([0, 4, 2])], 4.0);
        assert_eq!(rho[m.local_node([4, 0, 0])], 8.0);
    }

    fn fields_for(
        phi_of: impl Fn(&Vec3) -> f64 + Send + Sync + 'static,
    ) -> (SubdomainMesh, ElementFields) {
        let m = cube();
        let g: Arc<dyn Fn(&Vec3) -> f64 + Send + Sync> = Arc::new(phi_of);
        let prob = FieldProblem::new(
            Permittivity::uniform(1.0),
            BoundarySpec::all_dirichlet(g.clone()),
        )
        .unwrap();
        let sys = AssembledSystem::assemble(&m, &prob).unwrap();
        let phi: Vec<f64> = (0..m.node_count())
            .map(|i| g(&m.local_node_position(i)))
            .collect();
        let mut f = ElementFields::default();
        sys.element_fields(&m, &phi, &mut f);
        (m, f)
    }

    #[test]
    fn linear_and_constant_potentials() {
        let (m, f) = fields_for(|p| p.x);
        for p in [Vec3::new(0.3, 1.7, 2.2), Vec3::new(3.9, 0.1, 0.0)] {
            assert!((gather(&m, &f, &p).unwrap() - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-12);
        }
        let (m, f) = fields_for(|_| 3.0);
        assert!(gather(&m, &f, &Vec3::new(1.1, 2.2, 3.3)).unwrap().norm() < 1e-12);
    }

    #[test]
    fn free_flight_and_uniform_acceleration() {
        let s = electron();
        let mut b = ParticleBuffer::default();
        let (x0, v0) = (Vec3::new(0.1, 0.2, 0.3), Vec3::new(1.0, -2.0, 0.5));
        b.push(x0, v0);
        let dt = 0.01;
        for _ in 0..100 {
            push_leapfrog(&s, &mut b, &[Vec3::zeros()], dt);
        }
        assert!((b.pos[0] - (x0 + v0 * 1.0)).norm() < 1e-12);

        // E = (1,0,0) on an electron: a = −1; velocities staggered by −dt/2
        let mut b = ParticleBuffer::default();
        b.push(Vec3::zeros(), Vec3::zeros());
        let e = [Vec3::new(1.0, 0.0, 0.0)];
        half_step_back(&s, &mut b, &e, dt);
        for _ in 0..100 {
            push_leapfrog(&s, &mut b, &e, dt);
        }
        let exact = -0.5 * 1.0f64.powi(2);
        assert!((b.pos[0].x - exact).abs() <= 1e-3);

        let mut ion = s.clone();
        ion.qm = 1.0 / 1836.0;
        let mut bi = ParticleBuffer::default();
        bi.push(Vec3::zeros(), Vec3::zeros());
        push_leapfrog(&ion, &mut bi, &e, dt);
        let mut be = ParticleBuffer::default();
        be.push(Vec3::zeros(), Vec3::zeros());
        push_leapfrog(&s, &mut be, &e, dt);
        assert!((bi.vel[0].x * 1836.0 + be.vel[0].x).abs() < 1e-15);
    }

    #[test]
    fn non_finite_particles_are_dropped() {
        let s = electron();
        let mut b = ParticleBuffer::default();
        b.push(Vec3::zeros(), Vec3::zeros());
        b.push(Vec3::zeros(), Vec3::new(f64::NAN, 0.0, 0.0));
        assert_eq!(push_leapfrog(&s, &mut b, &[Vec3::zeros(); 2], 0.1), 1);
        assert_eq!(b.len(), 1);
    }
}
