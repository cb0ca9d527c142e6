use super::ParticleBuffer;
use crate::ddm::DecompTopology;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::mesh::SubdomainMesh;

/// Particles leaving one rank for one neighbor, per species.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MigrantBatch {
    pub species: Vec<ParticleBuffer>,
}

impl MigrantBatch {
    pub fn count(&self) -> usize {
        self.species.iter().map(|b| b.len()).sum()
    }
}

/// Remove particles outside the owned region and group them by destination
/// rank. A destination that is not a neighbor means the particle moved too
/// far in one step.
pub fn split_emigrants(
    rank: usize,
    mesh: &SubdomainMesh,
    topology: &DecompTopology,
    buffers: &mut [ParticleBuffer],
) -> Result<Vec<(usize, MigrantBatch)>> {
    let ns = buffers.len();
    let mut out: Vec<(usize, MigrantBatch)> = Vec::new();
    for (s, buf) in buffers.iter_mut().enumerate() {
        let mut err = None;
        buf.retain(|x, v| {
            if mesh.owns_position(x) {
                return true;
            }
            let dest = topology.owner_of_position(x);
            if dest == rank || !topology.is_neighbor(rank, dest) {
                err.get_or_insert(Error::MigrationTooFar {
                    rank,
                    position: [x.x, x.y, x.z],
                });
                return true;
            }
            let slot = match out.iter().position(|(d, _)| *d == dest) {
                Some(i) => i,
                None => {
                    out.push((
                        dest,
                        MigrantBatch {
                            species: vec![ParticleBuffer::default(); ns],
                        },
                    ));
                    out.len() - 1
                }
            };
            out[slot].1.species[s].push(*x, *v);
            false
        });
        if let Some(e) = err {
            return Err(e);
        }
    }
    out.sort_by_key(|(d, _)| *d);
    Ok(out)
}

/// Append received particles in ascending source order.
pub fn receive_immigrants(
    mesh: &SubdomainMesh,
    buffers: &mut [ParticleBuffer],
    inbox: Vec<(usize, MigrantBatch)>,
) -> Result<usize> {
    let mut n = 0;
    for (src, batch) in inbox {
        if batch.species.len() != buffers.len() {
            return Err(Error::Protocol(format!(
                "migrant batch from rank {src} has wrong species count"
            )));
        }
        for (buf, b) in buffers.iter_mut().zip(batch.species) {
            for (x, v) in b.pos.into_iter().zip(b.vel) {
                if !mesh.owns_position(&x) {
                    return Err(Error::Protocol(format!(
                        "rank {src} sent a particle at {:?} outside the receiver's owned region",
                        [x.x, x.y, x.z]
                    )));
                }
                buf.push(x, v);
                n += 1;
            }
        }
    }
    Ok(n)
}

/// Flat encoding used for message transport; round-trips bit patterns.
pub fn encode(batch: &MigrantBatch) -> Vec<f64> {
    let mut out = vec![batch.species.len() as f64];
    for b in &batch.species {
        out.push(b.len() as f64);
        for (x, v) in b.pos.iter().zip(&b.vel) {
            out.extend_from_slice(&[x.x, x.y, x.z, v.x, v.y, v.z]);
        }
    }
    out
}

pub fn decode(data: &[f64]) -> Result<MigrantBatch> {
    let bad = || Error::Protocol("truncated migrant message".into());
    let mut it = data.iter().copied();
    let ns = it.next().ok_or_else(bad)? as usize;
    let mut species = Vec::with_capacity(ns);
    for _ in 0..ns {
        let n = it.next().ok_or_else(bad)? as usize;
        let mut b = ParticleBuffer::default();
        for _ in 0..n {
            let mut r = [0.0; 6];
            for c in &mut r {
                *c = it.next().ok_or_else(bad)?;
            }
            b.push(Vec3::new(r[0], r[1], r[2]), Vec3::new(r[3], r[4], r[5]));
        }
        species.push(b);
    }
    if it.next().is_some() {
        return Err(Error::Protocol("trailing data in migrant message".into()));
    }
    Ok(MigrantBatch { species })
}
