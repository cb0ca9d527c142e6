use std::collections::HashMap;

use crate::ddm::DecompTopology;
use crate::error::{Error, Result};
use crate::mesh::{SubdomainMesh, MIN_FACET_AREA, TETS_PER_CELL};

/// Surface charge held on each interface facet of a subdomain's guarded
/// mesh. Facets in the overlap are replicated on every rank holding them:
/// absorption deposits are forwarded to those ranks, emission debits are
/// recomputed identically on each replica.
#[derive(Clone, Debug, Default)]
pub struct SurfaceChargeLedger {
    /// Accumulated charge per local cut.
    pub charge: Vec<f64>,
    pub area: Vec<f64>,
    keys: Vec<u64>,
    index: HashMap<u64, usize>,
    /// `true` where this rank owns the facet's cell.
    owned: Vec<bool>,
    pending: Vec<(u64, f64)>,
}

impl SurfaceChargeLedger {
    pub fn new(mesh: &SubdomainMesh) -> Self {
        let keys: Vec<u64> = mesh.cuts.iter().map(|c| mesh.facet_key(c)).collect();
        let owned = mesh
            .cuts
            .iter()
            .map(|c| {
                let g = mesh.global_cell_ijk(c.tet / TETS_PER_CELL);
                (0..3).all(|a| g[a] >= mesh.owned[a][0] && g[a] < mesh.owned[a][1])
            })
            .collect();
        SurfaceChargeLedger {
            charge: vec![0.0; keys.len()],
            area: mesh.cuts.iter().map(|c| c.facet_area).collect(),
            index: keys.iter().enumerate().map(|(i, &k)| (k, i)).collect(),
            keys,
            owned,
            pending: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.charge.len()
    }

    pub fn is_empty(&self) -> bool {
        self.charge.is_empty()
    }

    pub fn key(&self, cut: usize) -> u64 {
        self.keys[cut]
    }

    /// Charge collected from an absorbed particle; forwarded to replicas.
    pub fn deposit(&mut self, cut: usize, q: f64) {
        self.charge[cut] += q;
        self.pending.push((self.keys[cut], q));
    }

    /// Charge change computed identically on every replica.
    pub fn adjust_replicated(&mut self, cut: usize, q: f64) {
        self.charge[cut] += q;
    }

    /// Group pending deposits by neighbor whose guarded extent holds the facet.
    pub fn take_outgoing(
        &mut self,
        topology: &DecompTopology,
        rank: usize,
    ) -> Vec<(usize, Vec<(u64, f64)>)> {
        let pending = std::mem::take(&mut self.pending);
        let mut out: Vec<(usize, Vec<(u64, f64)>)> = topology
            .neighbors(rank)
            .into_iter()
            .map(|(_, q)| (q, Vec::new()))
            .collect();
        let nc = topology.global.cells;
        for (key, q) in pending {
            let cell = key / TETS_PER_CELL as u64;
            let g = [
                (cell % nc[0] as u64) as usize,
                ((cell / nc[0] as u64) % nc[1] as u64) as usize,
                (cell / (nc[0] * nc[1]) as u64) as usize,
            ];
            for (dest, list) in out.iter_mut() {
                let e = topology.extent(*dest);
                if (0..3).all(|a| g[a] >= e[a][0] && g[a] < e[a][1]) {
                    list.push((key, q));
                }
            }
        }
        out.retain(|(_, l)| !l.is_empty());
        out
    }

    pub fn apply_incoming(&mut self, items: &[(u64, f64)]) -> Result<()> {
        for &(key, q) in items {
            let i = *self.index.get(&key).ok_or_else(|| {
                Error::Protocol(format!("surface charge for unknown facet {key}"))
            })?;
            self.charge[i] += q;
        }
        Ok(())
    }

    /// Charge on facets whose cell this rank owns; summing over ranks counts
    /// every facet once.
    pub fn owned_total(&self) -> f64 {
        self.charge
            .iter()
            .zip(&self.owned)
            .filter(|(_, &o)| o)
            .map(|(q, _)| q)
            .sum()
    }

    pub fn is_owned(&self, cut: usize) -> bool {
        self.owned[cut]
    }
}

/// Surface charge density per local facet (`charge / area`) used as the
/// interface source term. Facets below the minimum area never collect
/// charge because deposits go to the nearest facet above it.
pub fn facet_charge_to_jump(ledger: &SurfaceChargeLedger, h: f64, sigma: &mut Vec<f64>) {
    let min_area = MIN_FACET_AREA * h * h;
    sigma.clear();
    sigma.extend(ledger.charge.iter().zip(&ledger.area).map(|(&q, &a)| {
        if a >= min_area {
            q / a
        } else {
            0.0
        }
    }));
}
