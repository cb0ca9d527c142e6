use super::DecompTopology;
use crate::error::{Error, Result};
use crate::exec::route;
use crate::ife::AssembledSystem;
use crate::mesh::SubdomainMesh;

/// Per-rank guard exchange lists, ordered by global node id within each
/// neighbor pairing.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HaloPlan {
    /// `(neighbor, local node ids)` whose values are sent.
    pub send: Vec<(usize, Vec<usize>)>,
    /// `(neighbor, Dirichlet slots)` that the neighbor's values overwrite.
    pub recv: Vec<(usize, Vec<usize>)>,
    /// Global node ids of the receive lists, kept for consistency checks.
    pub recv_global: Vec<(usize, Vec<usize>)>,
}

/// Per-rank charge reduction lists.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ChargePlan {
    pub send: Vec<(usize, Vec<usize>)>,
    pub recv: Vec<(usize, Vec<usize>)>,
}

fn sort_pairs(v: &mut [(usize, Vec<(usize, usize)>)]) {
    v.sort_by_key(|(r, _)| *r);
    for (_, l) in v.iter_mut() {
        l.sort_by_key(|&(g, _)| g);
    }
}

fn bucket(v: &mut Vec<(usize, Vec<(usize, usize)>)>, rank: usize, item: (usize, usize)) {
    match v.iter_mut().find(|(r, _)| *r == rank) {
        Some((_, l)) => l.push(item),
        None => v.push((rank, vec![item])),
    }
}

/// Guard Dirichlet nodes of every rank are received from the rank owning
/// them; that rank sends its solution value at the same global node.
pub fn build_halo_plans(
    topology: &DecompTopology,
    meshes: &[&SubdomainMesh],
    systems: &[&AssembledSystem],
) -> Result<Vec<HaloPlan>> {
    let n = topology.ranks();
    if meshes.len() != n || systems.len() != n {
        return Err(Error::Protocol(format!(
            "halo plan needs {n} meshes and systems"
        )));
    }
    // (global id, local id) buckets keyed by peer rank
    let mut recv: Vec<Vec<(usize, Vec<(usize, usize)>)>> = vec![Vec::new(); n];
    let mut send: Vec<Vec<(usize, Vec<(usize, usize)>)>> = vec![Vec::new(); n];
    for q in 0..n {
        let sys = systems[q];
        for (d, &node) in sys.dirichlet_nodes.iter().enumerate() {
            if !sys.dirichlet_is_guard[d] {
                continue;
            }
            let g = meshes[q].global_node_ijk(node);
            let p = topology.owner_of_node(g);
            if !topology.is_neighbor(p, q) {
                return Err(Error::Protocol(format!(
                    "guard node {g:?} of rank {q} is owned by non-neighbor {p}"
                )));
            }
            let local = meshes[p]
                .local_from_global(g)
                .ok_or_else(|| Error::Protocol(format!("rank {p} does not hold node {g:?}")))?;
            let gid = topology.global.node_id(g);
            bucket(&mut recv[q], p, (gid, d));
            bucket(&mut send[p], q, (gid, local));
        }
    }
    let mut plans = Vec::with_capacity(n);
    for r in 0..n {
        sort_pairs(&mut recv[r]);
        sort_pairs(&mut send[r]);
        plans.push(HaloPlan {
            send: send[r]
                .iter()
                .map(|(q, l)| (*q, l.iter().map(|x| x.1).collect()))
                .collect(),
            recv: recv[r]
                .iter()
                .map(|(q, l)| (*q, l.iter().map(|x| x.1).collect()))
                .collect(),
            recv_global: recv[r]
                .iter()
                .map(|(q, l)| (*q, l.iter().map(|x| x.0).collect()))
                .collect(),
        });
    }
    Ok(plans)
}

/// Charge deposited by rank `p` can only land on nodes of its owned cells;
/// those nodes that also lie in a neighbor's guarded extent are sent there.
pub fn build_charge_plans(
    topology: &DecompTopology,
    meshes: &[&SubdomainMesh],
) -> Result<Vec<ChargePlan>> {
    let n = topology.ranks();
    if meshes.len() != n {
        return Err(Error::Protocol(format!("charge plan needs {n} meshes")));
    }
    let mut plans = vec![ChargePlan::default(); n];
    for p in 0..n {
        let support = topology.owned(p);
        for (_, q) in topology.neighbors(p) {
            let ext = topology.extent(q);
            let lo: [usize; 3] = std::array::from_fn(|a| support[a][0].max(ext[a][0]));
            let hi: [usize; 3] = std::array::from_fn(|a| support[a][1].min(ext[a][1]));
            if (0..3).any(|a| lo[a] > hi[a]) {
                continue;
            }
            let (mut s, mut r) = (Vec::new(), Vec::new());
            for k in lo[2]..=hi[2] {
                for j in lo[1]..=hi[1] {
                    for i in lo[0]..=hi[0] {
                        let g = [i, j, k];
                        let missing =
                            || Error::Protocol(format!("node {g:?} missing from charge plan"));
                        s.push(meshes[p].local_from_global(g).ok_or_else(missing)?);
                        r.push(meshes[q].local_from_global(g).ok_or_else(missing)?);
                    }
                }
            }
            plans[p].send.push((q, s));
            plans[q].recv.push((p, r));
        }
    }
    for pl in &mut plans {
        pl.recv.sort_by_key(|(r, _)| *r);
    }
    Ok(plans)
}

fn unpack<'a>(
    rank: usize,
    expected: &'a [(usize, Vec<usize>)],
    inbox: &[(usize, Vec<f64>)],
) -> Result<impl Iterator<Item = (usize, f64)> + 'a> {
    if inbox.len() != expected.len() {
        return Err(Error::Protocol(format!(
            "rank {rank} expected {} messages, received {}",
            expected.len(),
            inbox.len()
        )));
    }
    for ((src, list), (from, vals)) in expected.iter().zip(inbox) {
        if src != from || list.len() != vals.len() {
            return Err(Error::Protocol(format!(
                "rank {rank}: message from {from} with {} values does not match plan ({src}, {})",
                vals.len(),
                list.len()
            )));
        }
    }
    let values: Vec<(usize, f64)> = expected
        .iter()
        .zip(inbox)
        .flat_map(|((_, list), (_, vals))| list.iter().copied().zip(vals.iter().copied()))
        .collect();
    Ok(values.into_iter())
}

impl HaloPlan {
    pub fn pack(&self, phi: &[f64]) -> Vec<(usize, Vec<f64>)> {
        self.send
            .iter()
            .map(|(q, l)| (*q, l.iter().map(|&i| phi[i]).collect()))
            .collect()
    }

    /// Overwrite guard Dirichlet slots from received messages.
    pub fn apply(
        &self,
        rank: usize,
        inbox: &[(usize, Vec<f64>)],
        dirichlet: &mut [f64],
    ) -> Result<()> {
        for (slot, v) in unpack(rank, &self.recv, inbox)? {
            dirichlet[slot] = v;
        }
        Ok(())
    }
}

impl ChargePlan {
    pub fn pack(&self, charge: &[f64]) -> Vec<(usize, Vec<f64>)> {
        self.send
            .iter()
            .map(|(q, l)| (*q, l.iter().map(|&i| charge[i]).collect()))
            .collect()
    }

    /// Add neighbor deposits in ascending source order.
    pub fn apply(
        &self,
        rank: usize,
        inbox: &[(usize, Vec<f64>)],
        charge: &mut [f64],
    ) -> Result<()> {
        for (node, v) in unpack(rank, &self.recv, inbox)? {
            charge[node] += v;
        }
        Ok(())
    }
}

/// Two-phase exchange of guard potentials: every rank packs from its local
/// solution, then every rank overwrites its guard Dirichlet data.
pub fn exchange_guard_potentials(
    plans: &[HaloPlan],
    phi: &[&[f64]],
    dirichlet: &mut [&mut [f64]],
) -> Result<()> {
    let n = plans.len();
    let mut msgs = Vec::new();
    for (r, plan) in plans.iter().enumerate() {
        msgs.extend(plan.pack(phi[r]).into_iter().map(|(q, v)| (r, q, v)));
    }
    let inbox = route(n, msgs)?;
    for (r, plan) in plans.iter().enumerate() {
        plan.apply(r, &inbox[r], dirichlet[r])?;
    }
    Ok(())
}

/// Sum guard-region charge contributions across neighbors.
pub fn reduce_guard_charge(plans: &[ChargePlan], charge: &mut [&mut [f64]]) -> Result<()> {
    let n = plans.len();
    let mut msgs = Vec::new();
    for (r, plan) in plans.iter().enumerate() {
        msgs.extend(plan.pack(charge[r]).into_iter().map(|(q, v)| (r, q, v)));
    }
    let inbox = route(n, msgs)?;
    for (r, plan) in plans.iter().enumerate() {
        plan.apply(r, &inbox[r], charge[r])?;
    }
    Ok(())
}
