use std::fmt;
use std::sync::Arc;

use super::{element_stiffness, ife_tet_basis, standard_tet_basis, ElementBasis};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::mesh::cut::tet_volume;
use crate::mesh::tets::reference_gradients;
use crate::mesh::{SubdomainMesh, TetTag, TETS_PER_CELL};
use crate::solver::CsrMatrix;

pub type ScalarField = Arc<dyn Fn(&Vec3) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum FaceCondition {
    /// Prescribed potential.
    Dirichlet(ScalarField),
    /// Prescribed outward normal derivative `∂φ/∂n`.
    Neumann(ScalarField),
}

impl FaceCondition {
    pub fn dirichlet_const(v: f64) -> Self {
        FaceCondition::Dirichlet(Arc::new(move |_| v))
    }

    pub fn neumann_zero() -> Self {
        FaceCondition::Neumann(Arc::new(|_| 0.0))
    }

    pub fn is_dirichlet(&self) -> bool {
        matches!(self, FaceCondition::Dirichlet(_))
    }
}

impl fmt::Debug for FaceCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.is_dirichlet() {
            "Dirichlet"
        } else {
            "Neumann"
        })
    }
}

/// Conditions on the six global faces, ordered
/// `x_min, x_max, y_min, y_max, z_min, z_max`.
#[derive(Clone, Debug)]
pub struct BoundarySpec {
    pub faces: [FaceCondition; 6],
}

impl BoundarySpec {
    pub fn all_dirichlet(g: ScalarField) -> Self {
        BoundarySpec {
            faces: std::array::from_fn(|_| FaceCondition::Dirichlet(g.clone())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.faces.iter().any(FaceCondition::is_dirichlet) {
            return Err(Error::Config(
                "at least one global face must carry a Dirichlet condition".into(),
            ));
        }
        Ok(())
    }
}

/// Material permittivity overridden below a given height, decided per
/// element by its centroid.
#[derive(Clone, Debug, PartialEq)]
pub struct PermittivityLayer {
    pub below_z: f64,
    pub eps: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Permittivity {
    /// Material side.
    pub minus: f64,
    /// Plasma side.
    pub plus: f64,
    pub layers: Vec<PermittivityLayer>,
}

impl Permittivity {
    pub fn uniform(eps: f64) -> Self {
        Permittivity {
            minus: eps,
            plus: eps,
            layers: Vec::new(),
        }
    }

    pub fn two_sided(minus: f64, plus: f64) -> Self {
        Permittivity {
            minus,
            plus,
            layers: Vec::new(),
        }
    }

    /// Material permittivity for an element with the given centroid.
    pub fn material_at(&self, centroid: &Vec3) -> f64 {
        self.layers
            .iter()
            .filter(|l| centroid.z < l.below_z)
            .min_by(|a, b| a.below_z.total_cmp(&b.below_z))
            .map_or(self.minus, |l| l.eps)
    }

    fn validate(&self) -> Result<()> {
        let all = [self.minus, self.plus]
            .into_iter()
            .chain(self.layers.iter().map(|l| l.eps));
        for e in all {
            if !(e > 0.0) || !e.is_finite() {
                return Err(Error::Config(format!(
                    "permittivity must be positive, got {e}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct FieldProblem {
    pub permittivity: Permittivity,
    pub boundary: BoundarySpec,
}

impl FieldProblem {
    pub fn new(permittivity: Permittivity, boundary: BoundarySpec) -> Result<Self> {
        permittivity.validate()?;
        boundary.validate()?;
        Ok(FieldProblem {
            permittivity,
            boundary,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Free(usize),
    /// Index into the Dirichlet arrays.
    Dirichlet(usize),
}

/// Subdomain system after Dirichlet elimination: `A_ff u_f = f_f - A_fD u_D`.
#[derive(Clone, Debug)]
pub struct AssembledSystem {
    pub a_ff: CsrMatrix,
    pub a_fd: CsrMatrix,
    pub kinds: Vec<NodeKind>,
    pub free_nodes: Vec<usize>,
    pub dirichlet_nodes: Vec<usize>,
    /// Current Dirichlet data; guard entries are overwritten by the halo exchange.
    pub dirichlet_values: Vec<f64>,
    /// `true` for Dirichlet nodes on a subdomain (guard) boundary.
    pub dirichlet_is_guard: Vec<bool>,
    /// `∫ψ_i` under vertex quadrature.
    pub lumped_volume: Vec<f64>,
    pub neumann_load: Vec<f64>,
    /// Per interface cut: `(node, A·ψ_i(facet centroid))`.
    pub facet_weights: Vec<[(usize, f64); 4]>,
    /// Per interface cut.
    pub cut_basis: Vec<ElementBasis>,
    pub fallback_count: usize,
    h: f64,
}

fn global_faces_of(mesh: &SubdomainMesh, node: usize) -> impl Iterator<Item = usize> {
    let g = mesh.global_node_ijk(node);
    let n = mesh.global.cells;
    (0..3).flat_map(move |a| {
        let lo = (g[a] == 0).then_some(2 * a);
        let hi = (g[a] == n[a]).then_some(2 * a + 1);
        lo.into_iter().chain(hi)
    })
}

fn on_guard_boundary(mesh: &SubdomainMesh, node: usize) -> bool {
    let l = mesh.local_node_ijk(node);
    (0..3).any(|a| {
        (l[a] == 0 && mesh.has_lower_neighbor[a])
            || (l[a] == mesh.cells[a] && mesh.has_upper_neighbor[a])
    })
}

impl AssembledSystem {
    pub fn assemble(mesh: &SubdomainMesh, problem: &FieldProblem) -> Result<Self> {
        problem.boundary.validate()?;
        let n = mesh.node_count();
        let h = mesh.h();
        let eps = &problem.permittivity;

        let mut kinds = Vec::with_capacity(n);
        let mut free_nodes = Vec::new();
        let mut dirichlet_nodes = Vec::new();
        let mut dirichlet_values = Vec::new();
        let mut dirichlet_is_guard = Vec::new();
        for node in 0..n {
            let dface =
                global_faces_of(mesh, node).find(|&f| problem.boundary.faces[f].is_dirichlet());
            if let Some(f) = dface {
                let FaceCondition::Dirichlet(g) = &problem.boundary.faces[f] else {
                    unreachable!()
                };
                kinds.push(NodeKind::Dirichlet(dirichlet_nodes.len()));
                dirichlet_nodes.push(node);
                dirichlet_values.push(g(&mesh.local_node_position(node)));
                dirichlet_is_guard.push(false);
            } else if on_guard_boundary(mesh, node) {
                kinds.push(NodeKind::Dirichlet(dirichlet_nodes.len()));
                dirichlet_nodes.push(node);
                dirichlet_values.push(0.0);
                dirichlet_is_guard.push(true);
            } else {
                kinds.push(NodeKind::Free(free_nodes.len()));
                free_nodes.push(node);
            }
        }

        let mut lumped_volume = vec![0.0; n];
        let mut cut_basis = Vec::with_capacity(mesh.cuts.len());
        let mut facet_weights = Vec::with_capacity(mesh.cuts.len());
        let mut fallback_count = 0;
        let mut tff = Vec::with_capacity(mesh.tet_count() * 16);
        let mut tfd = Vec::new();
        for lc in 0..mesh.cell_count() {
            let odd = mesh.cell_is_odd(lc);
            for t in 0..TETS_PER_CELL {
                let id = lc * TETS_PER_CELL + t;
                let nodes = mesh.tet_nodes(lc, t);
                let verts = mesh.tet_vertices(lc, t);
                let vol = tet_volume(&verts);
                let centroid = (verts[0] + verts[1] + verts[2] + verts[3]) / 4.0;
                let eps_minus = eps.material_at(&centroid);
                let basis = match mesh.tags[id] {
                    TetTag::Interface => {
                        let cut = mesh.cut_of(id).expect("interface tets carry cut data");
                        match ife_tet_basis(&verts, cut, eps_minus, eps.plus) {
                            Ok(b) => ElementBasis::Interface {
                                basis: b,
                                eps_minus,
                                eps_plus: eps.plus,
                                volume_minus: cut.volume_minus,
                                volume_plus: cut.volume_plus,
                            },
                            Err(_) => {
                                fallback_count += 1;
                                let avg = (eps_minus * cut.volume_minus
                                    + eps.plus * cut.volume_plus)
                                    / (cut.volume_minus + cut.volume_plus);
                                let std = standard_tet_basis(&verts)?;
                                ElementBasis::Standard {
                                    grads: std.map(|p| p.grad),
                                    eps: avg,
                                }
                            }
                        }
                    }
                    tag => {
                        let g = reference_gradients(odd, t);
                        let grads = g.map(|v| Vec3::new(v[0], v[1], v[2]) / h);
                        let e = if tag == TetTag::Interior {
                            eps_minus
                        } else {
                            eps.plus
                        };
                        ElementBasis::Standard { grads, eps: e }
                    }
                };
                let k = element_stiffness(&basis, vol);
                for i in 0..4 {
                    lumped_volume[nodes[i]] += 0.25 * vol;
                    let NodeKind::Free(fi) = kinds[nodes[i]] else {
                        continue;
                    };
                    for j in 0..4 {
                        match kinds[nodes[j]] {
                            NodeKind::Free(fj) => tff.push((fi, fj, k[i][j])),
                            NodeKind::Dirichlet(dj) => tfd.push((fi, dj, k[i][j])),
                        }
                    }
                }
                if let Some(cut) = mesh.cut_of(id) {
                    let w = match &basis {
                        ElementBasis::Interface { basis, .. } => std::array::from_fn(|i| {
                            (
                                nodes[i],
                                cut.facet_area * basis.eval(i, &cut.facet_centroid),
                            )
                        }),
                        ElementBasis::Standard { .. } => {
                            let std = standard_tet_basis(&verts)?;
                            std::array::from_fn(|i| {
                                (nodes[i], cut.facet_area * std[i].eval(&cut.facet_centroid))
                            })
                        }
                    };
                    debug_assert_eq!(cut_basis.len(), mesh.tet_cut[id].unwrap() as usize);
                    cut_basis.push(basis);
                    facet_weights.push(w);
                }
            }
        }

        let neumann_load = neumann_load(mesh, problem, &kinds);
        let nf = free_nodes.len();
        let nd = dirichlet_nodes.len();
        Ok(AssembledSystem {
            a_ff: CsrMatrix::from_triplets(nf, nf, tff),
            a_fd: CsrMatrix::from_triplets(nf, nd, tfd),
            kinds,
            free_nodes,
            dirichlet_nodes,
            dirichlet_values,
            dirichlet_is_guard,
            lumped_volume,
            neumann_load,
            facet_weights,
            cut_basis,
            fallback_count,
            h,
        })
    }

    pub fn free_count(&self) -> usize {
        self.free_nodes.len()
    }

    /// Reduced right-hand side for nodal density `rho` and per-cut surface
    /// charge density `sigma`.
    pub fn rhs(&self, rho: &[f64], sigma: &[f64], out: &mut Vec<f64>) {
        self.load(rho, sigma, out);
        self.apply_dirichlet(out);
    }

    /// Source terms of the reduced right-hand side, without the Dirichlet lift.
    pub fn load(&self, rho: &[f64], sigma: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.resize(self.free_nodes.len(), 0.0);
        for (f, &node) in self.free_nodes.iter().enumerate() {
            out[f] = rho[node] * self.lumped_volume[node] + self.neumann_load[node];
        }
        for (w, &s) in self.facet_weights.iter().zip(sigma) {
            if s == 0.0 {
                continue;
            }
            for &(node, wt) in w {
                if let NodeKind::Free(f) = self.kinds[node] {
                    out[f] += s * wt;
                }
            }
        }
    }

    /// Subtract `A_fD u_D` for the current Dirichlet data.
    pub fn apply_dirichlet(&self, out: &mut [f64]) {
        self.a_fd.sub_mul_vec(&self.dirichlet_values, out);
    }

    /// Scatter a reduced solution and the Dirichlet data into a nodal vector.
    pub fn expand(&self, free: &[f64], phi: &mut [f64]) {
        for (f, &node) in self.free_nodes.iter().enumerate() {
            phi[node] = free[f];
        }
        for (d, &node) in self.dirichlet_nodes.iter().enumerate() {
            phi[node] = self.dirichlet_values[d];
        }
    }

    pub fn restrict(&self, phi: &[f64], free: &mut Vec<f64>) {
        free.clear();
        free.extend(self.free_nodes.iter().map(|&n| phi[n]));
    }

    /// Electric field `-∇φ` per tetrahedron; interface tetrahedra store their
    /// material-side value in `e` and the plasma-side value in `e_plus`.
    pub fn element_fields(&self, mesh: &SubdomainMesh, phi: &[f64], fields: &mut ElementFields) {
        let nt = mesh.tet_count();
        fields.e.resize(nt, Vec3::zeros());
        fields.e_plus.resize(mesh.cuts.len(), Vec3::zeros());
        let all_ref: [[[[f64; 3]; 4]; 5]; 2] = [
            std::array::from_fn(|t| reference_gradients(false, t)),
            std::array::from_fn(|t| reference_gradients(true, t)),
        ];
        let inv_h = 1.0 / self.h;
        for lc in 0..mesh.cell_count() {
            let odd = mesh.cell_is_odd(lc) as usize;
            let corners = mesh.cell_nodes(lc);
            let table = crate::mesh::tets::cell_tets(odd == 1);
            for t in 0..TETS_PER_CELL {
                let id = lc * TETS_PER_CELL + t;
                let nodes = table[t].map(|v| corners[v]);
                if let Some(ci) = mesh.tet_cut[id] {
                    let ci = ci as usize;
                    match &self.cut_basis[ci] {
                        ElementBasis::Interface { basis, .. } => {
                            let mut em = Vec3::zeros();
                            let mut ep = Vec3::zeros();
                            for i in 0..4 {
                                em -= basis.minus[i].grad * phi[nodes[i]];
                                ep -= basis.plus[i].grad * phi[nodes[i]];
                            }
                            fields.e[id] = em;
                            fields.e_plus[ci] = ep;
                        }
                        ElementBasis::Standard { grads, .. } => {
                            let mut e = Vec3::zeros();
                            for i in 0..4 {
                                e -= grads[i] * phi[nodes[i]];
                            }
                            fields.e[id] = e;
                            fields.e_plus[ci] = e;
                        }
                    }
                } else {
                    let g = &all_ref[odd][t];
                    let mut e = Vec3::zeros();
                    for i in 0..4 {
                        let p = phi[nodes[i]] * inv_h;
                        e -= Vec3::new(g[i][0], g[i][1], g[i][2]) * p;
                    }
                    fields.e[id] = e;
                }
            }
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct ElementFields {
    pub e: Vec<Vec3>,
    pub e_plus: Vec<Vec3>,
}

/// `∫_{Γ_N} ε p ψ_i dS` by the centroid rule on each boundary triangle.
fn neumann_load(mesh: &SubdomainMesh, problem: &FieldProblem, kinds: &[NodeKind]) -> Vec<f64> {
    let mut load = vec![0.0; mesh.node_count()];
    let gcells = mesh.global.cells;
    for lc in 0..mesh.cell_count() {
        let gc = mesh.global_cell_ijk(lc);
        for a in 0..3 {
            for side in 0..2 {
                let on_face = if side == 0 {
                    gc[a] == 0
                } else {
                    gc[a] + 1 == gcells[a]
                };
                if !on_face {
                    continue;
                }
                let FaceCondition::Neumann(p) = &problem.boundary.faces[2 * a + side] else {
                    continue;
                };
                let plane = if side == 0 { 0 } else { gcells[a] };
                for t in 0..TETS_PER_CELL {
                    let nodes = mesh.tet_nodes(lc, t);
                    for skip in 0..4 {
                        let tri: Vec<usize> =
                            (0..4).filter(|&k| k != skip).map(|k| nodes[k]).collect();
                        if !tri.iter().all(|&nd| mesh.global_node_ijk(nd)[a] == plane) {
                            continue;
                        }
                        let pts: Vec<Vec3> =
                            tri.iter().map(|&nd| mesh.local_node_position(nd)).collect();
                        let area = 0.5 * (pts[1] - pts[0]).cross(&(pts[2] - pts[0])).norm();
                        let c = (pts[0] + pts[1] + pts[2]) / 3.0;
                        let id = lc * TETS_PER_CELL + t;
                        let eps = face_eps(mesh, problem, id, &c);
                        let v = eps * p(&c) * area / 3.0;
                        for &nd in &tri {
                            if matches!(kinds[nd], NodeKind::Free(_)) {
                                load[nd] += v;
                            }
                        }
                    }
                }
            }
        }
    }
    load
}

fn face_eps(mesh: &SubdomainMesh, problem: &FieldProblem, id: usize, x: &Vec3) -> f64 {
    let verts = mesh.tet_vertices(id / TETS_PER_CELL, id % TETS_PER_CELL);
    let centroid = (verts[0] + verts[1] + verts[2] + verts[3]) / 4.0;
    let eps = &problem.permittivity;
    match mesh.tags[id] {
        TetTag::Interior => eps.material_at(&centroid),
        TetTag::Exterior => eps.plus,
        TetTag::Interface => {
            if mesh.cut_of(id).is_some_and(|c| c.signed_distance(x) < 0.0) {
                eps.material_at(&centroid)
            } else {
                eps.plus
            }
        }
    }
}
