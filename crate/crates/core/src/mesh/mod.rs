//! Uniform Cartesian PIC mesh, its tetrahedral FE/IFE view, and the
//! per-subdomain guarded local meshes.

pub mod cut;
pub mod tets;
pub mod vtk;

use crate::error::{Error, Result};
use crate::geometry::{LevelSetGeometry, Vec3};

pub use cut::{InterfaceCut, TetTag};
pub use tets::{split_cell_into_tets, TETS_PER_CELL};

/// Guard depth in PIC cells on every side that has a neighboring subdomain.
pub const GUARD_CELLS: usize = 2;

/// Facets smaller than this (in units of `h²`) cannot hold surface charge.
pub const MIN_FACET_AREA: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct GlobalMeshSpec {
    pub lower: [f64; 3],
    pub h: f64,
    /// Cell counts per axis.
    pub cells: [usize; 3],
}

impl GlobalMeshSpec {
    pub fn from_extents(lower: [f64; 3], upper: [f64; 3], h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Config(format!(
                "cell size must be positive, got {h}"
            )));
        }
        let mut cells = [0usize; 3];
        for a in 0..3 {
            let len = upper[a] - lower[a];
            let n = (len / h).round();
            if !(len > 0.0) || ((n * h - len) / len).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "axis {a} extent {len} is not a multiple of h = {h}"
                )));
            }
            if n < 4.0 {
                return Err(Error::Config(format!(
                    "axis {a} needs at least 4 cells, got {n}"
                )));
            }
            cells[a] = n as usize;
        }
        Ok(GlobalMeshSpec { lower, h, cells })
    }

    pub fn upper(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| self.lower[a] + self.h * self.cells[a] as f64)
    }

    pub fn nodes(&self) -> [usize; 3] {
        self.cells.map(|n| n + 1)
    }

    pub fn node_count(&self) -> usize {
        self.nodes().iter().product()
    }

    pub fn cell_count(&self) -> usize {
        self.cells.iter().product()
    }

    #[inline]
    pub fn node_id(&self, n: [usize; 3]) -> usize {
        let nn = self.nodes();
        n[0] + nn[0] * (n[1] + nn[1] * n[2])
    }

    #[inline]
    pub fn node_ijk(&self, id: usize) -> [usize; 3] {
        let nn = self.nodes();
        [id % nn[0], (id / nn[0]) % nn[1], id / (nn[0] * nn[1])]
    }

    #[inline]
    pub fn cell_id(&self, c: [usize; 3]) -> usize {
        c[0] + self.cells[0] * (c[1] + self.cells[1] * c[2])
    }

    #[inline]
    pub fn node_position(&self, n: [usize; 3]) -> Vec3 {
        Vec3::new(
            self.lower[0] + self.h * n[0] as f64,
            self.lower[1] + self.h * n[1] as f64,
            self.lower[2] + self.h * n[2] as f64,
        )
    }

    /// Global facet key of tetrahedron `t` in global cell `c`.
    #[inline]
    pub fn facet_key(&self, c: [usize; 3], t: usize) -> u64 {
        (self.cell_id(c) * TETS_PER_CELL + t) as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParticleLocation {
    /// Global cell indices.
    pub cell: [usize; 3],
    pub local_cell: usize,
    pub tet: usize,
    pub bary: [f64; 4],
}

impl ParticleLocation {
    #[inline]
    pub fn local_tet(&self) -> usize {
        self.local_cell * TETS_PER_CELL + self.tet
    }
}

/// One subdomain's guarded mesh.
#[derive(Clone, Debug)]
pub struct SubdomainMesh {
    pub global: GlobalMeshSpec,
    /// Position of this subdomain in the decomposition grid.
    pub coords: [usize; 3],
    /// Owned global cell range `[start, end)` per axis.
    pub owned: [[usize; 2]; 3],
    /// Guarded global cell range `[start, end)` per axis.
    pub extent: [[usize; 2]; 3],
    pub has_lower_neighbor: [bool; 3],
    pub has_upper_neighbor: [bool; 3],
    /// Local cell counts per axis.
    pub cells: [usize; 3],
    /// Snapped level-set value at each local node (`+inf` without geometry).
    pub node_ls: Vec<f64>,
    pub tags: Vec<TetTag>,
    /// Index into `cuts` for each local tetrahedron.
    pub tet_cut: Vec<Option<u32>>,
    pub cuts: Vec<InterfaceCut>,
    /// Cells whose nodes come within `L·√3·h` of material.
    pub near_material: Vec<bool>,
}

impl SubdomainMesh {
    pub fn build(
        global: &GlobalMeshSpec,
        coords: [usize; 3],
        owned: [[usize; 2]; 3],
        has_lower_neighbor: [bool; 3],
        has_upper_neighbor: [bool; 3],
        geometry: Option<&LevelSetGeometry>,
    ) -> Result<Self> {
        let mut extent = [[0usize; 2]; 3];
        for a in 0..3 {
            let [s, e] = owned[a];
            if e <= s || e > global.cells[a] {
                return Err(Error::Mesh(format!(
                    "invalid owned range {s}..{e} on axis {a}"
                )));
            }
            let lo = if has_lower_neighbor[a] {
                s.checked_sub(GUARD_CELLS)
            } else {
                Some(s)
            };
            let hi = if has_upper_neighbor[a] {
                e + GUARD_CELLS
            } else {
                e
            };
            match lo {
                Some(lo) if hi <= global.cells[a] => extent[a] = [lo, hi],
                _ => {
                    return Err(Error::Mesh(format!(
                        "guard cells on axis {a} would leave the global mesh"
                    )))
                }
            }
            if !has_lower_neighbor[a] && s != 0 || !has_upper_neighbor[a] && e != global.cells[a] {
                return Err(Error::Mesh(format!(
                    "axis {a}: a side without a neighbor must lie on the global boundary"
                )));
            }
        }
        let cells = [0, 1, 2].map(|a| extent[a][1] - extent[a][0]);
        let nodes = cells.map(|n| n + 1);
        let h = global.h;

        let mut node_ls = vec![f64::INFINITY; nodes.iter().product()];
        if let Some(g) = geometry {
            for k in 0..nodes[2] {
                for j in 0..nodes[1] {
                    for i in 0..nodes[0] {
                        let gn = [i + extent[0][0], j + extent[1][0], k + extent[2][0]];
                        node_ls[i + nodes[0] * (j + nodes[1] * k)] =
                            g.snapped_value(&global.node_position(gn), h);
                    }
                }
            }
        }

        let mut mesh = SubdomainMesh {
            global: global.clone(),
            coords,
            owned,
            extent,
            has_lower_neighbor,
            has_upper_neighbor,
            cells,
            node_ls,
            tags: Vec::new(),
            tet_cut: Vec::new(),
            cuts: Vec::new(),
            near_material: Vec::new(),
        };
        mesh.classify(geometry)?;
        Ok(mesh)
    }

    fn classify(&mut self, geometry: Option<&LevelSetGeometry>) -> Result<()> {
        let ncell = self.cell_count();
        self.tags = Vec::with_capacity(ncell * TETS_PER_CELL);
        self.tet_cut = Vec::with_capacity(ncell * TETS_PER_CELL);
        self.near_material = vec![false; ncell];
        let threshold = geometry
            .map(|g| g.lipschitz_bound() * 3f64.sqrt() * self.global.h)
            .unwrap_or(f64::NEG_INFINITY);
        for lc in 0..ncell {
            let corners = self.cell_nodes(lc);
            self.near_material[lc] = corners.iter().any(|&n| self.node_ls[n] < threshold);
            for t in 0..TETS_PER_CELL {
                let nodes = self.tet_nodes(lc, t);
                let ls = nodes.map(|n| self.node_ls[n]);
                let tag = cut::classify_element(&ls);
                self.tags.push(tag);
                if tag == TetTag::Interface {
                    let tet = nodes.map(|n| self.local_node_position(n));
                    let c =
                        cut::cut_element(lc * TETS_PER_CELL + t, &tet, &ls).ok_or_else(|| {
                            Error::Mesh(format!(
                                "degenerate interface cut in local cell {lc}, tet {t}"
                            ))
                        })?;
                    self.tet_cut.push(Some(self.cuts.len() as u32));
                    self.cuts.push(c);
                } else {
                    self.tet_cut.push(None);
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.global.h
    }

    pub fn nodes(&self) -> [usize; 3] {
        self.cells.map(|n| n + 1)
    }

    pub fn node_count(&self) -> usize {
        self.nodes().iter().product()
    }

    pub fn cell_count(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn tet_count(&self) -> usize {
        self.cell_count() * TETS_PER_CELL
    }

    /// Lower corner of the guarded extent.
    pub fn extent_lower(&self) -> Vec3 {
        self.global
            .node_position([self.extent[0][0], self.extent[1][0], self.extent[2][0]])
    }

    pub fn extent_upper(&self) -> Vec3 {
        self.global
            .node_position([self.extent[0][1], self.extent[1][1], self.extent[2][1]])
    }

    pub fn owned_lower(&self) -> Vec3 {
        self.global
            .node_position([self.owned[0][0], self.owned[1][0], self.owned[2][0]])
    }

    pub fn owned_upper(&self) -> Vec3 {
        self.global
            .node_position([self.owned[0][1], self.owned[1][1], self.owned[2][1]])
    }

    #[inline]
    pub fn local_node(&self, n: [usize; 3]) -> usize {
        let nn = self.nodes();
        n[0] + nn[0] * (n[1] + nn[1] * n[2])
    }

    #[inline]
    pub fn local_node_ijk(&self, id: usize) -> [usize; 3] {
        let nn = self.nodes();
        [id % nn[0], (id / nn[0]) % nn[1], id / (nn[0] * nn[1])]
    }

    /// Global node indices of a local node.
    #[inline]
    pub fn global_node_ijk(&self, id: usize) -> [usize; 3] {
        let l = self.local_node_ijk(id);
        [
            l[0] + self.extent[0][0],
            l[1] + self.extent[1][0],
            l[2] + self.extent[2][0],
        ]
    }

    #[inline]
    pub fn global_node_id(&self, id: usize) -> usize {
        self.global.node_id(self.global_node_ijk(id))
    }

    /// Local node id of a global node, if it lies in the guarded extent.
    pub fn local_from_global(&self, g: [usize; 3]) -> Option<usize> {
        let mut l = [0usize; 3];
        for a in 0..3 {
            if g[a] < self.extent[a][0] || g[a] > self.extent[a][1] {
                return None;
            }
            l[a] = g[a] - self.extent[a][0];
        }
        Some(self.local_node(l))
    }

    #[inline]
    pub fn local_node_position(&self, id: usize) -> Vec3 {
        self.global.node_position(self.global_node_ijk(id))
    }

    #[inline]
    pub fn local_cell(&self, c: [usize; 3]) -> usize {
        c[0] + self.cells[0] * (c[1] + self.cells[1] * c[2])
    }

    #[inline]
    pub fn local_cell_ijk(&self, lc: usize) -> [usize; 3] {
        [
            lc % self.cells[0],
            (lc / self.cells[0]) % self.cells[1],
            lc / (self.cells[0] * self.cells[1]),
        ]
    }

    #[inline]
    pub fn global_cell_ijk(&self, lc: usize) -> [usize; 3] {
        let l = self.local_cell_ijk(lc);
        [
            l[0] + self.extent[0][0],
            l[1] + self.extent[1][0],
            l[2] + self.extent[2][0],
        ]
    }

    /// The eight corner nodes of a local cell, cube-local vertex order.
    #[inline]
    pub fn cell_nodes(&self, lc: usize) -> [usize; 8] {
        let c = self.local_cell_ijk(lc);
        let base = self.local_node(c);
        let nn = self.nodes();
        let (sx, sy) = (1, nn[0]);
        let sz = nn[0] * nn[1];
        [
            base,
            base + sx,
            base + sy,
            base + sx + sy,
            base + sz,
            base + sx + sz,
            base + sy + sz,
            base + sx + sy + sz,
        ]
    }

    #[inline]
    pub fn cell_is_odd(&self, lc: usize) -> bool {
        tets::is_odd_cell(self.global_cell_ijk(lc))
    }

    #[inline]
    pub fn tet_nodes(&self, lc: usize, t: usize) -> [usize; 4] {
        let corners = self.cell_nodes(lc);
        tets::cell_tets(self.cell_is_odd(lc))[t].map(|v| corners[v])
    }

    pub fn tet_vertices(&self, lc: usize, t: usize) -> cut::Tet {
        self.tet_nodes(lc, t).map(|n| self.local_node_position(n))
    }

    #[inline]
    pub fn cut_of(&self, local_tet: usize) -> Option<&InterfaceCut> {
        self.tet_cut[local_tet].map(|i| &self.cuts[i as usize])
    }

    /// Global facet key of an interface cut.
    pub fn facet_key(&self, c: &InterfaceCut) -> u64 {
        let lc = c.tet / TETS_PER_CELL;
        self.global
            .facet_key(self.global_cell_ijk(lc), c.tet % TETS_PER_CELL)
    }

    /// `true` if the position lies inside the owned region (lower faces
    /// inclusive; upper faces inclusive only on the global boundary).
    pub fn owns_position(&self, p: &Vec3) -> bool {
        let (lo, hi) = (self.owned_lower(), self.owned_upper());
        (0..3).all(|a| {
            p[a] >= lo[a] && (p[a] < hi[a] || (!self.has_upper_neighbor[a] && p[a] <= hi[a]))
        })
    }

    pub fn in_extent(&self, p: &Vec3) -> bool {
        let (lo, hi) = (self.extent_lower(), self.extent_upper());
        (0..3).all(|a| p[a] >= lo[a] && p[a] <= hi[a])
    }

    /// Local cell containing `p` and its cube-local coordinates.
    #[inline]
    pub fn cell_coords(&self, p: &Vec3) -> Result<([usize; 3], [f64; 3])> {
        let h = self.global.h;
        let mut c = [0usize; 3];
        let mut f = [0.0; 3];
        for a in 0..3 {
            let origin = self.global.lower[a] + h * self.extent[a][0] as f64;
            let s = (p[a] - origin) / h;
            let n = self.cells[a];
            // tolerate round-off at the extent faces
            if !(s >= -1e-9) || !(s <= n as f64 + 1e-9) {
                return Err(Error::OutOfDomain([p.x, p.y, p.z]));
            }
            let i = (s.floor().max(0.0) as usize).min(n - 1);
            c[a] = i;
            f[a] = (s - i as f64).clamp(0.0, 1.0);
        }
        Ok((c, f))
    }

    pub fn locate(&self, p: &Vec3) -> Result<ParticleLocation> {
        let (c, [u, v, w]) = self.cell_coords(p)?;
        let lc = self.local_cell(c);
        let odd = self.cell_is_odd(lc);
        let tet = tets::tet_in_cell(odd, u, v, w);
        let bary = tets::barycentric_in_cell(odd, tet, u, v, w);
        Ok(ParticleLocation {
            cell: self.global_cell_ijk(lc),
            local_cell: lc,
            tet,
            bary,
        })
    }

    /// Interface cut whose facet centroid is nearest to `p`, skipping facets
    /// too small to carry charge. The search widens from the containing cell.
    pub fn nearest_facet(&self, p: &Vec3) -> Option<&InterfaceCut> {
        let min_area = MIN_FACET_AREA * self.global.h * self.global.h;
        let (c, _) = match self.cell_coords(p) {
            Ok(x) => x,
            Err(_) => return self.nearest_facet_global(p, min_area),
        };
        for radius in [1usize, 2] {
            let mut best: Option<(&InterfaceCut, f64)> = None;
            let lo = c.map(|x| x.saturating_sub(radius));
            let hi = [0, 1, 2].map(|a| (c[a] + radius).min(self.cells[a] - 1));
            for k in lo[2]..=hi[2] {
                for j in lo[1]..=hi[1] {
                    for i in lo[0]..=hi[0] {
                        let lc = self.local_cell([i, j, k]);
                        for t in 0..TETS_PER_CELL {
                            if let Some(cut) = self.cut_of(lc * TETS_PER_CELL + t) {
                                if cut.facet_area < min_area {
                                    continue;
                                }
                                let d = (cut.facet_centroid - p).norm_squared();
                                if best.is_none_or(|(_, bd)| d < bd) {
                                    best = Some((cut, d));
                                }
                            }
                        }
                    }
                }
            }
            if let Some((cut, _)) = best {
                return Some(cut);
            }
        }
        self.nearest_facet_global(p, min_area)
    }

    fn nearest_facet_global(&self, p: &Vec3, min_area: f64) -> Option<&InterfaceCut> {
        self.cuts
            .iter()
            .filter(|c| c.facet_area >= min_area)
            .min_by(|a, b| {
                (a.facet_centroid - p)
                    .norm_squared()
                    .total_cmp(&(b.facet_centroid - p).norm_squared())
            })
    }

    pub fn interface_count(&self) -> usize {
        self.cuts.len()
    }
}
