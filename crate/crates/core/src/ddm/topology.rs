use crate::error::{Error, Result};
use crate::geometry::{LevelSetGeometry, Vec3};
use crate::mesh::{GlobalMeshSpec, SubdomainMesh, GUARD_CELLS};

/// Minimum owned cells per axis so that two-cell guards fit inside a neighbor.
pub const MIN_OWNED_CELLS: usize = 4;

/// Grid of subdomains over the global mesh. Ranks are numbered with `k`
/// fastest: `rank = (i·py + j)·pz + k`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecompTopology {
    pub dims: [usize; 3],
    pub global: GlobalMeshSpec,
    /// Owned cell range boundaries per axis (`dims[a] + 1` entries).
    pub cuts: [Vec<usize>; 3],
}

impl DecompTopology {
    pub fn build(dims: [usize; 3], global: &GlobalMeshSpec) -> Result<Self> {
        let mut cuts: [Vec<usize>; 3] = Default::default();
        for a in 0..3 {
            let p = dims[a];
            if p == 0 {
                return Err(Error::Config(
                    "decomposition counts must be positive".into(),
                ));
            }
            let n = global.cells[a];
            let (base, rem) = (n / p, n % p);
            if base < MIN_OWNED_CELLS {
                return Err(Error::Config(format!(
                    "axis {a}: {n} cells split {p} ways leaves {base} cells per subdomain; \
                     at least {MIN_OWNED_CELLS} are needed for {GUARD_CELLS}-cell guards"
                )));
            }
            let mut c = vec![0usize];
            for s in 0..p {
                c.push(c[s] + base + usize::from(s < rem));
            }
            cuts[a] = c;
        }
        Ok(DecompTopology {
            dims,
            global: global.clone(),
            cuts,
        })
    }

    pub fn ranks(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn rank_to_coords(&self, rank: usize) -> [usize; 3] {
        let [_, py, pz] = self.dims;
        [rank / (py * pz), (rank / pz) % py, rank % pz]
    }

    pub fn coords_to_rank(&self, c: [usize; 3]) -> usize {
        (c[0] * self.dims[1] + c[1]) * self.dims[2] + c[2]
    }

    pub fn owned(&self, rank: usize) -> [[usize; 2]; 3] {
        let c = self.rank_to_coords(rank);
        [0, 1, 2].map(|a| [self.cuts[a][c[a]], self.cuts[a][c[a] + 1]])
    }

    pub fn has_lower_neighbor(&self, rank: usize) -> [bool; 3] {
        let c = self.rank_to_coords(rank);
        [0, 1, 2].map(|a| c[a] > 0)
    }

    pub fn has_upper_neighbor(&self, rank: usize) -> [bool; 3] {
        let c = self.rank_to_coords(rank);
        [0, 1, 2].map(|a| c[a] + 1 < self.dims[a])
    }

    /// Guarded cell range of a rank.
    pub fn extent(&self, rank: usize) -> [[usize; 2]; 3] {
        let o = self.owned(rank);
        let (lo, hi) = (self.has_lower_neighbor(rank), self.has_upper_neighbor(rank));
        [0, 1, 2].map(|a| {
            [
                o[a][0] - if lo[a] { GUARD_CELLS } else { 0 },
                o[a][1] + if hi[a] { GUARD_CELLS } else { 0 },
            ]
        })
    }

    /// Face, edge and vertex neighbors as `(offset, rank)`, in rank order.
    pub fn neighbors(&self, rank: usize) -> Vec<([i32; 3], usize)> {
        let c = self.rank_to_coords(rank);
        let mut out = Vec::new();
        for di in -1i32..=1 {
            for dj in -1i32..=1 {
                for dk in -1i32..=1 {
                    if (di, dj, dk) == (0, 0, 0) {
                        continue;
                    }
                    let n = [c[0] as i32 + di, c[1] as i32 + dj, c[2] as i32 + dk];
                    if (0..3).all(|a| n[a] >= 0 && (n[a] as usize) < self.dims[a]) {
                        let rc = n.map(|x| x as usize);
                        out.push(([di, dj, dk], self.coords_to_rank(rc)));
                    }
                }
            }
        }
        out.sort_by_key(|&(_, r)| r);
        out
    }

    pub fn is_neighbor(&self, a: usize, b: usize) -> bool {
        let (ca, cb) = (self.rank_to_coords(a), self.rank_to_coords(b));
        a != b && (0..3).all(|k| ca[k].abs_diff(cb[k]) <= 1)
    }

    fn axis_owner(&self, a: usize, cell: usize) -> usize {
        let c = &self.cuts[a];
        c.partition_point(|&x| x <= cell)
            .saturating_sub(1)
            .min(self.dims[a] - 1)
    }

    pub fn owner_of_cell(&self, cell: [usize; 3]) -> usize {
        self.coords_to_rank([0, 1, 2].map(|a| self.axis_owner(a, cell[a])))
    }

    /// Owner of a global node: the subdomain whose owned range `[s, e)`
    /// contains the node index, the last subdomain also owning index `N`.
    pub fn owner_of_node(&self, node: [usize; 3]) -> usize {
        self.owner_of_cell([0, 1, 2].map(|a| node[a].min(self.global.cells[a] - 1)))
    }

    /// Owner of a position; positions outside the global box are clamped.
    pub fn owner_of_position(&self, p: &Vec3) -> usize {
        let h = self.global.h;
        let cell = [0, 1, 2].map(|a| {
            let s = ((p[a] - self.global.lower[a]) / h).floor();
            (s.max(0.0) as usize).min(self.global.cells[a] - 1)
        });
        self.owner_of_cell(cell)
    }

    pub fn build_mesh(
        &self,
        rank: usize,
        geometry: Option<&LevelSetGeometry>,
    ) -> Result<SubdomainMesh> {
        SubdomainMesh::build(
            &self.global,
            self.rank_to_coords(rank),
            self.owned(rank),
            self.has_lower_neighbor(rank),
            self.has_upper_neighbor(rank),
            geometry,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(n: usize) -> GlobalMeshSpec {
        GlobalMeshSpec::from_extents([0.0; 3], [n as f64; 3], 1.0).unwrap()
    }

    #[test]
    fn single_rank_has_no_neighbors() {
        let t = DecompTopology::build([1, 1, 1], &cube(8)).unwrap();
        assert_eq!(t.ranks(), 1);
        assert!(t.neighbors(0).is_empty());
    }

    #[test]
    fn corner_rank_has_seven_neighbors() {
        let t = DecompTopology::build([2, 2, 2], &cube(8)).unwrap();
        let nb = t.neighbors(0);
        assert_eq!(nb.len(), 7);
        let faces = nb
            .iter()
            .filter(|(o, _)| o.iter().filter(|&&x| x != 0).count() == 1)
            .count();
        let edges = nb
            .iter()
            .filter(|(o, _)| o.iter().filter(|&&x| x != 0).count() == 2)
            .count();
        assert_eq!((faces, edges, nb.len() - faces - edges), (3, 3, 1));
    }

    #[test]
    fn table_two_style_split() {
        let t = DecompTopology::build([4, 4, 4], &cube(100)).unwrap();
        for r in 0..t.ranks() {
            assert!(t.owned(r).iter().all(|&[s, e]| e - s == 25));
        }
    }

    #[test]
    fn remainder_goes_to_lower_indices_and_small_splits_fail() {
        let t = DecompTopology::build(
            [3, 1, 1],
            &GlobalMeshSpec::from_extents([0.0; 3], [14.0, 4.0, 4.0], 1.0).unwrap(),
        )
        .unwrap();
        assert_eq!(t.cuts[0], vec![0, 5, 10, 14]);
        assert!(DecompTopology::build([3, 1, 1], &cube(11)).is_err());
    }

    #[test]
    fn exhaustive_bijection_symmetry_and_tiling() {
        for px in 1..=4 {
            for py in 1..=4 {
                for pz in 1..=4 {
                    let t = DecompTopology::build([px, py, pz], &cube(16)).unwrap();
                    let mut covered = vec![0u8; 16 * 16 * 16];
                    for r in 0..t.ranks() {
                        assert_eq!(t.coords_to_rank(t.rank_to_coords(r)), r);
                        for (_, q) in t.neighbors(r) {
                            assert!(t.neighbors(q).iter().any(|&(_, x)| x == r));
                        }
                        let o = t.owned(r);
                        for k in o[2][0]..o[2][1] {
                            for j in o[1][0]..o[1][1] {
                                for i in o[0][0]..o[0][1] {
                                    covered[i + 16 * (j + 16 * k)] += 1;
                                    assert_eq!(t.owner_of_cell([i, j, k]), r);
                                }
                            }
                        }
                    }
                    assert!(covered.iter().all(|&c| c == 1));
                }
            }
        }
    }

    #[test]
    fn position_owner_matches_mesh_ownership() {
        let g = cube(8);
        let t = DecompTopology::build([2, 2, 1], &g).unwrap();
        let meshes: Vec<_> = (0..t.ranks())
            .map(|r| t.build_mesh(r, None).unwrap())
            .collect();
        for p in [
            Vec3::new(4.0, 3.9, 1.0),
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(8.0, 8.0, 8.0),
            Vec3::new(3.99, 4.0, 7.0),
        ] {
            let owner = t.owner_of_position(&p);
            for (r, m) in meshes.iter().enumerate() {
                assert_eq!(m.owns_position(&p), r == owner, "{p:?}");
            }
        }
    }
}
