//! Five-tetrahedron split of a cuboid cell.
//!
//! Cube-local vertices are numbered `v = dx + 2*dy + 4*dz`. Even cells
//! (`i + j + k` even) use the four odd-sum vertices `{1, 2, 4, 7}` as the
//! central tetrahedron and cut off the even-sum corners; odd cells use the
//! mirrored split. Every cube face is then triangulated along the diagonal
//! joining its two vertices of odd global parity, so neighbouring cells
//! always agree.

use std::sync::OnceLock;

use nalgebra::Matrix4;

/// Tetrahedra per cuboid cell.
pub const TETS_PER_CELL: usize = 5;

pub const CUBE_VERTEX_OFFSETS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [0, 1, 0],
    [1, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [0, 1, 1],
    [1, 1, 1],
];

/// Index 0 is the central tetrahedron; 1..=4 are the corner tetrahedra,
/// each listed with its corner vertex first.
pub const EVEN_CELL_TETS: [[usize; 4]; 5] = [
    [1, 2, 4, 7],
    [0, 1, 2, 4],
    [3, 1, 2, 7],
    [5, 1, 4, 7],
    [6, 2, 4, 7],
];

pub const ODD_CELL_TETS: [[usize; 4]; 5] = [
    [0, 3, 5, 6],
    [1, 0, 3, 5],
    [2, 0, 3, 6],
    [4, 0, 5, 6],
    [7, 3, 5, 6],
];

const CONTAINMENT_TOL: f64 = 1e-12;

#[inline]
pub fn is_odd_cell(cell: [usize; 3]) -> bool {
    (cell[0] + cell[1] + cell[2]) % 2 == 1
}

#[inline]
pub fn cell_tets(odd: bool) -> &'static [[usize; 4]; 5] {
    if odd {
        &ODD_CELL_TETS
    } else {
        &EVEN_CELL_TETS
    }
}

/// The five tetrahedra of `cell`, as global node indices.
pub fn split_cell_into_tets(cell: [usize; 3]) -> [[[usize; 3]; 4]; 5] {
    let table = cell_tets(is_odd_cell(cell));
    let mut out = [[[0usize; 3]; 4]; 5];
    for (t, tet) in table.iter().enumerate() {
        for (k, &v) in tet.iter().enumerate() {
            let o = CUBE_VERTEX_OFFSETS[v];
            out[t][k] = [cell[0] + o[0], cell[1] + o[1], cell[2] + o[2]];
        }
    }
    out
}

/// Tetrahedron (0..5) containing the cube-local point `(u, v, w)`.
///
/// Points on faces shared with the central tetrahedron go to the central one,
/// which is the lowest-index container.
#[inline]
pub fn tet_in_cell(odd: bool, u: f64, v: f64, w: f64) -> usize {
    let one = 1.0 - CONTAINMENT_TOL;
    if !odd {
        if u + v + w < one {
            1
        } else if (1.0 - u) + (1.0 - v) + w < one {
            2
        } else if (1.0 - u) + v + (1.0 - w) < one {
            3
        } else if u + (1.0 - v) + (1.0 - w) < one {
            4
        } else {
            0
        }
    } else if (1.0 - u) + v + w < one {
        1
    } else if u + (1.0 - v) + w < one {
        2
    } else if u + v + (1.0 - w) < one {
        3
    } else if (1.0 - u) + (1.0 - v) + (1.0 - w) < one {
        4
    } else {
        0
    }
}

fn barycentric_tables() -> &'static [[Matrix4<f64>; 5]; 2] {
    static TABLES: OnceLock<[[Matrix4<f64>; 5]; 2]> = OnceLock::new();
    TABLES.get_or_init(|| {
        let build = |table: &[[usize; 4]; 5]| {
            let mut out = [Matrix4::zeros(); 5];
            for (t, tet) in table.iter().enumerate() {
                let mut m = Matrix4::zeros();
                for (k, &v) in tet.iter().enumerate() {
                    let o = CUBE_VERTEX_OFFSETS[v];
                    m[(0, k)] = 1.0;
                    m[(1, k)] = o[0] as f64;
                    m[(2, k)] = o[1] as f64;
                    m[(3, k)] = o[2] as f64;
                }
                out[t] = m
                    .try_inverse()
                    .expect("reference tetrahedron is non-degenerate");
            }
            out
        };
        [build(&EVEN_CELL_TETS), build(&ODD_CELL_TETS)]
    })
}

/// Barycentric coordinates of a cube-local point in tetrahedron `tet`.
pub fn barycentric_in_cell(odd: bool, tet: usize, u: f64, v: f64, w: f64) -> [f64; 4] {
    let m = &barycentric_tables()[odd as usize][tet];
    let r = m * nalgebra::Vector4::new(1.0, u, v, w);
    [r[0], r[1], r[2], r[3]]
}

/// Gradients (in cube-local units) of the four P1 basis functions of `tet`.
pub fn reference_gradients(odd: bool, tet: usize) -> [[f64; 3]; 4] {
    let m = &barycentric_tables()[odd as usize][tet];
    let mut g = [[0.0; 3]; 4];
    for (k, gk) in g.iter_mut().enumerate() {
        *gk = [m[(k, 1)], m[(k, 2)], m[(k, 3)]];
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn volume(p: &[[f64; 3]; 4]) -> f64 {
        let a = [p[1][0] - p[0][0], p[1][1] - p[0][1], p[1][2] - p[0][2]];
        let b = [p[2][0] - p[0][0], p[2][1] - p[0][1], p[2][2] - p[0][2]];
        let c = [p[3][0] - p[0][0], p[3][1] - p[0][1], p[3][2] - p[0][2]];
        let det = a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
            + a[2] * (b[0] * c[1] - b[1] * c[0]);
        det.abs() / 6.0
    }

    fn as_f64(t: &[[usize; 3]; 4]) -> [[f64; 3]; 4] {
        t.map(|v| v.map(|c| c as f64))
    }

    #[test]
    fn volumes_tile_the_cube() {
        for cell in [[0, 0, 0], [1, 0, 0]] {
            let tets = split_cell_into_tets(cell);
            let vols: Vec<f64> = tets.iter().map(|t| volume(&as_f64(t))).collect();
            assert!((vols.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!((vols[0] - 1.0 / 3.0).abs() < 1e-14);
            for v in &vols[1..] {
                assert!((v - 1.0 / 6.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn every_cube_vertex_is_used() {
        for table in [&EVEN_CELL_TETS, &ODD_CELL_TETS] {
            let used: BTreeSet<usize> = table.iter().flatten().copied().collect();
            assert_eq!(used.len(), 8);
        }
    }

    /// Enumerate the boundary triangles each cell puts on a shared face (as
    /// sets of global node indices) and check both sides produce the same set.
    #[test]
    fn shared_faces_conform_across_parity() {
        fn face_triangles(
            cell: [usize; 3],
            axis: usize,
            coord: usize,
        ) -> BTreeSet<Vec<[usize; 3]>> {
            let mut out = BTreeSet::new();
            for tet in split_cell_into_tets(cell) {
                for skip in 0..4 {
                    let mut tri: Vec<[usize; 3]> =
                        (0..4).filter(|&k| k != skip).map(|k| tet[k]).collect();
                    if tri.iter().all(|v| v[axis] == coord) {
                        tri.sort();
                        out.insert(tri);
                    }
                }
            }
            out
        }
        for base in [[0usize, 0, 0], [1, 0, 0], [0, 1, 1], [3, 2, 5]] {
            for axis in 0..3 {
                let mut nb = base;
                nb[axis] += 1;
                let coord = base[axis] + 1;
                let a = face_triangles(base, axis, coord);
                let b = face_triangles(nb, axis, coord);
                assert_eq!(a.len(), 2);
                assert_eq!(a, b, "cell {base:?} axis {axis}");
            }
        }
    }

    #[test]
    fn locate_center_and_vertices() {
        for odd in [false, true] {
            assert_eq!(tet_in_cell(odd, 0.5, 0.5, 0.5), 0);
            let b = barycentric_in_cell(odd, 0, 0.5, 0.5, 0.5);
            assert!(b.iter().all(|&x| x >= 0.0));
            for (v, o) in CUBE_VERTEX_OFFSETS.iter().enumerate() {
                let (u, vv, w) = (o[0] as f64, o[1] as f64, o[2] as f64);
                let t = tet_in_cell(odd, u, vv, w);
                let lowest = cell_tets(odd)
                    .iter()
                    .position(|tet| tet.contains(&v))
                    .unwrap();
                assert_eq!(t, lowest, "vertex {v} odd={odd}");
            }
        }
    }

    #[test]
    fn located_tet_contains_point() {
        let mut state = 12345u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..5000 {
            let (u, v, w) = (next(), next(), next());
            for odd in [false, true] {
                let t = tet_in_cell(odd, u, v, w);
                let b = barycentric_in_cell(odd, t, u, v, w);
                assert!(b.iter().all(|&x| x >= -1e-12), "{b:?}");
                assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                // reconstruct
                let tet = cell_tets(odd)[t];
                let mut p = [0.0; 3];
                for k in 0..4 {
                    let o = CUBE_VERTEX_OFFSETS[tet[k]];
                    for a in 0..3 {
                        p[a] += b[k] * o[a] as f64;
                    }
                }
                assert!(
                    (p[0] - u).abs() < 1e-12
                        && (p[1] - v).abs() < 1e-12
                        && (p[2] - w).abs() < 1e-12
                );
            }
        }
    }
}
