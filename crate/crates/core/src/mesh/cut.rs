//! Element classification against the level set and exact planar clipping.

use crate::geometry::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TetTag {
    /// All vertices inside material.
    Interior,
    /// All vertices in plasma.
    Exterior,
    Interface,
}

pub type Tet = [Vec3; 4];

/// Cut geometry of one interface tetrahedron.
///
/// The interface inside the element is the zero plane of the linear
/// interpolant of the nodal level-set values; the cut points are where that
/// plane meets the element edges, so they are exactly coplanar.
#[derive(Clone, Debug)]
pub struct InterfaceCut {
    /// Local tetrahedron id.
    pub tet: usize,
    /// Ordered polygon of cut points (3 or 4).
    pub polygon: Vec<Vec3>,
    /// Unit normal pointing from material into plasma.
    pub normal: Vec3,
    /// Plane is `normal · x = offset`.
    pub offset: f64,
    pub facet_area: f64,
    pub facet_centroid: Vec3,
    pub volume_minus: f64,
    pub volume_plus: f64,
    /// `true` where the vertex lies on the plasma side.
    pub vertex_plus: [bool; 4],
}

impl InterfaceCut {
    #[inline]
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

pub fn classify_element(ls: &[f64; 4]) -> TetTag {
    let neg = ls.iter().filter(|&&v| v < 0.0).count();
    match neg {
        0 => TetTag::Exterior,
        4 => TetTag::Interior,
        _ => TetTag::Interface,
    }
}

pub fn tet_volume(t: &Tet) -> f64 {
    ((t[1] - t[0]).cross(&(t[2] - t[0])))
        .dot(&(t[3] - t[0]))
        .abs()
        / 6.0
}

/// Gradient of the linear interpolant of `values` on `t`.
pub fn linear_gradient(t: &Tet, values: &[f64; 4]) -> Option<Vec3> {
    let m = nalgebra::Matrix3::from_columns(&[t[1] - t[0], t[2] - t[0], t[3] - t[0]]);
    let rhs = Vec3::new(
        values[1] - values[0],
        values[2] - values[0],
        values[3] - values[0],
    );
    // rows of m^T * grad = rhs
    m.transpose().lu().solve(&rhs)
}

fn edge_cut(a: &Vec3, b: &Vec3, la: f64, lb: f64) -> Vec3 {
    let t = la / (la - lb);
    a + (b - a) * t
}

/// Cut data for a tetrahedron with mixed-sign (non-zero) level-set values.
pub fn cut_element(tet_id: usize, t: &Tet, ls: &[f64; 4]) -> Option<InterfaceCut> {
    if classify_element(ls) != TetTag::Interface {
        return None;
    }
    let mut points = Vec::with_capacity(4);
    for a in 0..4 {
        for b in (a + 1)..4 {
            if (ls[a] < 0.0) != (ls[b] < 0.0) {
                points.push(edge_cut(&t[a], &t[b], ls[a], ls[b]));
            }
        }
    }
    let grad = linear_gradient(t, ls)?;
    let gnorm = grad.norm();
    if !(gnorm > 0.0) || !gnorm.is_finite() {
        return None;
    }
    let normal = grad / gnorm;
    let centroid = points.iter().fold(Vec3::zeros(), |acc, p| acc + p) / points.len() as f64;
    let offset = normal.dot(&centroid);

    // order polygon by angle in the plane
    let e1 = {
        let trial = if normal.x.abs() < 0.9 {
            Vec3::x()
        } else {
            Vec3::y()
        };
        (trial - normal * normal.dot(&trial)).normalize()
    };
    let e2 = normal.cross(&e1);
    points.sort_by(|p, q| {
        let ap = (p - centroid).dot(&e2).atan2((p - centroid).dot(&e1));
        let aq = (q - centroid).dot(&e2).atan2((q - centroid).dot(&e1));
        ap.total_cmp(&aq)
    });

    let mut area = 0.0;
    let mut weighted = Vec3::zeros();
    for k in 1..points.len() - 1 {
        let a = 0.5
            * (points[k] - points[0])
                .cross(&(points[k + 1] - points[0]))
                .norm();
        area += a;
        weighted += (points[0] + points[k] + points[k + 1]) * (a / 3.0);
    }
    let facet_centroid = if area > 0.0 {
        weighted / area
    } else {
        centroid
    };

    let (minus, plus) = split_tet(t, ls);
    let volume_minus: f64 = minus.iter().map(tet_volume).sum();
    let volume_plus: f64 = plus.iter().map(tet_volume).sum();

    Some(InterfaceCut {
        tet: tet_id,
        polygon: points,
        normal,
        offset,
        facet_area: area,
        facet_centroid,
        volume_minus,
        volume_plus,
        vertex_plus: ls.map(|v| v >= 0.0),
    })
}

fn prism(a: [Vec3; 3], b: [Vec3; 3]) -> [Tet; 3] {
    [
        [a[0], a[1], a[2], b[0]],
        [a[1], a[2], b[0], b[1]],
        [a[2], b[0], b[1], b[2]],
    ]
}

/// Split a tetrahedron by the zero plane of the linear interpolant of `ls`
/// into sub-tetrahedra on the negative and positive sides.
pub fn split_tet(t: &Tet, ls: &[f64; 4]) -> (Vec<Tet>, Vec<Tet>) {
    let neg: Vec<usize> = (0..4).filter(|&k| ls[k] < 0.0).collect();
    let pos: Vec<usize> = (0..4).filter(|&k| ls[k] >= 0.0).collect();
    let cut = |a: usize, b: usize| edge_cut(&t[a], &t[b], ls[a], ls[b]);
    match (neg.len(), pos.len()) {
        (0, _) => (vec![], vec![*t]),
        (_, 0) => (vec![*t], vec![]),
        (1, 3) | (3, 1) => {
            let (lone, rest) = if neg.len() == 1 {
                (neg[0], &pos)
            } else {
                (pos[0], &neg)
            };
            let p = [cut(lone, rest[0]), cut(lone, rest[1]), cut(lone, rest[2])];
            let small = vec![[t[lone], p[0], p[1], p[2]]];
            let big = prism(p, [t[rest[0]], t[rest[1]], t[rest[2]]]).to_vec();
            if neg.len() == 1 {
                (small, big)
            } else {
                (big, small)
            }
        }
        _ => {
            let (a, b, c, d) = (neg[0], neg[1], pos[0], pos[1]);
            let (pac, pad, pbc, pbd) = (cut(a, c), cut(a, d), cut(b, c), cut(b, d));
            let minus = prism([t[a], pac, pad], [t[b], pbc, pbd]).to_vec();
            let plus = prism([t[c], pac, pbc], [t[d], pad, pbd]).to_vec();
            (minus, plus)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_tet() -> Tet {
        [Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()]
    }

    #[test]
    fn classification() {
        assert_eq!(classify_element(&[1.0, 2.0, 0.5, 0.1]), TetTag::Exterior);
        assert_eq!(
            classify_element(&[-1.0, -2.0, -0.5, -0.1]),
            TetTag::Interior
        );
        assert_eq!(classify_element(&[-1.0, 2.0, 0.5, 0.1]), TetTag::Interface);
    }

    #[test]
    fn two_two_split_of_sphere_offsets() {
        // vertices at distances {0.3, 0.3, 0.5, 0.5} from a sphere of radius 0.401
        let r: f64 = 0.401;
        let dirs = [
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(1.0, 1.0, 1.0).normalize(),
        ];
        let dist = [0.3, 0.3, 0.5, 0.5];
        let t: Tet = [
            dirs[0] * dist[0],
            dirs[1] * dist[1],
            dirs[2] * dist[2],
            dirs[3] * dist[3],
        ];
        let ls = dist.map(|d| d - r);
        let cut = cut_element(0, &t, &ls).unwrap();
        assert_eq!(cut.polygon.len(), 4);
        let v = tet_volume(&t);
        assert!((cut.volume_minus + cut.volume_plus - v).abs() < 1e-14 * v.max(1.0));
        assert_eq!(cut.vertex_plus, [false, false, true, true]);
    }

    #[test]
    fn single_vertex_cut_volume_fraction() {
        // analytic: isolated vertex value a against b, c, d gives fraction a^3/((a-b)(a-c)(a-d))
        let t = unit_tet();
        let ls = [-0.2, 0.5, 0.7, 0.9];
        let (minus, plus) = split_tet(&t, &ls);
        let vm: f64 = minus.iter().map(tet_volume).sum();
        let vp: f64 = plus.iter().map(tet_volume).sum();
        let a: f64 = ls[0];
        let frac = a.powi(3) / ((a - ls[1]) * (a - ls[2]) * (a - ls[3]));
        assert!((vm - frac / 6.0).abs() < 1e-15);
        assert!((vm + vp - 1.0 / 6.0).abs() < 1e-15);
    }

    /// Points sampled on a fine lattice of the tet, classified by the linear
    /// interpolant, must reproduce the clipped volumes.
    #[test]
    fn clipped_volumes_match_lattice_count() {
        let t = unit_tet();
        let ls = [-0.3, -0.1, 0.4, 0.25];
        let (minus, _) = split_tet(&t, &ls);
        let vm: f64 = minus.iter().map(tet_volume).sum();
        let n = 240;
        let (mut inside, mut total) = (0usize, 0usize);
        for i in 0..n {
            for j in 0..n - i {
                for k in 0..n - i - j {
                    let (x, y, z) = (
                        (i as f64 + 0.25) / n as f64,
                        (j as f64 + 0.25) / n as f64,
                        (k as f64 + 0.25) / n as f64,
                    );
                    if x + y + z > 1.0 {
                        continue;
                    }
                    total += 1;
                    let l = ls[0] * (1.0 - x - y - z) + ls[1] * x + ls[2] * y + ls[3] * z;
                    if l < 0.0 {
                        inside += 1;
                    }
                }
            }
        }
        let frac = inside as f64 / total as f64;
        assert!((frac - vm * 6.0).abs() < 1e-2, "{frac} vs {}", vm * 6.0);
    }

    #[test]
    fn cut_points_lie_on_interpolated_zero_plane() {
        let t: Tet = [
            Vec3::new(0.1, 0.0, 0.0),
            Vec3::new(0.3, 0.05, 0.0),
            Vec3::new(0.0, 0.2, 0.1),
            Vec3::new(0.1, 0.1, 0.3),
        ];
        let ls = [-0.05, 0.02, -0.01, 0.08];
        let cut = cut_element(7, &t, &ls).unwrap();
        let grad = linear_gradient(&t, &ls).unwrap();
        for p in &cut.polygon {
            let interp = ls[0] + grad.dot(&(p - t[0]));
            assert!(interp.abs() <= 1e-8 * 0.1);
            assert!(cut.signed_distance(p).abs() < 1e-14);
        }
        // outward normal points towards the positive vertices
        assert!(cut.signed_distance(&t[3]) > 0.0);
        assert!(cut.signed_distance(&t[0]) < 0.0);
    }
}
