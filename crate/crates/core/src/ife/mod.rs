//! Linear FE and IFE element spaces on tetrahedra, element stiffness, and
//! assembly of the interface Poisson problem.

mod assemble;

pub use assemble::{
    AssembledSystem, BoundarySpec, ElementFields, FaceCondition, FieldProblem, NodeKind,
    Permittivity, PermittivityLayer, ScalarField,
};

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::mesh::cut::{tet_volume, InterfaceCut, Tet};

/// `value(x) = a + grad · (x - origin)`
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearPoly {
    pub origin: Vec3,
    pub a: f64,
    pub grad: Vec3,
}

impl LinearPoly {
    #[inline]
    pub fn eval(&self, x: &Vec3) -> f64 {
        self.a + self.grad.dot(&(x - self.origin))
    }
}

/// Piecewise-linear basis of one interface tetrahedron.
#[derive(Clone, Debug)]
pub struct IfeBasisSet {
    pub minus: [LinearPoly; 4],
    pub plus: [LinearPoly; 4],
    pub normal: Vec3,
    pub offset: f64,
}

impl IfeBasisSet {
    pub fn eval(&self, i: usize, x: &Vec3) -> f64 {
        if self.normal.dot(x) - self.offset < 0.0 {
            self.minus[i].eval(x)
        } else {
            self.plus[i].eval(x)
        }
    }
}

/// Basis used on an element after assembly.
#[derive(Clone, Debug)]
pub enum ElementBasis {
    Standard {
        grads: [Vec3; 4],
        eps: f64,
    },
    Interface {
        basis: IfeBasisSet,
        eps_minus: f64,
        eps_plus: f64,
        volume_minus: f64,
        volume_plus: f64,
    },
}

fn centroid(t: &Tet) -> Vec3 {
    (t[0] + t[1] + t[2] + t[3]) / 4.0
}

/// P1 Lagrange basis of a tetrahedron.
pub fn standard_tet_basis(t: &Tet) -> Result<[LinearPoly; 4]> {
    let c = centroid(t);
    let scale = (t[1] - t[0])
        .norm()
        .max((t[2] - t[0]).norm())
        .max((t[3] - t[0]).norm());
    if !(tet_volume(t) > 1e-14 * scale.powi(3)) {
        return Err(Error::Numerical("degenerate tetrahedron".into()));
    }
    let mut m = SMatrix::<f64, 4, 4>::zeros();
    for k in 0..4 {
        let d = t[k] - c;
        m[(k, 0)] = 1.0;
        m[(k, 1)] = d.x;
        m[(k, 2)] = d.y;
        m[(k, 3)] = d.z;
    }
    let inv = m
        .try_inverse()
        .ok_or_else(|| Error::Numerical("degenerate tetrahedron".into()))?;
    Ok(std::array::from_fn(|i| LinearPoly {
        origin: c,
        a: inv[(0, i)],
        grad: Vec3::new(inv[(1, i)], inv[(2, i)], inv[(3, i)]),
    }))
}

/// Tangent pair spanning the plane with unit normal `n`.
fn tangents(n: &Vec3) -> (Vec3, Vec3) {
    let trial = if n.x.abs() < 0.9 {
        Vec3::x()
    } else {
        Vec3::y()
    };
    let t1 = (trial - n * n.dot(&trial)).normalize();
    (t1, n.cross(&t1))
}

/// Linear IFE basis on an interface tetrahedron.
///
/// Each basis function is a pair of linear polynomials, one on each side of
/// the cut plane, fixed by the four nodal values, value continuity at three
/// non-collinear points of the plane, and continuity of `ε ∂φ/∂n`.
/// Coordinates are shifted and scaled by the element size before solving the
/// 8×8 system.
pub fn ife_tet_basis(
    t: &Tet,
    cut: &InterfaceCut,
    eps_minus: f64,
    eps_plus: f64,
) -> Result<IfeBasisSet> {
    let mut signs = [false; 4];
    for k in 0..4 {
        signs[k] = cut.signed_distance(&t[k]) >= 0.0;
    }
    if signs.iter().all(|&s| s) || signs.iter().all(|&s| !s) {
        return Err(Error::Numerical(
            "cut plane does not separate the tetrahedron".into(),
        ));
    }
    let c = centroid(t);
    let h = (t[1] - t[0])
        .norm()
        .max((t[2] - t[0]).norm())
        .max((t[3] - t[0]).norm());
    let xi = |p: &Vec3| (p - c) / h;
    let (t1, t2) = tangents(&cut.normal);
    let p0 = cut.facet_centroid;
    let plane_points = [xi(&p0), xi(&(p0 + t1 * h)), xi(&(p0 + t2 * h))];

    // unknowns: [a-, b-(3), a+, b+(3)]
    let mut m = SMatrix::<f64, 8, 8>::zeros();
    for k in 0..4 {
        let d = xi(&t[k]);
        let off = if cut.vertex_plus[k] { 4 } else { 0 };
        m[(k, off)] = 1.0;
        for a in 0..3 {
            m[(k, off + 1 + a)] = d[a];
        }
    }
    for (r, p) in plane_points.iter().enumerate() {
        let row = 4 + r;
        m[(row, 0)] = 1.0;
        m[(row, 4)] = -1.0;
        for a in 0..3 {
            m[(row, 1 + a)] = p[a];
            m[(row, 5 + a)] = -p[a];
        }
    }
    for a in 0..3 {
        m[(7, 1 + a)] = eps_minus * cut.normal[a];
        m[(7, 5 + a)] = -eps_plus * cut.normal[a];
    }
    let lu = m.lu();
    let mut minus = [LinearPoly {
        origin: c,
        a: 0.0,
        grad: Vec3::zeros(),
    }; 4];
    let mut plus = minus;
    for i in 0..4 {
        let mut rhs = SVector::<f64, 8>::zeros();
        rhs[i] = 1.0;
        let s = lu
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("singular IFE system".into()))?;
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite IFE coefficients".into()));
        }
        minus[i] = LinearPoly {
            origin: c,
            a: s[0],
            grad: Vec3::new(s[1], s[2], s[3]) / h,
        };
        plus[i] = LinearPoly {
            origin: c,
            a: s[4],
            grad: Vec3::new(s[5], s[6], s[7]) / h,
        };
    }
    let basis = IfeBasisSet {
        minus,
        plus,
        normal: cut.normal,
        offset: cut.offset,
    };
    // residual check of the local system on the nodal conditions
    for i in 0..4 {
        for k in 0..4 {
            let v = if cut.vertex_plus[k] {
                plus[i].eval(&t[k])
            } else {
                minus[i].eval(&t[k])
            };
            let target = if i == k { 1.0 } else { 0.0 };
            if !((v - target).abs() < 1e-8) {
                return Err(Error::Numerical("ill-conditioned IFE system".into()));
            }
        }
    }
    Ok(basis)
}

/// `K_ij = Σ_side ε_side V_side ∇b_i·∇b_j`
pub fn element_stiffness(basis: &ElementBasis, volume: f64) -> [[f64; 4]; 4] {
    let mut k = [[0.0; 4]; 4];
    match basis {
        ElementBasis::Standard { grads, eps } => {
            for i in 0..4 {
                for j in 0..4 {
                    k[i][j] = eps * volume * grads[i].dot(&grads[j]);
                }
            }
        }
        ElementBasis::Interface {
            basis,
            eps_minus,
            eps_plus,
            volume_minus,
            volume_plus,
        } => {
            for i in 0..4 {
                for j in 0..4 {
                    k[i][j] =
                        eps_minus * volume_minus * basis.minus[i].grad.dot(&basis.minus[j].grad)
                            + eps_plus * volume_plus * basis.plus[i].grad.dot(&basis.plus[j].grad);
                }
            }
        }
    }
    // enforce exact symmetry
    for i in 0..4 {
        for j in (i + 1)..4 {
            let s = 0.5 * (k[i][j] + k[j][i]);
            k[i][j] = s;
            k[j][i] = s;
        }
    }
    k
}
