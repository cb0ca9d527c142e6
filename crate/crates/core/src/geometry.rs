//! Level-set description of material regions.
//!
//! Sign convention: the level set is negative inside material (dielectric, the
//! `-` side of the interface), positive in the plasma region and zero on the
//! interface. All lengths are in reference Debye lengths.

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;

/// Relative threshold (in cell sizes) below which a nodal level-set value is
/// treated as degenerate and pushed into the plasma.
pub const SNAP_FRACTION: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct Sphere {
    pub center: Vec3,
    pub radius: f64,
}

/// Axis-aligned half space; material lies below `offset` along `axis`.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    pub axis: usize,
    pub offset: f64,
}

/// Radially symmetric crater on otherwise flat ground, described as a height
/// field `z = z(x, y)`.
///
/// The profile is flat out to the inner-rim radius, rises along a
/// cosine-smoothed inner wall to the rim crest at the top-rim radius, and
/// decays along a cosine flank back to the base height at the outer-rim
/// radius. The exact blend between the characteristic radii is a stand-in
/// shape, not a measured lunar profile.
#[derive(Clone, Debug, PartialEq)]
pub struct CraterTerrain {
    pub center_xy: [f64; 2],
    /// Height of the undisturbed ground surface.
    pub base_height: f64,
    pub inner_rim_radius: f64,
    pub top_rim_radius: f64,
    pub outer_rim_radius: f64,
    /// Rim crest height above the base ground.
    pub top_height: f64,
    /// Depth of the crater floor below the base ground.
    pub floor_depth: f64,
}

impl CraterTerrain {
    pub fn validate(&self) -> Result<()> {
        let ok = self.inner_rim_radius > 0.0
            && self.top_rim_radius > self.inner_rim_radius
            && self.outer_rim_radius > self.top_rim_radius
            && self.top_height >= 0.0
            && self.floor_depth >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Geometry(format!(
                "crater radii must satisfy 0 < inner < top < outer and heights must be non-negative: {self:?}"
            )))
        }
    }

    fn floor_z(&self) -> f64 {
        self.base_height - self.floor_depth
    }

    fn rim_z(&self) -> f64 {
        self.base_height + self.top_height
    }

    fn radius_of(&self, x: f64, y: f64) -> f64 {
        let dx = x - self.center_xy[0];
        let dy = y - self.center_xy[1];
        (dx * dx + dy * dy).sqrt()
    }

    /// Surface height and its radial derivative at radius `r`.
    fn profile(&self, r: f64) -> (f64, f64) {
        let (ri, rt, ro) = (
            self.inner_rim_radius,
            self.top_rim_radius,
            self.outer_rim_radius,
        );
        if r <= ri {
            (self.floor_z(), 0.0)
        } else if r <= rt {
            let t = (r - ri) / (rt - ri);
            let rise = self.rim_z() - self.floor_z();
            (
                self.floor_z() + rise * 0.5 * (1.0 - (PI * t).cos()),
                rise * 0.5 * PI * (PI * t).sin() / (rt - ri),
            )
        } else if r <= ro {
            let t = (r - rt) / (ro - rt);
            (
                self.base_height + self.top_height * 0.5 * (1.0 + (PI * t).cos()),
                -self.top_height * 0.5 * PI * (PI * t).sin() / (ro - rt),
            )
        } else {
            (self.base_height, 0.0)
        }
    }

    pub fn height(&self, x: f64, y: f64) -> f64 {
        self.profile(self.radius_of(x, y)).0
    }

    /// Gradient `(dz/dx, dz/dy)` of the height field.
    pub fn slope(&self, x: f64, y: f64) -> [f64; 2] {
        let r = self.radius_of(x, y);
        if r < 1e-300 {
            return [0.0, 0.0];
        }
        let dzdr = self.profile(r).1;
        [
            dzdr * (x - self.center_xy[0]) / r,
            dzdr * (y - self.center_xy[1]) / r,
        ]
    }

    pub fn max_slope(&self) -> f64 {
        let wall = PI * (self.rim_z() - self.floor_z())
            / (2.0 * (self.top_rim_radius - self.inner_rim_radius));
        let flank = PI * self.top_height / (2.0 * (self.outer_rim_radius - self.top_rim_radius));
        wall.max(flank)
    }

    pub fn max_height(&self) -> f64 {
        self.rim_z().max(self.base_height)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LevelSetGeometry {
    Sphere(Sphere),
    Crater(CraterTerrain),
    Plane(Plane),
    /// Union of material regions (pointwise minimum of the member level sets).
    Composite(Vec<LevelSetGeometry>),
}

impl LevelSetGeometry {
    pub fn sphere(center: [f64; 3], radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Geometry(format!(
                "sphere radius must be positive, got {radius}"
            )));
        }
        Ok(LevelSetGeometry::Sphere(Sphere {
            center: Vec3::from(center),
            radius,
        }))
    }

    pub fn crater(terrain: CraterTerrain) -> Result<Self> {
        terrain.validate()?;
        Ok(LevelSetGeometry::Crater(terrain))
    }

    pub fn plane(axis: usize, offset: f64) -> Result<Self> {
        if axis > 2 {
            return Err(Error::Geometry(format!(
                "plane axis must be 0, 1 or 2, got {axis}"
            )));
        }
        Ok(LevelSetGeometry::Plane(Plane { axis, offset }))
    }

    /// Signed level-set value at `p`.
    ///
    /// For spheres and planes this is the signed Euclidean distance; for
    /// terrain it is the vertical offset `z - z(x, y)`.
    pub fn value(&self, p: &Vec3) -> f64 {
        match self {
            LevelSetGeometry::Sphere(s) => (p - s.center).norm() - s.radius,
            LevelSetGeometry::Plane(pl) => p[pl.axis] - pl.offset,
            LevelSetGeometry::Crater(c) => p.z - c.height(p.x, p.y),
            LevelSetGeometry::Composite(parts) => parts
                .iter()
                .map(|g| g.value(p))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Level-set value with near-zero values pushed to `+SNAP_FRACTION * h`.
    pub fn snapped_value(&self, p: &Vec3, h: f64) -> f64 {
        let v = self.value(p);
        let eps = SNAP_FRACTION * h;
        if v.abs() < eps {
            eps
        } else {
            v
        }
    }

    fn active_member(&self, p: &Vec3) -> &LevelSetGeometry {
        match self {
            LevelSetGeometry::Composite(parts) => parts
                .iter()
                .min_by(|a, b| a.value(p).total_cmp(&b.value(p)))
                .map(|g| g.active_member(p))
                .unwrap_or(self),
            g => g,
        }
    }

    /// Unit normal pointing from material into plasma.
    pub fn outward_normal(&self, p: &Vec3) -> Vec3 {
        match self.active_member(p) {
            LevelSetGeometry::Sphere(s) => {
                let d = p - s.center;
                let n = d.norm();
                if n > 0.0 {
                    d / n
                } else {
                    Vec3::z()
                }
            }
            LevelSetGeometry::Plane(pl) => {
                let mut n = Vec3::zeros();
                n[pl.axis] = 1.0;
                n
            }
            LevelSetGeometry::Crater(c) => {
                let [sx, sy] = c.slope(p.x, p.y);
                Vec3::new(-sx, -sy, 1.0).normalize()
            }
            LevelSetGeometry::Composite(_) => Vec3::z(),
        }
    }

    /// Closest-ish point on the interface: radial projection for spheres,
    /// vertical projection for terrain, orthogonal projection for planes.
    pub fn project_to_surface(&self, p: &Vec3) -> Vec3 {
        match self.active_member(p) {
            LevelSetGeometry::Sphere(s) => {
                let d = p - s.center;
                let n = d.norm();
                if n > 0.0 {
                    s.center + d * (s.radius / n)
                } else {
                    s.center + Vec3::z() * s.radius
                }
            }
            LevelSetGeometry::Plane(pl) => {
                let mut q = *p;
                q[pl.axis] = pl.offset;
                q
            }
            LevelSetGeometry::Crater(c) => Vec3::new(p.x, p.y, c.height(p.x, p.y)),
            LevelSetGeometry::Composite(_) => *p,
        }
    }

    /// Upper bound on `|value(a) - value(b)| / |a - b|`.
    pub fn lipschitz_bound(&self) -> f64 {
        match self {
            LevelSetGeometry::Sphere(_) | LevelSetGeometry::Plane(_) => 1.0,
            LevelSetGeometry::Crater(c) => (1.0 + c.max_slope().powi(2)).sqrt(),
            LevelSetGeometry::Composite(parts) => parts
                .iter()
                .map(|g| g.lipschitz_bound())
                .fold(1.0, f64::max),
        }
    }

    /// Highest `z` reached by any material, if bounded.
    pub fn material_top(&self) -> Option<f64> {
        match self {
            LevelSetGeometry::Sphere(s) => Some(s.center.z + s.radius),
            LevelSetGeometry::Plane(pl) if pl.axis == 2 => Some(pl.offset),
            LevelSetGeometry::Plane(_) => None,
            LevelSetGeometry::Crater(c) => Some(c.max_height()),
            LevelSetGeometry::Composite(parts) => {
                let mut top = f64::NEG_INFINITY;
                for g in parts {
                    top = top.max(g.material_top()?);
                }
                Some(top)
            }
        }
    }

    /// Fraction of direct sunlight reaching the surface at `point`.
    ///
    /// Returns `max(0, n·s)` unless a ray marched from the point towards the
    /// Sun re-enters material, in which case the point is shadowed.
    pub fn sunlight_index(&self, point: &Vec3, sun: &SunModel, march: &RayMarch) -> Result<f64> {
        let v = self.value(point);
        if v.abs() > march.surface_tolerance {
            return Err(Error::Geometry(format!(
                "sunlight index requested {v:.3e} away from the surface (tolerance {:.3e})",
                march.surface_tolerance
            )));
        }
        let cos_incidence = self.outward_normal(point).dot(&sun.direction);
        if cos_incidence <= 0.0 {
            return Ok(0.0);
        }
        if self.is_occluded(point, sun, march) {
            return Ok(0.0);
        }
        Ok(cos_incidence.min(1.0))
    }

    fn is_occluded(&self, point: &Vec3, sun: &SunModel, march: &RayMarch) -> bool {
        let top = self.material_top();
        let mut t = march.step;
        loop {
            let q = point + sun.direction * t;
            if !march.contains(&q) {
                return false;
            }
            if let Some(top) = top {
                if q.z > top && sun.direction.z >= 0.0 {
                    return false;
                }
            }
            if self.value(&q) < 0.0 {
                return true;
            }
            t += march.step;
        }
    }
}

/// Direction to the Sun and reference photoemission parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct SunModel {
    /// Unit vector pointing from the surface towards the Sun.
    pub direction: Vec3,
    /// Photoelectron flux emitted by a surface facing the Sun head-on,
    /// in normalized units (density × velocity).
    pub reference_flux: f64,
}

impl SunModel {
    pub fn new(direction: [f64; 3], reference_flux: f64) -> Result<Self> {
        let d = Vec3::from(direction);
        let n = d.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Geometry(
                "sun direction must be a finite non-zero vector".into(),
            ));
        }
        if !(reference_flux >= 0.0) {
            return Err(Error::Geometry(
                "photoelectron reference flux must be non-negative".into(),
            ));
        }
        Ok(SunModel {
            direction: d / n,
            reference_flux,
        })
    }

    /// Sun at `elevation_deg` above the x–y ground plane, with azimuth measured
    /// from +x towards +y.
    pub fn from_angles(elevation_deg: f64, azimuth_deg: f64, reference_flux: f64) -> Result<Self> {
        let (e, a) = (elevation_deg.to_radians(), azimuth_deg.to_radians());
        Self::new(
            [e.cos() * a.cos(), e.cos() * a.sin(), e.sin()],
            reference_flux,
        )
    }
}

/// Parameters for the occlusion ray march.
#[derive(Clone, Debug)]
pub struct RayMarch {
    pub step: f64,
    pub lower: Vec3,
    pub upper: Vec3,
    pub surface_tolerance: f64,
}

impl RayMarch {
    /// March with half-cell steps inside the given box.
    pub fn for_mesh(lower: [f64; 3], upper: [f64; 3], h: f64) -> Self {
        RayMarch {
            step: 0.5 * h,
            lower: Vec3::from(lower),
            upper: Vec3::from(upper),
            surface_tolerance: 1e-6 * h,
        }
    }

    fn contains(&self, q: &Vec3) -> bool {
        (0..3).all(|a| q[a] >= self.lower[a] && q[a] <= self.upper[a])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn paper_crater() -> CraterTerrain {
        CraterTerrain {
            center_xy: [100.0, 0.0],
            base_height: 9.5,
            inner_rim_radius: 10.5,
            top_rim_radius: 20.2,
            outer_rim_radius: 30.9,
            top_height: 6.7,
            floor_depth: 4.0,
        }
    }

    #[test]
    fn sphere_values() {
        let g = LevelSetGeometry::sphere([0.0; 3], 0.401).unwrap();
        assert_abs_diff_eq!(g.value(&Vec3::zeros()), -0.401, epsilon = 1e-15);
        assert_abs_diff_eq!(g.value(&Vec3::new(0.401, 0.0, 0.0)), 0.0, epsilon = 1e-15);
        assert!(LevelSetGeometry::sphere([0.0; 3], 0.0).is_err());
    }

    #[test]
    fn crater_sign_far_from_rim() {
        let c = paper_crater();
        let g = LevelSetGeometry::crater(c.clone()).unwrap();
        let far = [100.0 + 45.0, 5.0];
        assert!(g.value(&Vec3::new(far[0], far[1], c.base_height + 0.3)) > 0.0);
        assert!(g.value(&Vec3::new(far[0], far[1], c.base_height - 0.3)) < 0.0);
        assert_abs_diff_eq!(c.height(far[0], far[1]), c.base_height, epsilon = 1e-12);
        // profile is continuous at each radius seam
        for r in [c.inner_rim_radius, c.top_rim_radius, c.outer_rim_radius] {
            let below = c.height(100.0 + r - 1e-9, 0.0);
            let above = c.height(100.0 + r + 1e-9, 0.0);
            assert_abs_diff_eq!(below, above, epsilon = 1e-6);
        }
        assert_abs_diff_eq!(c.height(100.0, 0.0), 5.5, epsilon = 1e-12);
        assert_abs_diff_eq!(c.height(120.2, 0.0), 16.2, epsilon = 1e-12);
    }

    #[test]
    fn crater_rejects_unordered_radii() {
        let mut c = paper_crater();
        c.top_rim_radius = 5.0;
        assert!(LevelSetGeometry::crater(c).is_err());
    }

    #[test]
    fn snapping_pushes_into_plasma() {
        let g = LevelSetGeometry::plane(2, 1.0).unwrap();
        let h = 0.1;
        let v = g.snapped_value(&Vec3::new(0.3, 0.2, 1.0), h);
        assert_eq!(v, SNAP_FRACTION * h);
        assert_eq!(g.snapped_value(&Vec3::new(0.0, 0.0, 0.5), h), -0.5);
    }

    #[test]
    fn flat_ground_sunlight_at_ten_degrees() {
        let g = LevelSetGeometry::plane(2, 1.0).unwrap();
        let sun = SunModel::from_angles(10.0, 180.0, 1.0).unwrap();
        let march = RayMarch::for_mesh([0.0; 3], [10.0; 3], 1.0);
        let idx = g
            .sunlight_index(&Vec3::new(5.0, 5.0, 1.0), &sun, &march)
            .unwrap();
        assert_abs_diff_eq!(idx, 10f64.to_radians().sin(), epsilon = 1e-12);
        assert_abs_diff_eq!(idx, 0.1736, epsilon = 1e-4);
    }

    #[test]
    fn perpendicular_sun_gives_zero() {
        let g = LevelSetGeometry::plane(2, 1.0).unwrap();
        let sun = SunModel::new([1.0, 0.0, 0.0], 1.0).unwrap();
        let march = RayMarch::for_mesh([0.0; 3], [10.0; 3], 1.0);
        let idx = g
            .sunlight_index(&Vec3::new(5.0, 5.0, 1.0), &sun, &march)
            .unwrap();
        assert_eq!(idx, 0.0);
    }

    #[test]
    fn sunlight_requires_surface_point() {
        let g = LevelSetGeometry::plane(2, 1.0).unwrap();
        let sun = SunModel::from_angles(45.0, 0.0, 1.0).unwrap();
        let march = RayMarch::for_mesh([0.0; 3], [10.0; 3], 1.0);
        assert!(g
            .sunlight_index(&Vec3::new(5.0, 5.0, 2.0), &sun, &march)
            .is_err());
    }

    /// Independent occlusion oracle: sample the straight line to the Sun on a
    /// fine grid and compare its height with the terrain.
    fn brute_force_shadowed(c: &CraterTerrain, p: &Vec3, sun: &Vec3) -> bool {
        let mut t = 1e-3;
        while t < 400.0 {
            let q = p + sun * t;
            if q.z > c.max_height() {
                return false;
            }
            if q.z < c.height(q.x, q.y) {
                return true;
            }
            t += 1e-3;
        }
        false
    }

    #[test]
    fn crater_floor_is_shadowed_by_rim() {
        let c = paper_crater();
        let g = LevelSetGeometry::crater(c.clone()).unwrap();
        let sun = SunModel::from_angles(10.0, 180.0, 1.0).unwrap();
        let march = RayMarch::for_mesh([0.0, 0.0, 0.0], [200.0, 100.0, 100.0], 1.0);
        let floor = Vec3::new(100.0, 0.0, c.height(100.0, 0.0));
        assert!(brute_force_shadowed(&c, &floor, &sun.direction));
        assert_eq!(g.sunlight_index(&floor, &sun, &march).unwrap(), 0.0);
        // far ground on the sunward side is lit
        let ground = Vec3::new(20.0, 40.0, c.base_height);
        assert!(!brute_force_shadowed(&c, &ground, &sun.direction));
        assert!(g.sunlight_index(&ground, &sun, &march).unwrap() > 0.17);
    }

    #[test]
    fn sunlight_monotone_in_elevation_on_flat_patch() {
        let g = LevelSetGeometry::plane(2, 0.0).unwrap();
        let march = RayMarch::for_mesh([-10.0; 3], [10.0; 3], 1.0);
        let p = Vec3::zeros();
        let mut prev = -1.0;
        for e in (0..=90).step_by(5) {
            let sun = SunModel::from_angles(e as f64, 0.0, 1.0).unwrap();
            let s = g.sunlight_index(&p, &sun, &march).unwrap();
            assert!((0.0..=1.0).contains(&s));
            assert!(s >= prev);
            prev = s;
        }
    }

    #[test]
    fn sun_direction_is_unit() {
        let s = SunModel::new([3.0, 0.0, 4.0], 1.0).unwrap();
        assert!((s.direction.norm() - 1.0).abs() < 1e-12);
        assert!(SunModel::new([0.0; 3], 1.0).is_err());
    }

    proptest! {
        #[test]
        fn sphere_level_set_is_distance(x in -3.0..3.0f64, y in -3.0..3.0f64, z in -3.0..3.0f64) {
            let g = LevelSetGeometry::sphere([0.2, -0.1, 0.3], 0.401).unwrap();
            let p = Vec3::new(x, y, z);
            let d = ((x - 0.2).powi(2) + (y + 0.1).powi(2) + (z - 0.3).powi(2)).sqrt();
            prop_assert!((g.value(&p) + 0.401 - d).abs() <= 1e-12 * d.max(1.0));
        }

        #[test]
        fn terrain_sign_matches_height(x in 60.0..140.0f64, y in 0.0..40.0f64, z in 0.0..20.0f64) {
            let c = paper_crater();
            let g = LevelSetGeometry::crater(c.clone()).unwrap();
            let p = Vec3::new(x, y, z);
            let dz = z - c.height(x, y);
            prop_assume!(dz.abs() > 1e-12);
            prop_assert_eq!(dz.signum(), g.value(&p).signum());
        }

        #[test]
        fn terrain_lipschitz_bound_holds(
            x in 60.0..140.0f64, y in 0.0..40.0f64,
            dx in -0.5..0.5f64, dy in -0.5..0.5f64,
        ) {
            let c = paper_crater();
            let g = LevelSetGeometry::crater(c).unwrap();
            let a = Vec3::new(x, y, 10.0);
            let b = Vec3::new(x + dx, y + dy, 10.0);
            let dist = (a - b).norm();
            prop_assume!(dist > 1e-9);
            prop_assert!((g.value(&a) - g.value(&b)).abs() <= g.lipschitz_bound() * dist * (1.0 + 1e-9));
        }
    }
}
