//! Velocity distributions for loading, injection and emission.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::geometry::Vec3;

/// One-sided particle flux `∫_0^∞ v f(v) dv` of a unit-density Maxwellian
/// with thermal speed `vt` drifting at `u` along the normal.
pub fn one_sided_flux(u: f64, vt: f64) -> f64 {
    let s = u / (SQRT_2 * vt);
    vt / (2.0 * PI).sqrt() * (-s * s).exp() + 0.5 * u * (1.0 + libm::erf(s))
}

pub fn maxwellian<R: Rng>(rng: &mut R, drift: &Vec3, vt: f64) -> Vec3 {
    let n: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
    drift + Vec3::from(n) * vt
}

/// Inverse-CDF sampler of the flux-weighted normal speed
/// `g(v) ∝ v·exp(−(v−u)²/2vt²)` on `v > 0`.
#[derive(Clone, Debug)]
pub struct FluxSampler {
    v: Vec<f64>,
    cdf: Vec<f64>,
}

const TABLE_POINTS: usize = 4097;

impl FluxSampler {
    pub fn new(u: f64, vt: f64) -> Self {
        let vmax = u.max(0.0) + 9.0 * vt;
        let v: Vec<f64> = (0..TABLE_POINTS)
            .map(|i| vmax * i as f64 / (TABLE_POINTS - 1) as f64)
            .collect();
        let g = |x: f64| x * (-(x - u) * (x - u) / (2.0 * vt * vt)).exp();
        let mut cdf = vec![0.0; TABLE_POINTS];
        for i in 1..TABLE_POINTS {
            // Simpson on each interval
            let (a, b) = (v[i - 1], v[i]);
            cdf[i] = cdf[i - 1] + (b - a) / 6.0 * (g(a) + 4.0 * g(0.5 * (a + b)) + g(b));
        }
        let total = cdf[TABLE_POINTS - 1];
        for c in &mut cdf {
            *c /= total;
        }
        FluxSampler { v, cdf }
    }

    pub fn sample_with(&self, uniform: f64) -> f64 {
        let i = self
            .cdf
            .partition_point(|&c| c < uniform)
            .clamp(1, TABLE_POINTS - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let t = if c1 > c0 {
            (uniform - c0) / (c1 - c0)
        } else {
            0.0
        };
        self.v[i - 1] + t * (self.v[i] - self.v[i - 1])
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        self.sample_with(rng.random::<f64>())
    }
}

/// Two unit vectors completing `n` to an orthonormal frame.
pub fn tangent_frame(n: &Vec3) -> (Vec3, Vec3) {
    let helper = if n.x.abs() < 0.9 {
        Vec3::x()
    } else {
        Vec3::y()
    };
    let t1 = n.cross(&helper).normalize();
    (t1, n.cross(&t1))
}

/// Velocity of a particle crossing a surface with unit normal `n` (pointing
/// into the plasma) from a drifting Maxwellian.
pub fn flux_velocity<R: Rng>(
    rng: &mut R,
    sampler: &FluxSampler,
    n: &Vec3,
    drift: &Vec3,
    vt: f64,
) -> Vec3 {
    let vn = sampler.sample(rng);
    let (t1, t2) = tangent_frame(n);
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    n * vn + t1 * (drift.dot(&t1) + vt * a) + t2 * (drift.dot(&t2) + vt * b)
}
