//! Orbit-motion-limited sheath around an absorbing sphere.
//!
//! Plasma at infinity is a stationary Maxwellian of density 1 (both species).
//! Potential is in units of `T_e/e`, lengths in electron Debye lengths.
//! With the sphere radius `a`, surface potential `φ_a < 0`, temperature ratio
//! `τ = T_i/T_e` and speeds `w` in units of each species' `√(2T/m)`:
//!
//! Ions (`ψ = −φ/τ ≥ 0`, attracted):
//! `n_i = (4/√π) ∫_{√ψ}^∞ w² e^{−(w²−ψ)} (1 − F/2) dw`
//!
//! Electrons (`χ = −φ ≥ 0`, repelled):
//! `n_e = (4/√π) ∫_0^∞ w² e^{−(w²+χ)} (1 − F/2) dw`
//!
//! `F` is the solid-angle fraction of outward-moving particles whose orbit
//! traces back to the sphere (none exist, the sphere emits nothing):
//! with `u = w²` and `X = (a/r)²(u + U_a − U)` for the potential energy `U`
//! (`−ψ` for ions, `χ` for electrons), `F = 1 − √(1 − X/u)` when `X < u`,
//! `F = 1` when `X ≥ u`, and `F = 0` when `u + U < U_a` (the orbit cannot
//! reach the surface).
//!
//! The floating potential follows from the orbit-limited current balance
//! `e^{φ_a} = √(τ/μ) (1 − φ_a/τ)` for ion-to-electron mass ratio `μ`, and the
//! profile solves `(1/r²)(r²φ′)′ = −(n_i − n_e)` with `φ(a) = φ_a` and
//! `φ(r_max) = 0`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct OmlProfile {
    pub r: Vec<f64>,
    pub phi: Vec<f64>,
    pub n_i: Vec<f64>,
    pub n_e: Vec<f64>,
    pub surface_potential: f64,
    /// Max-norm residual of the discretized Poisson equation.
    pub residual: f64,
}

impl OmlProfile {
    /// Linear interpolation of the potential at radius `r`.
    pub fn potential_at(&self, r: f64) -> f64 {
        let n = self.r.len();
        if r <= self.r[0] {
            return self.phi[0];
        }
        if r >= self.r[n - 1] {
            return self.phi[n - 1];
        }
        let k = self.r.partition_point(|&x| x <= r).min(n - 1);
        let (r0, r1) = (self.r[k - 1], self.r[k]);
        let t = (r - r0) / (r1 - r0);
        self.phi[k - 1] * (1.0 - t) + self.phi[k] * t
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,phi,n_i,n_e\n");
        for k in 0..self.r.len() {
            s.push_str(&format!(
                "{:.8e},{:.8e},{:.8e},{:.8e}\n",
                self.r[k], self.phi[k], self.n_i[k], self.n_e[k]
            ));
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OmlParameters {
    pub radius: f64,
    pub temperature_ratio: f64,
    pub mass_ratio: f64,
    pub r_max: f64,
    pub grid_points: usize,
}

impl OmlParameters {
    pub fn new(radius: f64, temperature_ratio: f64, mass_ratio: f64, r_max: f64) -> Self {
        OmlParameters {
            radius,
            temperature_ratio,
            mass_ratio,
            r_max,
            grid_points: 2000,
        }
    }
}

const QUAD_POINTS: usize = 801;
const W_MAX: f64 = 6.5;

fn loss_fraction(u: f64, x: f64) -> f64 {
    if x >= u {
        1.0
    } else if x <= 0.0 {
        0.0
    } else {
        1.0 - (1.0 - x / u).sqrt()
    }
}

/// Composite Simpson rule on `[0, W_MAX]`.
fn simpson(f: impl Fn(f64) -> f64) -> f64 {
    let n = QUAD_POINTS - 1;
    let dx = W_MAX / n as f64;
    let mut s = f(0.0) + f(W_MAX);
    for k in 1..n {
        s += f(k as f64 * dx) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * dx / 3.0
}

/// Normalized ion density at radius `r`, potential `phi`, surface potential `phi_a`.
pub fn ion_density(phi: f64, phi_a: f64, r: f64, a: f64, tau: f64) -> f64 {
    let psi = (-phi / tau).max(0.0);
    let psi_a = (-phi_a / tau).max(0.0);
    let geom = (a / r).powi(2);
    // substitute w² = ψ + s², dw = s ds / w
    let integral = simpson(|s| {
        let u = psi + s * s;
        let w = u.sqrt();
        if w == 0.0 {
            return 0.0;
        }
        let x = geom * (u + psi_a - psi);
        w * s * (-s * s).exp() * (1.0 - 0.5 * loss_fraction(u, x))
    });
    4.0 / PI.sqrt() * integral
}

pub fn electron_density(phi: f64, phi_a: f64, r: f64, a: f64) -> f64 {
    let chi = -phi;
    let chi_a = -phi_a;
    let geom = (a / r).powi(2);
    let integral = simpson(|w| {
        let u = w * w;
        let f = if u + chi < chi_a {
            0.0
        } else {
            loss_fraction(u, geom * (u + chi - chi_a))
        };
        u * (-(u + chi)).exp() * (1.0 - 0.5 * f)
    });
    4.0 / PI.sqrt() * integral
}

/// Root of `e^{φ} = √(τ/μ)(1 − φ/τ)` in `[−10, 0]`.
pub fn floating_potential(tau: f64, mass_ratio: f64) -> Result<f64> {
    let g = |p: f64| p.exp() - (tau / mass_ratio).sqrt() * (1.0 - p / tau);
    let (mut lo, mut hi) = (-10.0, 0.0);
    if g(lo) * g(hi) > 0.0 {
        return Err(Error::Numerical(
            "floating-potential current balance has no root in [-10, 0]".into(),
        ));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(lo) * g(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn net_charge(phi: f64, phi_a: f64, r: f64, p: &OmlParameters) -> f64 {
    ion_density(phi, phi_a, r, p.radius, p.temperature_ratio)
        - electron_density(phi, phi_a, r, p.radius)
}

/// Thomas algorithm for `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`.
fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i] * c[i - 1];
        c[i] = sup[i] / m;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

pub fn oml_sheath_profile(p: &OmlParameters) -> Result<OmlProfile> {
    if !(p.radius > 0.0) || !(p.r_max > p.radius) || p.grid_points < 10 {
        return Err(Error::Config(
            "OML profile needs 0 < R_s < r_max and at least 10 grid points".into(),
        ));
    }
    let phi_a = floating_potential(p.temperature_ratio, p.mass_ratio)?;
    let n = p.grid_points;
    let dr = (p.r_max - p.radius) / (n - 1) as f64;
    let r: Vec<f64> = (0..n).map(|k| p.radius + dr * k as f64).collect();
    let mut phi: Vec<f64> = r
        .iter()
        .map(|&x| phi_a * (p.radius / x) * (p.r_max - x) / (p.r_max - p.radius))
        .collect();

    // unknowns are interior nodes 1..n-1
    let m = n - 2;
    let residual_at = |phi: &[f64], k: usize| {
        let (rm, rp) = (r[k] - 0.5 * dr, r[k] + 0.5 * dr);
        let lap = (rp * rp * (phi[k + 1] - phi[k]) - rm * rm * (phi[k] - phi[k - 1]))
            / (r[k] * r[k] * dr * dr);
        lap + net_charge(phi[k], phi_a, r[k], p)
    };
    let mut res_norm = f64::INFINITY;
    for _ in 0..100 {
        let mut sub = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut sup = vec![0.0; m];
        let mut rhs = vec![0.0; m];
        res_norm = 0.0;
        for i in 0..m {
            let k = i + 1;
            let (rm, rp) = (r[k] - 0.5 * dr, r[k] + 0.5 * dr);
            let s = 1.0 / (r[k] * r[k] * dr * dr);
            let delta = 1e-7;
            let dq = (net_charge(phi[k] + delta, phi_a, r[k], p)
                - net_charge(phi[k] - delta, phi_a, r[k], p))
                / (2.0 * delta);
            sub[i] = rm * rm * s;
            sup[i] = rp * rp * s;
            diag[i] = -(rm * rm + rp * rp) * s + dq;
            let f = residual_at(&phi, k);
            res_norm = res_norm.max(f.abs());
            rhs[i] = -f;
        }
        let dx = solve_tridiagonal(&sub, &diag, &sup, &rhs);
        let step = dx.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        for i in 0..m {
            phi[i + 1] += dx[i];
        }
        if step <= 1e-8 * phi_a.abs() {
            res_norm = (1..n - 1)
                .map(|k| residual_at(&phi, k).abs())
                .fold(0.0, f64::max);
            break;
        }
    }
    if !(res_norm < 1e-6) {
        return Err(Error::Numerical(format!(
            "OML Newton iteration did not converge (residual {res_norm:.3e})"
        )));
    }
    let n_i = r
        .iter()
        .zip(&phi)
        .map(|(&x, &v)| ion_density(v, phi_a, x, p.radius, p.temperature_ratio))
        .collect();
    let n_e = r
        .iter()
        .zip(&phi)
        .map(|(&x, &v)| electron_density(v, phi_a, x, p.radius))
        .collect();
    Ok(OmlProfile {
        r,
        phi,
        n_i,
        n_e,
        surface_potential: phi_a,
        residual: res_norm,
    })
}
