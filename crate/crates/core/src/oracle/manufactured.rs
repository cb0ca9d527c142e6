//! Radially symmetric manufactured solution of the sphere interface problem.
//!
//! `φ⁻ = r²/ε⁻` inside, `φ⁺ = r²/ε⁺ + R²(1/ε⁻ − 1/ε⁺)` outside, so that
//! `−∇·(ε∇φ) = −6` on both sides, `φ` is continuous at `r = R` and
//! `ε ∂φ/∂r = 2R` on both sides. The charged variant adds `s·(1/r − 1/R)/ε⁺`
//! outside, which is harmonic and leaves a surface charge density `s/R²`.

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManufacturedSphere {
    pub center: [f64; 3],
    pub radius: f64,
    pub eps_minus: f64,
    pub eps_plus: f64,
    /// Strength of the harmonic term; zero for the homogeneous-jump case.
    pub charge: f64,
}

impl ManufacturedSphere {
    pub fn new(center: [f64; 3], radius: f64, eps_minus: f64, eps_plus: f64) -> Self {
        ManufacturedSphere {
            center,
            radius,
            eps_minus,
            eps_plus,
            charge: 0.0,
        }
    }

    /// Variant with a uniform surface charge density `sigma` on the sphere.
    pub fn with_surface_charge(mut self, sigma: f64) -> Self {
        self.charge = sigma * self.radius * self.radius;
        self
    }

    fn r(&self, p: [f64; 3]) -> f64 {
        let d = [
            p[0] - self.center[0],
            p[1] - self.center[1],
            p[2] - self.center[2],
        ];
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    }

    pub fn phi(&self, p: [f64; 3]) -> f64 {
        let r = self.r(p);
        let big_r = self.radius;
        if r < big_r {
            r * r / self.eps_minus
        } else {
            r * r / self.eps_plus
                + big_r * big_r * (1.0 / self.eps_minus - 1.0 / self.eps_plus)
                + self.charge * (1.0 / r - 1.0 / big_r) / self.eps_plus
        }
    }

    /// Source `ρ` in `−∇·(ε∇φ) = ρ`.
    pub fn rho(&self, _p: [f64; 3]) -> f64 {
        -6.0
    }

    /// Physical surface charge density `ε⁺E⁺·n − ε⁻E⁻·n` on the sphere.
    pub fn surface_charge(&self) -> f64 {
        self.charge / (self.radius * self.radius)
    }

    /// Flux jump `[ε ∂φ/∂n] = ε⁺∂φ⁺/∂r − ε⁻∂φ⁻/∂r` at the interface.
    pub fn flux_jump(&self) -> f64 {
        -self.surface_charge()
    }

    pub fn permittivity(&self, p: [f64; 3]) -> f64 {
        if self.r(p) < self.radius {
            self.eps_minus
        } else {
            self.eps_plus
        }
    }
}
