use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::Vec3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpeciesSource {
    /// Pre-loaded in the plasma and injected at open faces.
    #[default]
    Ambient,
    /// Emitted from sunlit material surfaces only.
    Photoemission,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesConfig {
    pub name: String,
    /// Charge in units of the elementary charge (±1).
    #[serde(rename = "charge_e")]
    pub charge: f64,
    /// Mass in electron masses.
    #[serde(rename = "mass_me")]
    pub mass_ratio: f64,
    pub temperature_ev: f64,
    /// Drift velocity in reference electron thermal speeds.
    #[serde(default, rename = "drift_vref")]
    pub drift: [f64; 3],
    /// Number density relative to the reference density.
    #[serde(rename = "density_nref")]
    pub density: f64,
    pub particles_per_cell: usize,
    #[serde(default)]
    pub source: SpeciesSource,
}

/// Species with derived normalized quantities.
#[derive(Clone, Debug, PartialEq)]
pub struct Species {
    pub config: SpeciesConfig,
    pub thermal_speed: f64,
    /// Charge-to-mass ratio in normalized units.
    pub qm: f64,
    /// Real particles per macro-particle, in `n_ref·λ_D³`.
    pub weight: f64,
    pub drift: Vec3,
}

impl Species {
    pub fn new(config: SpeciesConfig, reference_temperature_ev: f64, h: f64) -> Result<Self> {
        let c = &config;
        if !(c.mass_ratio > 0.0) || !(c.temperature_ev > 0.0) || c.particles_per_cell == 0 {
            return Err(Error::Config(format!(
                "species {}: mass ratio and temperature must be positive and particles per cell at least 1",
                c.name
            )));
        }
        if !(c.density >= 0.0) || !(c.charge != 0.0) || c.drift.iter().any(|d| !d.is_finite()) {
            return Err(Error::Config(format!(
                "species {}: needs a non-zero charge, non-negative density and finite drift",
                c.name
            )));
        }
        if !(reference_temperature_ev > 0.0) {
            return Err(Error::Config(
                "reference temperature must be positive".into(),
            ));
        }
        Ok(Species {
            thermal_speed: (c.temperature_ev / reference_temperature_ev / c.mass_ratio).sqrt(),
            qm: c.charge / c.mass_ratio,
            weight: c.density * h * h * h / c.particles_per_cell as f64,
            drift: Vec3::from(c.drift),
            config,
        })
    }

    pub fn charge(&self) -> f64 {
        self.config.charge
    }

    /// Charge carried by one macro-particle.
    pub fn macro_charge(&self) -> f64 {
        self.config.charge * self.weight
    }

    pub fn is_ambient(&self) -> bool {
        self.config.source == SpeciesSource::Ambient
    }
}

/// Positions and velocities of one species on one worker.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParticleBuffer {
    pub pos: Vec<Vec3>,
    pub vel: Vec<Vec3>,
}

impl ParticleBuffer {
    pub fn len(&self) -> usize {
        self.pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos.is_empty()
    }

    pub fn push(&mut self, x: Vec3, v: Vec3) {
        self.pos.push(x);
        self.vel.push(v);
    }

    pub fn swap_remove(&mut self, i: usize) -> (Vec3, Vec3) {
        (self.pos.swap_remove(i), self.vel.swap_remove(i))
    }

    pub fn clear(&mut self) {
        self.pos.clear();
        self.vel.clear();
    }

    /// Keep particles for which `keep` returns `true`, preserving order.
    pub fn retain(&mut self, mut keep: impl FnMut(&mut Vec3, &mut Vec3) -> bool) {
        let mut w = 0;
        for r in 0..self.pos.len() {
            let (mut x, mut v) = (self.pos[r], self.vel[r]);
            if keep(&mut x, &mut v) {
                self.pos[w] = x;
                self.vel[w] = v;
                w += 1;
            }
        }
        self.pos.truncate(w);
        self.vel.truncate(w);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn electron() -> SpeciesConfig {
        SpeciesConfig {
            name: "electron".into(),
            charge: -1.0,
            mass_ratio: 1.0,
            temperature_ev: 1.0,
            drift: [0.0; 3],
            density: 1.0,
            particles_per_cell: 27,
            source: SpeciesSource::Ambient,
        }
    }

    #[test]
    fn derived_quantities() {
        let mut ion = electron();
        ion.charge = 1.0;
        ion.mass_ratio = 1836.0;
        let s = Species::new(ion, 1.0, 0.2).unwrap();
        assert!((s.thermal_speed - (1.0f64 / 1836.0).sqrt()).abs() < 1e-15);
        assert!((s.weight - 0.008 / 27.0).abs() < 1e-18);
        assert!((s.qm - 1.0 / 1836.0).abs() < 1e-18);
        let mut bad = electron();
        bad.particles_per_cell = 0;
        assert!(Species::new(bad, 1.0, 1.0).is_err());
    }

    #[test]
    fn retain_preserves_order() {
        let mut b = ParticleBuffer::default();
        for i in 0..5 {
            b.push(Vec3::new(i as f64, 0.0, 0.0), Vec3::zeros());
        }
        b.retain(|x, _| x.x as usize % 2 == 0);
        assert_eq!(
            b.pos.iter().map(|p| p.x).collect::<Vec<_>>(),
            vec![0.0, 2.0, 4.0]
        );
    }
}
