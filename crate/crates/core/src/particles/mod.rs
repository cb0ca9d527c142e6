//! Particle storage and the per-particle stages of the PIC loop.

mod boundary;
mod interp;
mod ledger;
mod migrate;
pub mod sampling;
mod source;
mod species;

pub use boundary::{
    apply_domain_boundaries, collect_at_material, crossing_point, in_material, in_material_global,
    BoundaryTally, ParticleFace, CROSSING_BISECTIONS,
};
pub use interp::{charge_to_density, gather, gather_all, half_step_back, push_leapfrog, scatter};
pub use ledger::{facet_charge_to_jump, SurfaceChargeLedger};
pub use migrate::{decode, encode, receive_immigrants, split_emigrants, MigrantBatch};
pub use source::{load_uniform, Injector, PhotoEmitter, SourceTally};
pub use species::{ParticleBuffer, Species, SpeciesConfig, SpeciesSource};
