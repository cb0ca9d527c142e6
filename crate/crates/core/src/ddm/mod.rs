//! Overlapping Schwarz decomposition: subdomain topology, guard exchange
//! plans, the Schwarz iteration and guard-region charge reduction.

mod halo;
mod schwarz;
mod topology;

pub use halo::{
    build_charge_plans, build_halo_plans, exchange_guard_potentials, reduce_guard_charge,
    ChargePlan, HaloPlan,
};
pub use schwarz::{
    check_divergence, compute_e_rel, schwarz_iterate, DdmIteration, DdmReport, FieldState,
    RelativeError, SchwarzConfig, DIVERGENCE_FACTOR, DIVERGENCE_WINDOW,
};
pub use topology::{DecompTopology, MIN_OWNED_CELLS};
