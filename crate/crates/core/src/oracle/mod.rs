//! Independent reference solutions used to verify the simulator.
//!
//! Nothing here depends on the finite-element or solver modules.

pub mod manufactured;
pub mod oml;

pub use manufactured::ManufacturedSphere;
pub use oml::{oml_sheath_profile, OmlParameters, OmlProfile};
