//! Configuration, orchestration of the PIC loop and run outputs.

mod config;
pub mod output;
mod scaling;
mod scenario;
mod sim;
mod timers;
mod worker;

pub use config::{
    DecompositionConfig, FieldConfig, FieldFace, GeometryConfig, ManufacturedConfig, MeshConfig,
    OutputConfig, PlasmaConfig, Scenario, SimulationConfig, SunConfig, TimeConfig,
};
pub use scaling::{run_scaling_suite, ScalingRow};
pub use scenario::Setup;
pub use sim::{
    plateau_drift, run_simulation, FieldError, ProfileBin, ProfileResult, RunSummary, Simulation,
    SurfaceResult,
};
pub use timers::{StageTimers, TimerReport, TimerRow};
pub use worker::{StepContext, StepTally, Worker, WorkerDiagnostics};
