#![allow(dead_code)]

use std::path::Path;

use ifepic::driver::SimulationConfig;

/// Small two-species sphere problem; `{WORKERS}`, `{STEPS}` and `{OUT}` are
/// substituted by [`sphere`].
pub const SPHERE: &str = r#"
scenario = "oml-sphere"
seed = 11

[mesh]
lower_debye = [0.0, 0.0, 0.0]
upper_debye = [2.0, 2.0, 2.0]
cell_size_debye = 0.25

[decomposition]
workers = {WORKERS}

[time]
dt_wpe = 0.05
steps = {STEPS}

[field]
pcg_max_iterations = 500
pcg_tolerance = 1e-8
pcg_preconditioner = "incomplete-cholesky"
ddm_tolerance = 1e-6
ddm_initial_max_iterations = 300
ddm_max_iterations = 200
faces = ["neumann", "dirichlet", "neumann", "dirichlet", "neumann", "dirichlet"]

[plasma]
reference_temperature_ev = 1.0
particle_faces = ["reflect", "open", "reflect", "open", "reflect", "open"]

[[species]]
name = "electron"
charge_e = -1.0
mass_me = 1.0
temperature_ev = 1.0
density_nref = 1.0
particles_per_cell = 8

[[species]]
name = "ion"
charge_e = 1.0
mass_me = 100.0
temperature_ev = 1.0
density_nref = 1.0
particles_per_cell = 8

[geometry]
kind = "sphere"
center_debye = [0.0, 0.0, 0.0]
radius_debye = 0.6
permittivity = 4.0

[output]
directory = "{OUT}"
snapshot_every_steps = 0
profile_average_steps = 5
"#;

pub const MANUFACTURED: &str = r#"
scenario = "manufactured"

[mesh]
lower_debye = [0.0, 0.0, 0.0]
upper_debye = [1.0, 1.0, 1.0]
cell_size_debye = {H}

[decomposition]
workers = {WORKERS}

[time]
dt_wpe = 0.1
steps = {STEPS}

[field]
pcg_max_iterations = 20000
pcg_tolerance = 1e-12
pcg_preconditioner = "incomplete-cholesky"
ddm_tolerance = {DDM_TOL}
ddm_initial_max_iterations = 2000
ddm_max_iterations = 2000
faces = ["dirichlet", "dirichlet", "dirichlet", "dirichlet", "dirichlet", "dirichlet"]

[plasma]
reference_temperature_ev = 1.0
particle_faces = ["absorb", "absorb", "absorb", "absorb", "absorb", "absorb"]

[geometry]
kind = "sphere"
center_debye = [0.5, 0.5, 0.5]
radius_debye = 0.3
permittivity = {EPS}

[manufactured]
surface_charge = {SIGMA}

[output]
directory = "{OUT}"
"#;

fn workers(w: [usize; 3]) -> String {
    format!("[{}, {}, {}]", w[0], w[1], w[2])
}

pub fn sphere_toml(w: [usize; 3], steps: usize, out: &Path) -> String {
    SPHERE
        .replace("{WORKERS}", &workers(w))
        .replace("{STEPS}", &steps.to_string())
        .replace("{OUT}", out.to_str().unwrap())
}

pub fn sphere(w: [usize; 3], steps: usize, out: &Path) -> SimulationConfig {
    SimulationConfig::from_toml(&sphere_toml(w, steps, out)).unwrap()
}

pub struct Manufactured {
    pub h: f64,
    pub workers: [usize; 3],
    pub steps: usize,
    pub ddm_tolerance: f64,
    pub permittivity: f64,
    pub surface_charge: f64,
}

impl Default for Manufactured {
    fn default() -> Self {
        Manufactured {
            h: 0.125,
            workers: [1, 1, 1],
            steps: 0,
            ddm_tolerance: 1e-8,
            permittivity: 4.0,
            surface_charge: 0.0,
        }
    }
}

impl Manufactured {
    pub fn config(&self, out: &Path) -> SimulationConfig {
        let t = MANUFACTURED
            .replace("{H}", &format!("{:?}", self.h))
            .replace("{WORKERS}", &workers(self.workers))
            .replace("{STEPS}", &self.steps.to_string())
            .replace("{DDM_TOL}", &format!("{:e}", self.ddm_tolerance))
            .replace("{EPS}", &format!("{:?}", self.permittivity))
            .replace("{SIGMA}", &format!("{:?}", self.surface_charge))
            .replace("{OUT}", out.to_str().unwrap());
        SimulationConfig::from_toml(&t).unwrap()
    }
}

/// Parse a numeric CSV with a header row.
pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let head = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(|x| x.parse().unwrap_or(f64::NAN)).collect())
        .collect();
    (head, rows)
}

pub fn column(head: &[String], rows: &[Vec<f64>], name: &str) -> Vec<f64> {
    let k = head.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[k]).collect()
}
