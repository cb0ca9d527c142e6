use std::fmt::Write as _;
use std::path::Path;

use super::config::SimulationConfig;
use super::output::write_text;
use super::sim::run_simulation;
use crate::error::Result;

pub const SCALING_CSV: &str = "scaling.csv";

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingRow {
    pub decomposition: [usize; 3],
    pub workers: usize,
    pub total_seconds: f64,
    pub speedup: f64,
    pub efficiency_percent: f64,
    /// False when the run had more workers than cores.
    pub reliable: bool,
}

fn label(d: [usize; 3]) -> String {
    format!("{}x{}x{}", d[0], d[1], d[2])
}

/// Run `base` once per decomposition and write `scaling.csv` into the base
/// output directory. Speedup is relative to the first entry.
pub fn run_scaling_suite(
    base: &SimulationConfig,
    decomps: &[[usize; 3]],
) -> Result<Vec<ScalingRow>> {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let root = base.output.directory.clone();
    let mut rows: Vec<ScalingRow> = Vec::new();
    for &d in decomps {
        let mut cfg = base.clone();
        cfg.decomposition.workers = d;
        cfg.output.directory = root.join(label(d));
        let workers = d.iter().product::<usize>();
        if workers > cores {
            eprintln!(
                "warning: {} uses {workers} workers on {cores} cores; its timing is not a scaling measurement",
                label(d)
            );
        }
        let summary = run_simulation(cfg)?;
        let t = summary.timers.total_seconds;
        let (t0, w0) = rows
            .first()
            .map_or((t, workers), |r| (r.total_seconds, r.workers));
        let speedup = t0 / t;
        rows.push(ScalingRow {
            decomposition: d,
            workers,
            total_seconds: t,
            speedup,
            efficiency_percent: 100.0 * speedup * w0 as f64 / workers as f64,
            reliable: workers <= cores,
        });
    }
    write_scaling_csv(&root, &rows)?;
    Ok(rows)
}

pub fn write_scaling_csv(dir: &Path, rows: &[ScalingRow]) -> Result<()> {
    let mut s =
        String::from("decomposition,workers,total_seconds,speedup,efficiency_percent,reliable\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{:.4},{:.4},{:.2},{}",
            label(r.decomposition),
            r.workers,
            r.total_seconds,
            r.speedup,
            r.efficiency_percent,
            r.reliable
        );
    }
    std::fs::create_dir_all(dir).map_err(|e| crate::error::Error::io(dir, e))?;
    write_text(&dir.join(SCALING_CSV), &s)
}
