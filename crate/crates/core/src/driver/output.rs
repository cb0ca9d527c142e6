use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::ddm::DdmReport;
use crate::error::{Error, Result};
use crate::mesh::GlobalMeshSpec;

pub const CONVERGENCE_CSV: &str = "convergence.csv";
pub const DDM_ITERATIONS_CSV: &str = "ddm_iterations.csv";
pub const PARTICLES_CSV: &str = "particles.csv";
pub const CHARGE_CSV: &str = "charge.csv";
pub const PROFILE_CSV: &str = "profile.csv";
pub const ORACLE_PROFILE_CSV: &str = "oracle_profile.csv";
pub const SURFACE_CSV: &str = "surface.csv";
pub const TIMERS_CSV: &str = "timers.csv";
pub const TIMERS_TXT: &str = "timers.txt";
pub const SUMMARY_TXT: &str = "summary.txt";
pub const MANUFACTURED_CSV: &str = "manufactured_error.csv";

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".to_string(), |v| format!("{v:.6e}"))
}

/// Incrementally written history files.
pub struct HistoryWriter {
    dir: PathBuf,
    convergence: BufWriter<File>,
    ddm: BufWriter<File>,
    particles: BufWriter<File>,
    charge: BufWriter<File>,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let p = dir.join(name);
    File::create(&p)
        .map(BufWriter::new)
        .map_err(|e| Error::io(p, e))
}

/// One history row of charge bookkeeping.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ChargeRow {
    pub particle_charge: f64,
    pub surface_charge: f64,
    pub expected_charge: f64,
    pub bookkeeping_error: f64,
    pub scatter_error: f64,
    pub injected: usize,
    pub emitted: usize,
    pub collected: usize,
    pub exited: usize,
    pub migrated: usize,
}

impl HistoryWriter {
    pub fn create(dir: &Path, species: &[String]) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut w = HistoryWriter {
            dir: dir.to_path_buf(),
            convergence: create(dir, CONVERGENCE_CSV)?,
            ddm: create(dir, DDM_ITERATIONS_CSV)?,
            particles: create(dir, PARTICLES_CSV)?,
            charge: create(dir, CHARGE_CSV)?,
        };
        let mut head = String::from("step");
        for i in 1..=species.len() {
            let _ = write!(head, ",ns{i}");
        }
        head.push_str(",ntot\n");
        w.put(|w| &mut w.particles, &head)?;
        w.put(
            |w| &mut w.convergence,
            "step,max_pcg_residual,max_pcg_iterations,ddm_iterations,max_e_rel,ddm_converged\n",
        )?;
        w.put(
            |w| &mut w.ddm,
            "step,iteration,max_pcg_residual,max_pcg_iterations,max_e_rel\n",
        )?;
        w.put(
            |w| &mut w.charge,
            "step,particle_charge,surface_charge,expected_charge,bookkeeping_error,scatter_error,injected,emitted,collected,exited,migrated\n",
        )?;
        Ok(w)
    }

    fn put(&mut self, f: impl Fn(&mut Self) -> &mut BufWriter<File>, s: &str) -> Result<()> {
        let dir = self.dir.clone();
        f(self)
            .write_all(s.as_bytes())
            .map_err(|e| Error::io(dir, e))
    }

    pub fn ddm(&mut self, step: usize, rep: &DdmReport) -> Result<()> {
        let line = format!(
            "{step},{:.6e},{},{},{},{}\n",
            rep.max_pcg_residual(),
            rep.max_pcg_iterations(),
            rep.iteration_count(),
            fmt_opt(rep.final_e_rel()),
            rep.converged as u8
        );
        self.put(|w| &mut w.convergence, &line)?;
        let mut s = String::new();
        for it in &rep.iterations {
            let _ = writeln!(
                s,
                "{step},{},{:.6e},{},{}",
                it.iteration,
                it.max_pcg_residual,
                it.max_pcg_iterations,
                fmt_opt(it.max_e_rel)
            );
        }
        self.put(|w| &mut w.ddm, &s)
    }

    pub fn particles(&mut self, step: usize, counts: &[usize]) -> Result<()> {
        let mut s = step.to_string();
        for c in counts {
            let _ = write!(s, ",{c}");
        }
        let _ = writeln!(s, ",{}", counts.iter().sum::<usize>());
        self.put(|w| &mut w.particles, &s)
    }

    pub fn charge(&mut self, step: usize, r: &ChargeRow) -> Result<()> {
        let s = format!(
            "{step},{:.12e},{:.12e},{:.12e},{:.3e},{:.3e},{},{},{},{},{}\n",
            r.particle_charge,
            r.surface_charge,
            r.expected_charge,
            r.bookkeeping_error,
            r.scatter_error,
            r.injected,
            r.emitted,
            r.collected,
            r.exited,
            r.migrated
        );
        self.put(|w| &mut w.charge, &s)
    }

    pub fn flush(&mut self) -> Result<()> {
        let dir = self.dir.clone();
        for f in [
            &mut self.convergence,
            &mut self.ddm,
            &mut self.particles,
            &mut self.charge,
        ] {
            f.flush().map_err(|e| Error::io(&dir, e))?;
        }
        Ok(())
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Legacy VTK structured-points text with one scalar array per node field.
pub fn structured_points_vtk(global: &GlobalMeshSpec, fields: &[(&str, &[f64])]) -> String {
    let n = global.nodes();
    let count = global.node_count();
    let mut s = String::with_capacity(count * 24 * fields.len().max(1) + 256);
    s.push_str(
        "# vtk DataFile Version 3.0\nifepic field snapshot\nASCII\nDATASET STRUCTURED_POINTS\n",
    );
    let _ = writeln!(s, "DIMENSIONS {} {} {}", n[0], n[1], n[2]);
    let _ = writeln!(
        s,
        "ORIGIN {} {} {}",
        global.lower[0], global.lower[1], global.lower[2]
    );
    let _ = writeln!(s, "SPACING {} {} {}", global.h, global.h, global.h);
    let _ = writeln!(s, "POINT_DATA {count}");
    for (name, v) in fields {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for x in v.iter() {
            let _ = writeln!(s, "{x:.9e}");
        }
    }
    s
}

/// Minimal structured-points reader: dimensions and named arrays.
pub fn read_structured_points(text: &str) -> Result<([usize; 3], Vec<(String, Vec<f64>)>)> {
    let bad = |m: &str| Error::Protocol(format!("VTK parse: {m}"));
    let mut lines = text.lines();
    let mut dims = None;
    let mut count = 0usize;
    let mut arrays = Vec::new();
    while let Some(line) = lines.next() {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("DIMENSIONS") => {
                let d: Vec<usize> = tok.filter_map(|t| t.parse().ok()).collect();
                if d.len() != 3 {
                    return Err(bad("DIMENSIONS needs three integers"));
                }
                dims = Some([d[0], d[1], d[2]]);
            }
            Some("POINT_DATA") => {
                count = tok
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| bad("POINT_DATA count"))?;
            }
            Some("SCALARS") => {
                let name = tok.next().ok_or_else(|| bad("SCALARS name"))?.to_string();
                if lines.next().map(str::trim) != Some("LOOKUP_TABLE default") {
                    return Err(bad("expected LOOKUP_TABLE"));
                }
                let mut v = Vec::with_capacity(count);
                for _ in 0..count {
                    let x = lines
                        .next()
                        .and_then(|l| l.trim().parse().ok())
                        .ok_or_else(|| bad("short scalar array"))?;
                    v.push(x);
                }
                arrays.push((name, v));
            }
            _ => {}
        }
    }
    let dims = dims.ok_or_else(|| bad("missing DIMENSIONS"))?;
    if dims.iter().product::<usize>() != count {
        return Err(bad("POINT_DATA does not match DIMENSIONS"));
    }
    Ok((dims, arrays))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vtk_round_trip() {
        let g = GlobalMeshSpec::from_extents([0.0; 3], [2.0, 2.5, 3.0], 0.5).unwrap();
        let phi: Vec<f64> = (0..g.node_count()).map(|i| i as f64 * 0.25 - 3.0).collect();
        let rho = vec![1.5; g.node_count()];
        let text = structured_points_vtk(&g, &[("potential", &phi), ("charge_density", &rho)]);
        let (dims, arrays) = read_structured_points(&text).unwrap();
        assert_eq!(dims, [5, 6, 7]);
        assert_eq!(arrays[0].0, "potential");
        assert_eq!(arrays[0].1, phi);
        assert_eq!(arrays[1].1, rho);
    }
}
