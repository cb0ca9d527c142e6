use std::time::{Duration, Instant};

use super::HaloPlan;
use crate::error::{Error, Result};
use crate::exec::{route, Executor};
use crate::ife::AssembledSystem;
use crate::solver::{pcg_solve_with, PcgConfig, Preconditioner, SolveReport};

/// Relative change of a nodal vector with uniform nodal weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelativeError {
    pub value: f64,
    /// `true` when `‖φ_old‖ = 0` and `value` is the absolute norm of `φ_new`.
    pub absolute: bool,
}

pub fn compute_e_rel(phi_new: &[f64], phi_old: &[f64]) -> RelativeError {
    assert_eq!(
        phi_new.len(),
        phi_old.len(),
        "e_rel needs equal-length vectors"
    );
    let (mut diff, mut old, mut new) = (0.0, 0.0, 0.0);
    for (a, b) in phi_new.iter().zip(phi_old) {
        diff += (a - b) * (a - b);
        old += b * b;
        new += a * a;
    }
    if old == 0.0 {
        RelativeError {
            value: new.sqrt(),
            absolute: true,
        }
    } else {
        RelativeError {
            value: (diff / old).sqrt(),
            absolute: false,
        }
    }
}

/// Aborts when the max error has grown by more than 10× across the last 5
/// iterations while increasing at every one of them.
pub const DIVERGENCE_WINDOW: usize = 5;
pub const DIVERGENCE_FACTOR: f64 = 10.0;

pub fn check_divergence(history: &[f64]) -> Result<()> {
    let n = history.len();
    if n <= DIVERGENCE_WINDOW {
        return Ok(());
    }
    let w = &history[n - 1 - DIVERGENCE_WINDOW..];
    let rising = w.windows(2).all(|p| p[1] > p[0]);
    if rising && w[DIVERGENCE_WINDOW] > DIVERGENCE_FACTOR * w[0] {
        return Err(Error::Divergence {
            iteration: n,
            e_rel: w[DIVERGENCE_WINDOW],
        });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchwarzConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
}

/// Field-solve state held by one rank.
#[derive(Clone, Debug)]
pub struct FieldState {
    pub rank: usize,
    pub system: AssembledSystem,
    pub halo: HaloPlan,
    pub pcg: PcgConfig,
    precond: Preconditioner,
    /// Local nodal potential over the guarded mesh.
    pub phi: Vec<f64>,
    load: Vec<f64>,
    b: Vec<f64>,
    x: Vec<f64>,
    prev: Vec<f64>,
}

impl FieldState {
    pub fn new(
        rank: usize,
        system: AssembledSystem,
        halo: HaloPlan,
        pcg: PcgConfig,
    ) -> Result<Self> {
        let precond = Preconditioner::build(&system.a_ff, pcg.preconditioner)
            .map_err(|e| e.with_context(rank, 0))?;
        let n = system.kinds.len();
        let mut phi = vec![0.0; n];
        for (d, &node) in system.dirichlet_nodes.iter().enumerate() {
            phi[node] = system.dirichlet_values[d];
        }
        Ok(FieldState {
            rank,
            system,
            halo,
            pcg,
            precond,
            phi,
            load: Vec::new(),
            b: Vec::new(),
            x: Vec::new(),
            prev: Vec::new(),
        })
    }

    pub fn set_load(&mut self, rho: &[f64], sigma: &[f64]) {
        self.system.load(rho, sigma, &mut self.load);
    }

    /// Local solve against the current Dirichlet data, warm-started from the
    /// previous potential.
    pub fn solve(&mut self) -> Result<(SolveReport, RelativeError)> {
        self.prev.clone_from(&self.phi);
        self.b.clone_from(&self.load);
        self.b.resize(self.system.free_count(), 0.0);
        self.system.apply_dirichlet(&mut self.b);
        self.system.restrict(&self.phi, &mut self.x);
        let rep = pcg_solve_with(
            &self.system.a_ff,
            &self.precond,
            &self.b,
            &mut self.x,
            &self.pcg,
        )?;
        self.system.expand(&self.x, &mut self.phi);
        Ok((rep, compute_e_rel(&self.phi, &self.prev)))
    }

    pub fn pack_halo(&self) -> Vec<(usize, Vec<f64>)> {
        self.halo.pack(&self.phi)
    }

    pub fn apply_halo(&mut self, inbox: &[(usize, Vec<f64>)]) -> Result<()> {
        self.halo
            .apply(self.rank, inbox, &mut self.system.dirichlet_values)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DdmIteration {
    pub iteration: usize,
    pub max_pcg_residual: f64,
    pub max_pcg_iterations: usize,
    /// `None` on a single rank.
    pub max_e_rel: Option<f64>,
    pub absolute_fallback: bool,
}

#[derive(Clone, Debug, Default)]
pub struct DdmReport {
    pub converged: bool,
    pub iterations: Vec<DdmIteration>,
    pub solve_time: Duration,
    pub exchange_time: Duration,
}

impl DdmReport {
    pub fn iteration_count(&self) -> usize {
        self.iterations.len()
    }

    pub fn final_e_rel(&self) -> Option<f64> {
        self.iterations.last().and_then(|i| i.max_e_rel)
    }

    pub fn max_pcg_residual(&self) -> f64 {
        self.iterations
            .iter()
            .map(|i| i.max_pcg_residual)
            .fold(0.0, f64::max)
    }

    pub fn max_pcg_iterations(&self) -> usize {
        self.iterations
            .iter()
            .map(|i| i.max_pcg_iterations)
            .max()
            .unwrap_or(0)
    }
}

/// Additive overlapping Schwarz: all ranks solve concurrently against the
/// last exchanged guard data, then exchange, until the max relative change
/// over ranks is within tolerance.
pub fn schwarz_iterate<W>(
    workers: &mut [W],
    exec: &Executor,
    cfg: &SchwarzConfig,
) -> Result<DdmReport>
where
    W: AsMut<FieldState> + AsRef<FieldState> + Send,
{
    if cfg.max_iterations == 0 || !(cfg.tolerance > 0.0) {
        return Err(Error::Config(
            "DDM needs a positive tolerance and iteration cap".into(),
        ));
    }
    let ranks = workers.len();
    let mut report = DdmReport::default();
    let mut history = Vec::new();
    for it in 1..=cfg.max_iterations {
        let t0 = Instant::now();
        let results = exec.try_map(workers, |w| w.as_mut().solve())?;
        report.solve_time += t0.elapsed();

        let max_res = results.iter().map(|(r, _)| r.residual).fold(0.0, f64::max);
        let max_its = results.iter().map(|(r, _)| r.iterations).max().unwrap_or(0);
        if ranks == 1 {
            report.iterations.push(DdmIteration {
                iteration: it,
                max_pcg_residual: max_res,
                max_pcg_iterations: max_its,
                max_e_rel: None,
                absolute_fallback: false,
            });
            report.converged = true;
            return Ok(report);
        }

        let t1 = Instant::now();
        let mut msgs = Vec::new();
        for (r, w) in workers.iter().enumerate() {
            msgs.extend(w.as_ref().pack_halo().into_iter().map(|(q, v)| (r, q, v)));
        }
        let inbox = route(ranks, msgs)?;
        for (w, ib) in workers.iter_mut().zip(&inbox) {
            w.as_mut().apply_halo(ib)?;
        }
        report.exchange_time += t1.elapsed();

        let e = results.iter().map(|(_, e)| e.value).fold(0.0, f64::max);
        let absolute = results.iter().any(|(_, e)| e.absolute);
        report.iterations.push(DdmIteration {
            iteration: it,
            max_pcg_residual: max_res,
            max_pcg_iterations: max_its,
            max_e_rel: Some(e),
            absolute_fallback: absolute,
        });
        history.push(e);
        if e <= cfg.tolerance {
            report.converged = true;
            return Ok(report);
        }
        check_divergence(&history)?;
    }
    Ok(report)
}

impl AsRef<FieldState> for FieldState {
    fn as_ref(&self) -> &FieldState {
        self
    }
}

impl AsMut<FieldState> for FieldState {
    fn as_mut(&mut self) -> &mut FieldState {
        self
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use proptest::prelude::*;

    use super::*;
    use crate::ddm::{build_halo_plans, DecompTopology};
    use crate::ife::{BoundarySpec, FieldProblem, Permittivity};
    use crate::mesh::{GlobalMeshSpec, SubdomainMesh};

    #[test]
    fn e_rel_identities() {
        let a = [1.0, -2.0, 3.0];
        assert_eq!(compute_e_rel(&a, &a).value, 0.0);
        let b = a.map(|x| 1.01 * x);
        assert!((compute_e_rel(&b, &a).value - 0.01).abs() < 1e-15);
        let z = compute_e_rel(&[3.0, 4.0], &[0.0, 0.0]);
        assert_eq!((z.value, z.absolute), (5.0, true));
    }

    proptest! {
        #[test]
        fn e_rel_matches_brute_force(v in prop::collection::vec((-5.0f64..5.0, 0.1f64..5.0), 8)) {
            let new: Vec<f64> = v.iter().map(|p| p.0).collect();
            let old: Vec<f64> = v.iter().map(|p| p.1).collect();
            let num: f64 = (0..8).map(|i| (new[i] - old[i]).powi(2)).sum::<f64>().sqrt();
            let den: f64 = (0..8).map(|i| old[i].powi(2)).sum::<f64>().sqrt();
            prop_assert!((compute_e_rel(&new, &old).value - num / den).abs() <= 1e-14 * (num / den).max(1.0));
        }
    }

    #[test]
    fn divergence_guard_trips_only_on_sustained_growth() {
        assert!(check_divergence(&[1.0, 1.2, 1.4, 1.6, 1.8, 2.0]).is_ok());
        assert!(check_divergence(&[1e-3, 2e-3, 5e-3, 1e-2, 3e-2, 1e-1]).is_err());
        assert!(check_divergence(&[1e-3, 2e-3, 5e-4, 1e-2, 3e-2, 1e-1]).is_ok());
    }

    fn problem() -> FieldProblem {
        FieldProblem::new(
            Permittivity::uniform(1.0),
            BoundarySpec::all_dirichlet(Arc::new(|p| 0.1 * (p[0] + 2.0 * p[1] - p[2]))),
        )
        .unwrap()
    }

    fn run(
        dims: [usize; 3],
        n: usize,
        rho: &dyn Fn(&nalgebra::Vector3<f64>) -> f64,
        tol: f64,
    ) -> (Vec<f64>, DdmReport) {
        let g = GlobalMeshSpec::from_extents([0.0; 3], [n as f64; 3], 1.0).unwrap();
        let t = DecompTopology::build(dims, &g).unwrap();
        let prob = problem();
        let meshes: Vec<SubdomainMesh> = (0..t.ranks())
            .map(|r| t.build_mesh(r, None).unwrap())
            .collect();
        let systems: Vec<AssembledSystem> = meshes
            .iter()
            .map(|m| AssembledSystem::assemble(m, &prob).unwrap())
            .collect();
        let plans = build_halo_plans(
            &t,
            &meshes.iter().collect::<Vec<_>>(),
            &systems.iter().collect::<Vec<_>>(),
        )
        .unwrap();
        let pcg = PcgConfig::new(2000, 1e-12).unwrap();
        let mut states: Vec<FieldState> = systems
            .into_iter()
            .zip(plans)
            .enumerate()
            .map(|(r, (s, p))| FieldState::new(r, s, p, pcg).unwrap())
            .collect();
        for (st, m) in states.iter_mut().zip(&meshes) {
            let rho_n: Vec<f64> = (0..m.node_count())
                .map(|i| rho(&m.local_node_position(i)))
                .collect();
            st.set_load(&rho_n, &[]);
        }
        let rep = schwarz_iterate(
            &mut states,
            &Executor::Sequential,
            &SchwarzConfig {
                tolerance: tol,
                max_iterations: 500,
            },
        )
        .unwrap();
        let mut global = vec![f64::NAN; g.node_count()];
        for (st, m) in states.iter().zip(&meshes) {
            for i in 0..m.node_count() {
                let gi = m.global_node_ijk(i);
                if t.owner_of_node(gi) == st.rank {
                    global[g.node_id(gi)] = st.phi[i];
                }
            }
        }
        (global, rep)
    }

    #[test]
    fn single_rank_solves_once() {
        let (_, rep) = run([1, 1, 1], 8, &|_| 1.0, 1e-3);
        assert!(rep.converged);
        assert_eq!(rep.iteration_count(), 1);
        assert_eq!(rep.final_e_rel(), None);
    }

    #[test]
    fn linear_solution_is_exact_across_subdomains() {
        let (phi, rep) = run([2, 1, 1], 8, &|_| 0.0, 1e-10);
        assert!(rep.converged);
        let g = GlobalMeshSpec::from_extents([0.0; 3], [8.0; 3], 1.0).unwrap();
        for (id, v) in phi.iter().enumerate() {
            let p = g.node_position(g.node_ijk(id));
            assert!((v - 0.1 * (p[0] + 2.0 * p[1] - p[2])).abs() < 1e-9);
        }
    }

    #[test]
    fn decomposed_solution_matches_serial() {
        let rho =
            |p: &nalgebra::Vector3<f64>| (0.3 * p[0]).sin() * (0.2 * p[1]).cos() + 0.05 * p[2];
        let tol = 1e-6;
        let (serial, _) = run([1, 1, 1], 20, &rho, tol);
        let scale = serial.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for dims in [[2, 1, 1], [2, 2, 1], [2, 2, 2]] {
            let (p, rep) = run(dims, 20, &rho, tol);
            assert!(rep.converged, "{dims:?}");
            let err = p
                .iter()
                .zip(&serial)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(err <= 10.0 * tol * scale, "{dims:?}: {err}");
        }
    }
}
