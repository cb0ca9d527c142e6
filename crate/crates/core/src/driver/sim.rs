use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use super::config::{GeometryConfig, Scenario, SimulationConfig};
use super::output::{
    structured_points_vtk, write_text, ChargeRow, HistoryWriter, MANUFACTURED_CSV,
    ORACLE_PROFILE_CSV, PROFILE_CSV, SUMMARY_TXT, SURFACE_CSV, TIMERS_CSV, TIMERS_TXT,
};
use super::scenario::Setup;
use super::timers::{timed, StageTimers, TimerReport};
use super::worker::{StepContext, StepTally, Worker, WorkerDiagnostics};
use crate::ddm::{
    build_charge_plans, build_halo_plans, reduce_guard_charge, schwarz_iterate, ChargePlan,
    DdmReport, FieldState, SchwarzConfig,
};
use crate::error::Result;
use crate::exec::{route, Executor};
use crate::geometry::{RayMarch, Vec3};
use crate::ife::AssembledSystem;
use crate::mesh::SubdomainMesh;
use crate::oracle::{oml_sheath_profile, OmlParameters, OmlProfile};

/// Discrete field error of a manufactured run over all mesh nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldError {
    pub h: f64,
    /// `√(Σ e² h³)`.
    pub l2: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProfileBin {
    pub r: f64,
    pub phi: f64,
    pub oracle: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProfileResult {
    pub bins: Vec<ProfileBin>,
    /// RMS of `phi − oracle` over bins with `r` in `[R_s, rms_outer]`.
    pub rms: f64,
    pub averaged_steps: usize,
    pub surface_potential_oracle: f64,
}

/// Area-weighted mean surface potential in the two crater regions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceResult {
    pub sunlit_mean: f64,
    pub sunlit_facets: usize,
    pub shadow_mean: f64,
    pub shadow_facets: usize,
    pub averaged_steps: usize,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub steps: usize,
    pub ranks: usize,
    pub threads: usize,
    pub final_counts: Vec<usize>,
    /// Totals after every step, including step 0.
    pub total_history: Vec<usize>,
    pub max_bookkeeping_error: f64,
    pub max_scatter_error: f64,
    pub initial_ddm_iterations: usize,
    pub ddm_unconverged_steps: usize,
    pub profile: Option<ProfileResult>,
    pub surface: Option<SurfaceResult>,
    pub manufactured: Option<FieldError>,
    pub timers: TimerReport,
    pub warnings: Vec<String>,
}

/// Relative change of the mean particle total between the first and last
/// tenth of the trailing `window` steps.
pub fn plateau_drift(totals: &[usize], window: usize) -> Option<f64> {
    let w = window.min(totals.len());
    if w < 10 {
        return None;
    }
    let tail = &totals[totals.len() - w..];
    let k = w / 10;
    let mean = |s: &[usize]| s.iter().map(|&x| x as f64).sum::<f64>() / s.len() as f64;
    let (a, b) = (mean(&tail[..k]), mean(&tail[w - k..]));
    (a > 0.0).then(|| (b - a).abs() / a)
}

struct RadialProfile {
    oracle: OmlProfile,
    r_s: f64,
    bin: f64,
    rms_outer: f64,
    /// Per rank: `(local node, bin, radius)` for owned nodes.
    nodes: Vec<Vec<(usize, usize, f64)>>,
    phi_sum: Vec<f64>,
    r_sum: Vec<f64>,
    samples: Vec<usize>,
    steps: usize,
}

struct SurfaceFacet {
    cut: usize,
    nodes: [usize; 4],
    weights: [f64; 4],
    area: f64,
    centroid: Vec3,
    sunlight: f64,
    /// 1 sunlit crater, 2 shadowed floor, 0 elsewhere.
    region: u8,
    phi_sum: f64,
}

struct SurfaceProbe {
    facets: Vec<Vec<SurfaceFacet>>,
    steps: usize,
}

pub struct Simulation {
    pub config: SimulationConfig,
    pub setup: Setup,
    exec: Executor,
    workers: Vec<Worker>,
    charge_plans: Vec<ChargePlan>,
    history: HistoryWriter,
    timers: StageTimers,
    started: Instant,
    step: usize,
    expected_charge: f64,
    totals: Vec<usize>,
    final_counts: Vec<usize>,
    max_bookkeeping_error: f64,
    max_scatter_error: f64,
    initial_ddm_iterations: usize,
    ddm_unconverged_steps: usize,
    profile: Option<RadialProfile>,
    surface: Option<SurfaceProbe>,
    manufactured: Option<FieldError>,
    warnings: Vec<String>,
}

fn barycentric(v: &[Vec3; 4], p: &Vec3) -> [f64; 4] {
    let m = nalgebra::Matrix3::from_columns(&[v[1] - v[0], v[2] - v[0], v[3] - v[0]]);
    match m.try_inverse() {
        Some(inv) => {
            let l = inv * (p - v[0]);
            [1.0 - l.x - l.y - l.z, l.x, l.y, l.z]
        }
        None => [0.25; 4],
    }
}

fn available_cores() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

impl Simulation {
    /// Build meshes, systems and workers, load particles and perform the
    /// initial field solve.
    pub fn new(config: SimulationConfig) -> Result<Self> {
        let started = Instant::now();
        let mut timers = StageTimers::default();
        let t_setup = Instant::now();
        let setup = Setup::build(&config)?;
        let ranks = setup.topology.ranks();
        let cores = available_cores();
        let threads = match config.decomposition.threads {
            0 => ranks.min(cores),
            t => t,
        };
        let mut warnings = Vec::new();
        if threads > cores {
            warnings.push(format!(
                "{threads} worker threads on {cores} cores: timings are oversubscribed"
            ));
        }
        let exec = Executor::new(threads)?;
        let names: Vec<String> = setup
            .species
            .iter()
            .map(|s| s.config.name.clone())
            .collect();
        let history = HistoryWriter::create(&config.output.directory, &names)?;

        let mut ids: Vec<usize> = (0..ranks).collect();
        let built = exec.try_map(&mut ids, |r| {
            let mesh = setup.topology.build_mesh(*r, Some(&setup.geometry))?;
            let system = AssembledSystem::assemble(&mesh, &setup.problem)?;
            Ok((mesh, system))
        });
        let built = built.map_err(|e| e.with_context(0, 0))?;
        let (meshes, systems): (Vec<SubdomainMesh>, Vec<AssembledSystem>) =
            built.into_iter().unzip();
        let fallbacks: usize = systems.iter().map(|s| s.fallback_count).sum();
        if fallbacks > 0 {
            warnings.push(format!(
                "{fallbacks} interface elements fell back to averaged-ε P1 basis"
            ));
        }
        let mesh_refs: Vec<&SubdomainMesh> = meshes.iter().collect();
        let sys_refs: Vec<&AssembledSystem> = systems.iter().collect();
        let halos = build_halo_plans(&setup.topology, &mesh_refs, &sys_refs)?;
        let charge_plans = build_charge_plans(&setup.topology, &mesh_refs)?;

        let ctx = StepContext {
            setup: &setup,
            faces: &config.plasma.particle_faces,
            dt: config.time.dt_wpe,
            seed: config.seed,
        };
        let mut parts: Vec<Option<_>> = meshes
            .into_iter()
            .zip(systems)
            .zip(halos)
            .enumerate()
            .map(|(r, ((m, s), h))| Some((r, m, s, h)))
            .collect();
        let workers = exec.try_map(&mut parts, |p| {
            let (r, mesh, system, halo) = p.take().expect("taken once");
            let field = FieldState::new(r, system, halo, setup.pcg)?;
            Worker::new(mesh, field, &setup.topology, &ctx).map_err(|e| e.with_context(r, 0))
        })?;
        timers.other += t_setup.elapsed();

        let mut sim = Simulation {
            final_counts: vec![0; setup.species.len()],
            config,
            setup,
            exec,
            workers,
            charge_plans,
            history,
            timers,
            started,
            step: 0,
            expected_charge: 0.0,
            totals: Vec::new(),
            max_bookkeeping_error: 0.0,
            max_scatter_error: 0.0,
            initial_ddm_iterations: 0,
            ddm_unconverged_steps: 0,
            profile: None,
            surface: None,
            manufactured: None,
            warnings,
        };
        sim.initialize()?;
        Ok(sim)
    }

    fn ctx(&self) -> StepContext<'_> {
        StepContext {
            setup: &self.setup,
            faces: &self.config.plasma.particle_faces,
            dt: self.config.time.dt_wpe,
            seed: self.config.seed,
        }
    }

    fn initialize(&mut self) -> Result<()> {
        let t = Instant::now();
        {
            let ctx = StepContext {
                setup: &self.setup,
                faces: &self.config.plasma.particle_faces,
                dt: self.config.time.dt_wpe,
                seed: self.config.seed,
            };
            self.exec.try_map(&mut self.workers, |w| {
                w.load(&ctx).map_err(|e| e.with_context(w.rank, 0))
            })?;
        }
        self.build_probes()?;
        self.timers.other += t.elapsed();

        self.scatter_phase(0)?;
        let cap = self.config.field.ddm_initial_max_iterations;
        let rep = self.field_phase(0, cap)?;
        self.initial_ddm_iterations = rep.iteration_count();
        if !rep.converged {
            self.warnings.push(format!(
                "initial DDM solve stopped at the {cap}-iteration cap"
            ));
        }
        if let Some(ms) = self.setup.manufactured {
            self.manufactured = Some(self.field_error(|p| ms.phi([p.x, p.y, p.z])));
        }

        timed(&mut self.timers.gather, || -> Result<()> {
            self.exec.try_map(&mut self.workers, |w| {
                w.gather().map_err(|e| e.with_context(w.rank, 0))
            })?;
            Ok(())
        })?;
        let t = Instant::now();
        {
            let ctx = StepContext {
                setup: &self.setup,
                faces: &self.config.plasma.particle_faces,
                dt: self.config.time.dt_wpe,
                seed: self.config.seed,
            };
            self.exec.map(&mut self.workers, |w| w.half_step_back(&ctx));
        }
        self.timers.push += t.elapsed();

        let t = Instant::now();
        let (diag, _) = self.reduce_diagnostics();
        self.expected_charge = diag.particle_charge + diag.surface_charge;
        self.log_step(0, &rep, &diag, &StepTally::default())?;
        self.timers.other += t.elapsed();
        Ok(())
    }

    fn build_probes(&mut self) -> Result<()> {
        let out = &self.config.output;
        match (&self.config.scenario, &self.config.geometry) {
            (
                Scenario::OmlSphere,
                GeometryConfig::Sphere {
                    center_debye,
                    radius_debye,
                    ..
                },
            ) => {
                let tau = self.temperature_ratio();
                let mu = self.ion_mass_ratio();
                let oracle = oml_sheath_profile(&OmlParameters::new(
                    *radius_debye,
                    tau,
                    mu,
                    out.oracle_r_max_debye,
                ))?;
                let c = Vec3::from(*center_debye);
                let r_s = *radius_debye;
                let bin = out.profile_bin_debye;
                let nbins = ((out.oracle_r_max_debye - r_s) / bin).ceil().max(1.0) as usize;
                let nodes = self
                    .workers
                    .iter()
                    .map(|w| {
                        w.owned_nodes
                            .iter()
                            .filter_map(|&i| {
                                let r = (w.mesh.local_node_position(i) - c).norm();
                                let b = ((r - r_s) / bin).floor();
                                (r >= r_s && b < nbins as f64).then_some((i, b as usize, r))
                            })
                            .collect()
                    })
                    .collect();
                self.profile = Some(RadialProfile {
                    oracle,
                    r_s,
                    bin,
                    rms_outer: out.profile_rms_outer_debye,
                    nodes,
                    phi_sum: vec![0.0; nbins],
                    r_sum: vec![0.0; nbins],
                    samples: vec![0; nbins],
                    steps: 0,
                });
            }
            (
                Scenario::LunarCrater,
                GeometryConfig::Crater {
                    center_xy_debye,
                    inner_rim_radius_debye,
                    top_rim_radius_debye,
                    ..
                },
            ) => {
                let g = &self.setup.global;
                let march = RayMarch::for_mesh(g.lower, g.upper(), g.h);
                let min_area = crate::mesh::MIN_FACET_AREA * g.h * g.h;
                let mut facets = Vec::new();
                for w in &self.workers {
                    let mut list = Vec::new();
                    for (ci, cut) in w.mesh.cuts.iter().enumerate() {
                        if !w.ledger.is_owned(ci) || cut.facet_area < min_area {
                            continue;
                        }
                        let sunlight = match &self.setup.sun {
                            Some(sun) => {
                                let p = self.setup.geometry.project_to_surface(&cut.facet_centroid);
                                self.setup.geometry.sunlight_index(&p, sun, &march)?
                            }
                            None => 0.0,
                        };
                        let d = ((cut.facet_centroid.x - center_xy_debye[0]).powi(2)
                            + (cut.facet_centroid.y - center_xy_debye[1]).powi(2))
                        .sqrt();
                        let region = if sunlight > 0.0 && d <= *top_rim_radius_debye {
                            1
                        } else if sunlight == 0.0 && d <= *inner_rim_radius_debye {
                            2
                        } else {
                            0
                        };
                        let lc = cut.tet / crate::mesh::TETS_PER_CELL;
                        let t = cut.tet % crate::mesh::TETS_PER_CELL;
                        let nodes = w.mesh.tet_nodes(lc, t);
                        let weights = barycentric(&w.mesh.tet_vertices(lc, t), &cut.facet_centroid);
                        list.push(SurfaceFacet {
                            cut: ci,
                            nodes,
                            weights,
                            area: cut.facet_area,
                            centroid: cut.facet_centroid,
                            sunlight,
                            region,
                            phi_sum: 0.0,
                        });
                    }
                    facets.push(list);
                }
                self.surface = Some(SurfaceProbe { facets, steps: 0 });
            }
            _ => {}
        }
        Ok(())
    }

    fn temperature_ratio(&self) -> f64 {
        let sp = &self.setup.species;
        let e = sp.iter().find(|s| s.charge() < 0.0);
        let i = sp.iter().find(|s| s.charge() > 0.0);
        match (e, i) {
            (Some(e), Some(i)) => i.config.temperature_ev / e.config.temperature_ev,
            _ => 1.0,
        }
    }

    fn ion_mass_ratio(&self) -> f64 {
        let sp = &self.setup.species;
        let e = sp.iter().find(|s| s.charge() < 0.0);
        let i = sp.iter().find(|s| s.charge() > 0.0);
        match (e, i) {
            (Some(e), Some(i)) => i.config.mass_ratio / e.config.mass_ratio,
            _ => 1836.0,
        }
    }

    /// Local deposit, guard-charge reduction and surface-charge forwarding.
    fn scatter_phase(&mut self, step: usize) -> Result<()> {
        let t = Instant::now();
        {
            let ctx = StepContext {
                setup: &self.setup,
                faces: &self.config.plasma.particle_faces,
                dt: self.config.time.dt_wpe,
                seed: self.config.seed,
            };
            self.exec.try_map(&mut self.workers, |w| {
                w.scatter(&ctx).map_err(|e| e.with_context(w.rank, step))
            })?;
        }
        {
            let mut charges: Vec<&mut [f64]> = self
                .workers
                .iter_mut()
                .map(|w| w.charge.as_mut_slice())
                .collect();
            reduce_guard_charge(&self.charge_plans, &mut charges)?;
        }
        let ranks = self.workers.len();
        let mut msgs = Vec::new();
        for w in &mut self.workers {
            for (dst, items) in w.ledger.take_outgoing(&self.setup.topology, w.rank) {
                msgs.push((w.rank, dst, items));
            }
        }
        let inbox = route(ranks, msgs)?;
        for (w, ib) in self.workers.iter_mut().zip(inbox) {
            for (_, items) in ib {
                w.ledger
                    .apply_incoming(&items)
                    .map_err(|e| e.with_context(w.rank, step))?;
            }
        }
        self.timers.scatter += t.elapsed();
        Ok(())
    }

    fn field_phase(&mut self, step: usize, cap: usize) -> Result<DdmReport> {
        let t = Instant::now();
        self.exec.map(&mut self.workers, |w| w.prepare_field());
        let cfg = SchwarzConfig {
            tolerance: self.config.field.ddm_tolerance,
            max_iterations: cap,
        };
        let rep = schwarz_iterate(&mut self.workers, &self.exec, &cfg)
            .map_err(|e| e.with_context(0, step))?;
        self.timers.field_solve += t.elapsed();
        self.timers.phibc += rep.exchange_time;
        Ok(rep)
    }

    /// Advance one PIC step.
    pub fn step(&mut self) -> Result<()> {
        self.step += 1;
        let step = self.step;
        let ctx = StepContext {
            setup: &self.setup,
            faces: &self.config.plasma.particle_faces,
            dt: self.config.time.dt_wpe,
            seed: self.config.seed,
        };
        let exec = &self.exec;
        let workers = &mut self.workers;
        let timers = &mut self.timers;

        timed(&mut timers.gather, || {
            exec.try_map(workers, |w| {
                w.gather().map_err(|e| e.with_context(w.rank, step))
            })
        })?;

        let t_push = Instant::now();
        exec.map(workers, |w| w.push(&ctx));
        let t_other = Instant::now();
        exec.try_map(workers, |w| {
            w.collect(&ctx).map_err(|e| e.with_context(w.rank, step))
        })?;
        let collect_time = t_other.elapsed();
        timers.other += collect_time;

        let t_comm = Instant::now();
        exec.try_map(workers, |w| {
            w.emigrate(&self.setup.topology)
                .map_err(|e| e.with_context(w.rank, step))
        })?;
        let mut msgs = Vec::new();
        for w in workers.iter_mut() {
            let r = w.rank;
            msgs.extend(w.take_outbox().into_iter().map(|(d, b)| (r, d, b)));
        }
        let inbox = route(workers.len(), msgs)?;
        let mut inbox: Vec<Option<_>> = inbox.into_iter().map(Some).collect();
        let mut paired: Vec<(&mut Worker, &mut Option<_>)> =
            workers.iter_mut().zip(inbox.iter_mut()).collect();
        exec.try_map(&mut paired, |(w, ib)| {
            w.immigrate(ib.take().unwrap_or_default())
                .map_err(|e| e.with_context(w.rank, step))
        })?;
        timers.push_comm += t_comm.elapsed();
        timers.push += t_push.elapsed() - collect_time;

        timed(&mut timers.other, || {
            exec.try_map(workers, |w| {
                w.sources(&ctx, step as u64)
                    .map_err(|e| e.with_context(w.rank, step))
            })
        })?;

        self.scatter_phase(step)?;
        let rep = self.field_phase(step, self.config.field.ddm_max_iterations)?;
        if !rep.converged {
            self.ddm_unconverged_steps += 1;
        }

        let t = Instant::now();
        let (diag, tally) = self.reduce_diagnostics();
        self.expected_charge +=
            tally.injected.created_charge + tally.emitted.created_charge + tally.emitted_debit
                - tally.boundary.exited_charge
                - tally.lost_charge;
        self.log_step(step, &rep, &diag, &tally)?;
        self.accumulate_probes(step);
        let every = self.config.output.snapshot_every_steps;
        if every > 0 && step % every == 0 {
            self.write_snapshot(&format!("field_{step:06}.vtk"))?;
        }
        self.timers.other += t.elapsed();
        Ok(())
    }

    fn reduce_diagnostics(&self) -> (WorkerDiagnostics, StepTally) {
        let ctx = self.ctx();
        let mut d = WorkerDiagnostics {
            counts: vec![0; self.setup.species.len()],
            ..Default::default()
        };
        let mut t = StepTally::default();
        for w in &self.workers {
            let x = w.diagnostics(&ctx);
            for (a, b) in d.counts.iter_mut().zip(&x.counts) {
                *a += b;
            }
            d.particle_charge += x.particle_charge;
            d.particle_abs_charge += x.particle_abs_charge;
            d.surface_charge += x.surface_charge;
            d.surface_abs_charge += x.surface_abs_charge;
            d.node_charge += x.node_charge;
            t.merge(&w.tally);
        }
        (d, t)
    }

    fn log_step(
        &mut self,
        step: usize,
        rep: &DdmReport,
        d: &WorkerDiagnostics,
        t: &StepTally,
    ) -> Result<()> {
        let actual = d.particle_charge + d.surface_charge;
        let scale = (d.particle_abs_charge + d.surface_abs_charge).max(f64::MIN_POSITIVE);
        let bookkeeping = (actual - self.expected_charge).abs() / scale;
        let scatter = (d.node_charge - d.particle_charge).abs()
            / d.particle_abs_charge.max(f64::MIN_POSITIVE);
        self.max_bookkeeping_error = self.max_bookkeeping_error.max(bookkeeping);
        self.max_scatter_error = self.max_scatter_error.max(scatter);
        self.totals.push(d.counts.iter().sum());
        self.final_counts.clone_from(&d.counts);
        if step % self.config.output.history_every_steps == 0 {
            self.history.ddm(step, rep)?;
            self.history.particles(step, &d.counts)?;
            self.history.charge(
                step,
                &ChargeRow {
                    particle_charge: d.particle_charge,
                    surface_charge: d.surface_charge,
                    expected_charge: self.expected_charge,
                    bookkeeping_error: bookkeeping,
                    scatter_error: scatter,
                    injected: t.injected.created,
                    emitted: t.emitted.created,
                    collected: t.boundary.collected,
                    exited: t.boundary.exited,
                    migrated: t.migrated,
                },
            )?;
        }
        Ok(())
    }

    fn in_window(&self, step: usize) -> bool {
        step + self.config.output.profile_average_steps > self.config.time.steps
    }

    fn accumulate_probes(&mut self, step: usize) {
        if !self.in_window(step) {
            return;
        }
        if let Some(p) = &mut self.profile {
            for (w, nodes) in self.workers.iter().zip(&p.nodes) {
                for &(i, b, r) in nodes {
                    p.phi_sum[b] += w.field.phi[i];
                    p.r_sum[b] += r;
                    p.samples[b] += 1;
                }
            }
            p.steps += 1;
        }
        if let Some(s) = &mut self.surface {
            for (w, list) in self.workers.iter().zip(&mut s.facets) {
                for f in list {
                    let phi: f64 = (0..4).map(|k| f.weights[k] * w.field.phi[f.nodes[k]]).sum();
                    f.phi_sum += phi;
                }
            }
            s.steps += 1;
        }
    }

    pub fn current_step(&self) -> usize {
        self.step
    }

    pub fn workers(&self) -> &[Worker] {
        &self.workers
    }

    pub fn particle_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.setup.species.len()];
        for w in &self.workers {
            for (a, b) in c.iter_mut().zip(&w.buffers) {
                *a += b.len();
            }
        }
        c
    }

    /// Global nodal array assembled from each rank's owned nodes.
    pub fn global_nodal(&self, field: impl Fn(&Worker) -> &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.setup.global.node_count()];
        for w in &self.workers {
            let v = field(w);
            for &i in &w.owned_nodes {
                out[w.mesh.global_node_id(i)] = v[i];
            }
        }
        out
    }

    pub fn global_potential(&self) -> Vec<f64> {
        self.global_nodal(|w| &w.field.phi)
    }

    fn field_error(&self, exact: impl Fn(&Vec3) -> f64) -> FieldError {
        let h = self.setup.global.h;
        let (mut s, mut m) = (0.0, 0.0f64);
        for w in &self.workers {
            for &i in &w.owned_nodes {
                let e = w.field.phi[i] - exact(&w.mesh.local_node_position(i));
                s += e * e;
                m = m.max(e.abs());
            }
        }
        FieldError {
            h,
            l2: (s * h * h * h).sqrt(),
            max: m,
        }
    }

    fn write_snapshot(&self, name: &str) -> Result<()> {
        let phi = self.global_potential();
        let rho = self.global_nodal(|w| &w.rho);
        let text = structured_points_vtk(
            &self.setup.global,
            &[("potential", &phi), ("charge_density", &rho)],
        );
        write_text(&self.config.output.directory.join(name), &text)
    }

    fn profile_result(&self) -> Option<ProfileResult> {
        let p = self.profile.as_ref()?;
        let mut bins = Vec::new();
        for b in 0..p.samples.len() {
            if p.samples[b] == 0 {
                continue;
            }
            let n = p.samples[b] as f64;
            let r = p.r_sum[b] / n;
            bins.push(ProfileBin {
                r,
                phi: p.phi_sum[b] / n,
                oracle: p.oracle.potential_at(r),
                samples: p.samples[b],
            });
        }
        let sel: Vec<f64> = bins
            .iter()
            .filter(|b| b.r >= p.r_s && b.r <= p.rms_outer)
            .map(|b| (b.phi - b.oracle).powi(2))
            .collect();
        let rms = if sel.is_empty() {
            f64::NAN
        } else {
            (sel.iter().sum::<f64>() / sel.len() as f64).sqrt()
        };
        let _ = p.bin;
        Some(ProfileResult {
            bins,
            rms,
            averaged_steps: p.steps,
            surface_potential_oracle: p.oracle.surface_potential,
        })
    }

    fn surface_result(&self) -> Option<SurfaceResult> {
        let s = self.surface.as_ref()?;
        let n = s.steps.max(1) as f64;
        let mut acc = [(0.0, 0.0, 0usize); 3];
        for f in s.facets.iter().flatten() {
            let a = &mut acc[f.region as usize];
            a.0 += f.area * f.phi_sum / n;
            a.1 += f.area;
            a.2 += 1;
        }
        let mean = |a: (f64, f64, usize)| if a.1 > 0.0 { a.0 / a.1 } else { f64::NAN };
        Some(SurfaceResult {
            sunlit_mean: mean(acc[1]),
            sunlit_facets: acc[1].2,
            shadow_mean: mean(acc[2]),
            shadow_facets: acc[2].2,
            averaged_steps: s.steps,
        })
    }

    fn write_final_outputs(
        &self,
        profile: &Option<ProfileResult>,
        surface: &Option<SurfaceResult>,
    ) -> Result<()> {
        let dir = &self.config.output.directory;
        self.write_snapshot("field_final.vtk")?;
        if let (Some(pr), Some(p)) = (profile, &self.profile) {
            let mut s = String::from("r,phi,phi_oracle,samples\n");
            for b in &pr.bins {
                let _ = writeln!(
                    s,
                    "{:.6e},{:.6e},{:.6e},{}",
                    b.r, b.phi, b.oracle, b.samples
                );
            }
            write_text(&dir.join(PROFILE_CSV), &s)?;
            write_text(&dir.join(ORACLE_PROFILE_CSV), &p.oracle.to_csv())?;
        }
        if let Some(sp) = &self.surface {
            let n = sp.steps.max(1) as f64;
            let mut s = String::from("x,y,z,area,sunlight_index,potential,region\n");
            for f in sp.facets.iter().flatten() {
                let _ = writeln!(
                    s,
                    "{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{}",
                    f.centroid.x,
                    f.centroid.y,
                    f.centroid.z,
                    f.area,
                    f.sunlight,
                    f.phi_sum / n,
                    ["other", "sunlit-crater", "shadowed-floor"][f.region as usize]
                );
                let _ = f.cut;
            }
            write_text(&dir.join(SURFACE_CSV), &s)?;
        }
        let _ = surface;
        if let Some(e) = &self.manufactured {
            write_text(
                &dir.join(MANUFACTURED_CSV),
                &format!(
                    "h,l2_error,max_error\n{:.6e},{:.6e},{:.6e}\n",
                    e.h, e.l2, e.max
                ),
            )?;
        }
        Ok(())
    }

    /// Write final outputs and the timer report.
    pub fn finish(mut self) -> Result<RunSummary> {
        let t = Instant::now();
        let profile = self.profile_result();
        let surface = self.surface_result();
        self.write_final_outputs(&profile, &surface)?;
        self.history.flush()?;
        self.timers.other += t.elapsed();
        let total: Duration = self.started.elapsed();
        let report = TimerReport::new(&self.timers, total);
        let dir = self.config.output.directory.clone();
        write_text(&dir.join(TIMERS_CSV), &report.to_csv())?;
        write_text(&dir.join(TIMERS_TXT), &report.to_table())?;
        let summary = RunSummary {
            output_dir: dir.clone(),
            steps: self.step,
            ranks: self.workers.len(),
            threads: self.exec.threads(),
            final_counts: self.final_counts.clone(),
            total_history: self.totals.clone(),
            max_bookkeeping_error: self.max_bookkeeping_error,
            max_scatter_error: self.max_scatter_error,
            initial_ddm_iterations: self.initial_ddm_iterations,
            ddm_unconverged_steps: self.ddm_unconverged_steps,
            profile,
            surface,
            manufactured: self.manufactured,
            timers: report,
            warnings: self.warnings.clone(),
        };
        write_text(&dir.join(SUMMARY_TXT), &summary.to_text())?;
        Ok(summary)
    }
}

impl RunSummary {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "steps = {}", self.steps);
        let _ = writeln!(s, "ranks = {}", self.ranks);
        let _ = writeln!(s, "threads = {}", self.threads);
        let _ = writeln!(s, "final_counts = {:?}", self.final_counts);
        if let Some(d) = plateau_drift(&self.total_history, 1000) {
            let _ = writeln!(s, "plateau_drift_last_1000 = {d:.4e}");
        }
        let _ = writeln!(
            s,
            "max_bookkeeping_error = {:.3e}",
            self.max_bookkeeping_error
        );
        let _ = writeln!(s, "max_scatter_error = {:.3e}", self.max_scatter_error);
        let _ = writeln!(
            s,
            "initial_ddm_iterations = {}",
            self.initial_ddm_iterations
        );
        let _ = writeln!(s, "ddm_unconverged_steps = {}", self.ddm_unconverged_steps);
        if let Some(p) = &self.profile {
            let _ = writeln!(s, "profile_rms = {:.4e}", p.rms);
            let _ = writeln!(s, "profile_averaged_steps = {}", p.averaged_steps);
            let _ = writeln!(
                s,
                "oracle_surface_potential = {:.4}",
                p.surface_potential_oracle
            );
        }
        if let Some(c) = &self.surface {
            let _ = writeln!(s, "sunlit_crater_potential = {:.4}", c.sunlit_mean);
            let _ = writeln!(s, "sunlit_crater_facets = {}", c.sunlit_facets);
            let _ = writeln!(s, "shadowed_floor_potential = {:.4}", c.shadow_mean);
            let _ = writeln!(s, "shadowed_floor_facets = {}", c.shadow_facets);
        }
        if let Some(e) = &self.manufactured {
            let _ = writeln!(s, "manufactured_l2_error = {:.6e}", e.l2);
            let _ = writeln!(s, "manufactured_max_error = {:.6e}", e.max);
        }
        let _ = writeln!(s, "timer_coverage = {:.4}", self.timers.coverage());
        let _ = writeln!(s, "total_seconds = {:.3}", self.timers.total_seconds);
        for w in &self.warnings {
            let _ = writeln!(s, "warning = {w}");
        }
        s
    }
}

/// Run a configuration to completion.
pub fn run_simulation(config: SimulationConfig) -> Result<RunSummary> {
    let steps = config.time.steps;
    let mut sim = Simulation::new(config)?;
    for _ in 0..steps {
        sim.step()?;
    }
    sim.finish()
}
