use super::scenario::Setup;
use crate::ddm::{DecompTopology, FieldState};
use crate::error::Result;
use crate::geometry::Vec3;
use crate::ife::ElementFields;
use crate::mesh::SubdomainMesh;
use crate::particles::{
    apply_domain_boundaries, charge_to_density, collect_at_material, facet_charge_to_jump,
    gather_all, half_step_back, load_uniform, push_leapfrog, receive_immigrants, scatter,
    split_emigrants, BoundaryTally, Injector, MigrantBatch, ParticleBuffer, ParticleFace,
    PhotoEmitter, SourceTally, SurfaceChargeLedger,
};

/// Read-only data shared by all workers during a step.
pub struct StepContext<'a> {
    pub setup: &'a Setup,
    pub faces: &'a [ParticleFace; 6],
    pub dt: f64,
    pub seed: u64,
}

/// Per-rank counters for one step.
#[derive(Clone, Copy, Debug, Default)]
pub struct StepTally {
    pub boundary: BoundaryTally,
    pub injected: SourceTally,
    pub emitted: SourceTally,
    /// Surface charge removed from owned facets by emission.
    pub emitted_debit: f64,
    pub migrated: usize,
    /// Particles dropped for non-finite state.
    pub lost: usize,
    pub lost_charge: f64,
}

impl StepTally {
    pub fn merge(&mut self, o: &StepTally) {
        self.boundary.merge(&o.boundary);
        self.injected.merge(&o.injected);
        self.emitted.merge(&o.emitted);
        self.emitted_debit += o.emitted_debit;
        self.migrated += o.migrated;
        self.lost += o.lost;
        self.lost_charge += o.lost_charge;
    }
}

/// Per-rank diagnostics reduced by the driver.
#[derive(Clone, Debug, Default)]
pub struct WorkerDiagnostics {
    pub counts: Vec<usize>,
    pub particle_charge: f64,
    pub particle_abs_charge: f64,
    pub surface_charge: f64,
    pub surface_abs_charge: f64,
    /// Sum of the reduced nodal charge over owned nodes.
    pub node_charge: f64,
}

/// State of one subdomain, persistent across steps.
pub struct Worker {
    pub rank: usize,
    pub mesh: SubdomainMesh,
    pub field: FieldState,
    pub fields: ElementFields,
    pub buffers: Vec<ParticleBuffer>,
    pub ledger: SurfaceChargeLedger,
    /// Nodal charge over the guarded mesh.
    pub charge: Vec<f64>,
    pub rho: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Fixed source added to the particle density (manufactured runs).
    pub background_rho: Vec<f64>,
    pub background_sigma: f64,
    /// Local ids of nodes this rank owns globally.
    pub owned_nodes: Vec<usize>,
    pub tally: StepTally,
    injector: Injector,
    emitter: Option<PhotoEmitter>,
    e: Vec<Vec<Vec3>>,
    outbox: Vec<(usize, MigrantBatch)>,
}

impl AsRef<FieldState> for Worker {
    fn as_ref(&self) -> &FieldState {
        &self.field
    }
}

impl AsMut<FieldState> for Worker {
    fn as_mut(&mut self) -> &mut FieldState {
        &mut self.field
    }
}

impl Worker {
    pub fn new(
        mesh: SubdomainMesh,
        field: FieldState,
        topology: &DecompTopology,
        ctx: &StepContext,
    ) -> Result<Self> {
        let rank = field.rank;
        let setup = ctx.setup;
        let n = mesh.node_count();
        let owned_nodes = (0..n)
            .filter(|&i| topology.owner_of_node(mesh.global_node_ijk(i)) == rank)
            .collect();
        let injector = Injector::new(&mesh, ctx.faces, &setup.species, ctx.dt, ctx.seed);
        let emitter = match (setup.photo_species, &setup.sun) {
            (Some(p), Some(sun)) => Some(PhotoEmitter::new(
                &mesh,
                &setup.geometry,
                sun,
                &setup.species[p],
                p,
                ctx.dt,
                ctx.seed,
            )?),
            _ => None,
        };
        let (background_rho, background_sigma) = match &setup.manufactured {
            Some(ms) => (
                (0..n)
                    .map(|i| {
                        let p = mesh.local_node_position(i);
                        ms.rho([p.x, p.y, p.z])
                    })
                    .collect(),
                ms.surface_charge(),
            ),
            None => (vec![0.0; n], 0.0),
        };
        let ns = setup.species.len();
        Ok(Worker {
            rank,
            ledger: SurfaceChargeLedger::new(&mesh),
            charge: vec![0.0; n],
            rho: vec![0.0; n],
            sigma: Vec::new(),
            background_rho,
            background_sigma,
            owned_nodes,
            tally: StepTally::default(),
            injector,
            emitter,
            e: vec![Vec::new(); ns],
            outbox: Vec::new(),
            buffers: vec![ParticleBuffer::default(); ns],
            fields: ElementFields::default(),
            field,
            mesh,
        })
    }

    pub fn load(&mut self, ctx: &StepContext) -> Result<usize> {
        let mut n = 0;
        for (s, sp) in ctx.setup.species.iter().enumerate() {
            if sp.is_ambient() {
                n += load_uniform(
                    &self.mesh,
                    Some(&ctx.setup.geometry),
                    sp,
                    s,
                    ctx.seed,
                    &mut self.buffers[s],
                )?;
            }
        }
        Ok(n)
    }

    /// Element fields from the current potential, then per-particle `E`.
    pub fn gather(&mut self) -> Result<()> {
        self.field
            .system
            .element_fields(&self.mesh, &self.field.phi, &mut self.fields);
        for (buf, e) in self.buffers.iter().zip(&mut self.e) {
            gather_all(&self.mesh, &self.fields, buf, e)?;
        }
        Ok(())
    }

    pub fn half_step_back(&mut self, ctx: &StepContext) {
        for (s, sp) in ctx.setup.species.iter().enumerate() {
            half_step_back(sp, &mut self.buffers[s], &self.e[s], ctx.dt);
        }
    }

    /// Leapfrog push followed by the global-face conditions.
    pub fn push(&mut self, ctx: &StepContext) {
        self.tally = StepTally::default();
        for (s, sp) in ctx.setup.species.iter().enumerate() {
            let lost = push_leapfrog(sp, &mut self.buffers[s], &self.e[s], ctx.dt);
            self.tally.lost += lost;
            self.tally.lost_charge += lost as f64 * sp.macro_charge();
            apply_domain_boundaries(
                &self.mesh.global,
                ctx.faces,
                sp,
                &mut self.buffers[s],
                &mut self.tally.boundary,
            );
        }
    }

    pub fn collect(&mut self, ctx: &StepContext) -> Result<()> {
        for (s, sp) in ctx.setup.species.iter().enumerate() {
            collect_at_material(
                &self.mesh,
                &ctx.setup.geometry,
                sp,
                &mut self.buffers[s],
                ctx.dt,
                &mut self.ledger,
                &mut self.tally.boundary,
            )?;
        }
        Ok(())
    }

    pub fn emigrate(&mut self, topology: &DecompTopology) -> Result<()> {
        self.outbox = split_emigrants(self.rank, &self.mesh, topology, &mut self.buffers)?;
        self.tally.migrated = self.outbox.iter().map(|(_, b)| b.count()).sum();
        Ok(())
    }

    pub fn take_outbox(&mut self) -> Vec<(usize, MigrantBatch)> {
        std::mem::take(&mut self.outbox)
    }

    pub fn immigrate(&mut self, inbox: Vec<(usize, MigrantBatch)>) -> Result<()> {
        receive_immigrants(&self.mesh, &mut self.buffers, inbox)?;
        Ok(())
    }

    pub fn sources(&mut self, ctx: &StepContext, step: u64) -> Result<()> {
        let setup = ctx.setup;
        self.tally.injected = self.injector.inject(
            &self.mesh,
            Some(&setup.geometry),
            &setup.species,
            &mut self.buffers,
            ctx.seed,
            step,
            ctx.dt,
        )?;
        if let (Some(em), Some(p)) = (&mut self.emitter, setup.photo_species) {
            let (t, debit) = em.emit(
                &self.mesh,
                &setup.geometry,
                &setup.species[p],
                &mut self.buffers[p],
                &mut self.ledger,
                ctx.seed,
                step,
                ctx.dt,
            )?;
            self.tally.emitted = t;
            self.tally.emitted_debit = debit;
        }
        Ok(())
    }

    /// Local charge deposit, before the guard reduction.
    pub fn scatter(&mut self, ctx: &StepContext) -> Result<()> {
        self.charge.iter_mut().for_each(|q| *q = 0.0);
        for (s, sp) in ctx.setup.species.iter().enumerate() {
            scatter(&self.mesh, sp, &self.buffers[s], &mut self.charge)?;
        }
        Ok(())
    }

    /// Density and surface charge after the reductions, loaded into the
    /// field state.
    pub fn prepare_field(&mut self) {
        charge_to_density(&self.mesh, &self.charge, &mut self.rho);
        for (r, b) in self.rho.iter_mut().zip(&self.background_rho) {
            *r += b;
        }
        facet_charge_to_jump(&self.ledger, self.mesh.h(), &mut self.sigma);
        if self.background_sigma != 0.0 {
            self.sigma
                .iter_mut()
                .for_each(|s| *s += self.background_sigma);
        }
        self.field.set_load(&self.rho, &self.sigma);
    }

    pub fn diagnostics(&self, ctx: &StepContext) -> WorkerDiagnostics {
        let mut d = WorkerDiagnostics {
            counts: self.buffers.iter().map(|b| b.len()).collect(),
            ..Default::default()
        };
        for (buf, sp) in self.buffers.iter().zip(&ctx.setup.species) {
            let q = buf.len() as f64 * sp.macro_charge();
            d.particle_charge += q;
            d.particle_abs_charge += q.abs();
        }
        for (c, q) in self.ledger.charge.iter().enumerate() {
            if self.ledger.is_owned(c) {
                d.surface_charge += q;
                d.surface_abs_charge += q.abs();
            }
        }
        d.node_charge = self.owned_nodes.iter().map(|&i| self.charge[i]).sum();
        d
    }
}
