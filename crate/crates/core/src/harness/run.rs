use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::output::Snapshot;
use super::scenario::{DecompositionMode, ParticleInit, Scenario};
use super::trace::{StepRecord, WorkerRow};
use super::HarnessError;
use crate::balance::{
    apply_displacement, displacement, imbalance, normalized_md_time, weighting_factor, TimingSample, WeightSmoother,
};
use crate::cluster::{
    barrier_elapsed, deliver_metrics, exchange, simulate_step_cost, MeasuredCluster, Partition, StepTimings, StepWork,
    WorkerReport,
};
use crate::geometry::{
    rectangular_split, settle_initial_tessellation, voronoi_adjacency, ContactRadii, Contacts, Decomposition,
    GeometryError, MpId, Point2, RectGrid,
};
use crate::md::lattice::{particles_from, thermalize, triangular_bar, triangular_disk};
use crate::md::{
    compute_forces, kinetic_energy, renumber_particles, verlet_step, CellMesh, ForceOutput, Particle, Walls,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    /// Cost-model timings on a single thread; bit-reproducible.
    #[default]
    Virtual,
    /// One thread per worker, wall-clock and thread CPU timings.
    Measured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SettleInfo {
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub particles: Vec<Particle>,
    pub decomposition: Decomposition,
    pub owner: Vec<MpId>,
    pub trace: Vec<StepRecord>,
    pub snapshots: Vec<Snapshot>,
    /// `None` in `static_rect` mode, which does not settle.
    pub settle: Option<SettleInfo>,
    /// Number of raw `W` values that fell outside (0, 1] and were clamped.
    pub clamped_weights: usize,
}

/// Builds the scenario's initial particles. Velocities get a seeded
/// thermal component when the temperature is positive.
pub fn initial_particles(s: &Scenario) -> Result<Vec<Particle>, HarnessError> {
    let mut particles = match &s.init {
        ParticleInit::CrystalBar { cols, rows, spacing, origin } => {
            particles_from(&triangular_bar(*cols, *rows, *spacing, *origin), 0, Point2::ZERO, 0)
        }
        ParticleInit::TwoCylinders { spacing, cylinders } => {
            let mut all = Vec::new();
            for (k, c) in cylinders.iter().enumerate() {
                let pos = triangular_disk(Point2::new(c.center[0], c.center[1]), c.radius, *spacing);
                let vel = Point2::new(c.velocity[0], c.velocity[1]);
                let first = all.len();
                all.extend(particles_from(&pos, first, vel, k as u8));
            }
            all
        }
        ParticleInit::Custom { positions } => {
            positions.iter().enumerate().map(|(id, &(pos, vel))| Particle { id, pos, vel, species: 0 }).collect()
        }
    };
    if particles.is_empty() {
        return Err(HarnessError::Scenario("initial configuration holds no particles".into()));
    }
    if let Some(p) = particles.iter().find(|p| !s.bounds.contains(p.pos)) {
        return Err(HarnessError::Scenario(format!("particle {} starts outside the domain", p.id)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    thermalize(&mut particles, s.temperature, &mut rng);
    Ok(particles)
}

/// Steps 0 to 2: rectangular split, then settling (skipped for fixed
/// rectangles). A settle that hits its iteration cap continues from the
/// partial state.
pub fn initial_decomposition(
    s: &Scenario,
    particles: &[Particle],
) -> Result<(Decomposition, Option<SettleInfo>), HarnessError> {
    let grid = RectGrid::new(s.bounds, s.rect_grid[0], s.rect_grid[1]);
    let decomp = rectangular_split(&grid, particles);
    if s.mode == DecompositionMode::StaticRect {
        return Ok((decomp, None));
    }
    match settle_initial_tessellation(decomp, particles, s.settle_max_iters) {
        Ok((d, iterations)) => Ok((d, Some(SettleInfo { iterations, converged: true }))),
        Err(GeometryError::NoConvergence { iterations, partial }) => {
            Ok((*partial, Some(SettleInfo { iterations, converged: false })))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn run(s: &Scenario) -> Result<RunOutput, HarnessError> {
    run_with(s, ExecMode::Virtual)
}

/// Same pipeline with the centers frozen after settling.
pub fn run_baseline_static(s: &Scenario) -> Result<Vec<StepRecord>, HarnessError> {
    let mut frozen = s.clone();
    frozen.mode = DecompositionMode::VoronoiFrozen;
    frozen.snapshot_every = 0;
    Ok(run(&frozen)?.trace)
}

pub fn run_with(s: &Scenario, exec: ExecMode) -> Result<RunOutput, HarnessError> {
    s.validate()?;
    let mut particles = initial_particles(s)?;
    let (mut decomp, settle) = initial_decomposition(s, &particles)?;
    Driver::new(s, exec, &particles, &mut decomp)?.run(&mut particles, decomp, settle)
}

struct Driver<'a> {
    s: &'a Scenario,
    n_mp: usize,
    partition: Partition,
    radii: ContactRadii,
    walls: Walls,
    measured: Option<MeasuredCluster>,
    jitter_rng: ChaCha8Rng,
}

impl<'a> Driver<'a> {
    fn new(
        s: &'a Scenario,
        exec: ExecMode,
        particles: &[Particle],
        decomp: &mut Decomposition,
    ) -> Result<Self, HarnessError> {
        let n_mp = s.n_workers();
        let radii = ContactRadii::new(s.force_field.cutoff, s.skin);
        let owner = decomp.ownership(particles.len());
        let contacts = Contacts::scan(particles, &owner, n_mp, s.bounds, radii).graph;
        decomp.neighbors = contacts.union(&voronoi_adjacency(&decomp.centers(), s.bounds));
        let partition = match s.mode {
            DecompositionMode::StaticRect => Partition::Grid(RectGrid::new(s.bounds, s.rect_grid[0], s.rect_grid[1])),
            _ => Partition::Voronoi,
        };
        let measured = match exec {
            ExecMode::Virtual => None,
            ExecMode::Measured => Some(MeasuredCluster::spawn(n_mp, s.force_field)),
        };
        Ok(Driver {
            s,
            n_mp,
            partition,
            radii,
            walls: Walls::Reflective(s.bounds),
            measured,
            jitter_rng: ChaCha8Rng::seed_from_u64(s.seed ^ 0x9e37_79b9_7f4a_7c15),
        })
    }

    fn global_forces(&self, particles: &[Particle]) -> Result<ForceOutput, HarnessError> {
        let pos: Vec<Point2> = particles.iter().map(|p| p.pos).collect();
        let mesh = CellMesh::from_points(&pos, self.s.bounds, self.s.force_field.cutoff);
        Ok(compute_forces(particles, &self.s.force_field, &mesh)?)
    }

    fn run(
        mut self,
        particles: &mut [Particle],
        mut decomp: Decomposition,
        settle: Option<SettleInfo>,
    ) -> Result<RunOutput, HarnessError> {
        let s = self.s;
        let n = self.n_mp;
        let mut owner = decomp.ownership(particles.len());
        let mut pending = vec![0u32; particles.len()];
        let mut forces = self.global_forces(particles)?.forces;
        let mut smoother = WeightSmoother::new(n, s.balance.smoothing_alpha);
        let mut reports: Option<Vec<WorkerReport>> = None;
        let mut trace = Vec::with_capacity(s.n_steps as usize);
        let mut snapshots = Vec::new();
        let mut clamped_weights = 0;

        for step in 0..s.n_steps {
            let at = |e: HarnessError| HarnessError::AtStep { step, source: Box::new(e) };

            // metric and center exchange, then the center update
            let mut messages = Vec::new();
            if let Some(reports) = &reports {
                let (inbox, sent) = deliver_metrics(&decomp, reports);
                messages.extend(sent);
                if s.mode == DecompositionMode::Mpd3 {
                    let mut moves = Vec::with_capacity(n);
                    let mut view = vec![f64::NAN; n];
                    for i in 0..n {
                        view[i] = reports[i].w_smoothed;
                        for r in &inbox[i].metrics {
                            view[r.mp] = r.w_smoothed;
                        }
                        let d = displacement(i, &decomp, &view, &s.balance).map_err(|e| at(e.into()))?;
                        moves.push(s.constraint.apply(d));
                        view.iter_mut().for_each(|v| *v = f64::NAN);
                    }
                    decomp = apply_displacement(decomp, &moves);
                } else {
                    decomp.step += 1;
                }
            }

            // particle migration and halo rebuild
            let ex = exchange(&decomp, particles, &owner, &mut pending, &self.partition, self.radii)
                .map_err(|e| at(e.into()))?;
            owner = ex.owner;
            decomp.set_ownership(&owner);
            decomp.neighbors = ex.contacts.graph.union(&voronoi_adjacency(&decomp.centers(), s.bounds));
            decomp.refresh_linear_sizes(particles);
            messages.extend(ex.messages);
            let counts = decomp.counts();

            // MD step with timing
            let stolen: Vec<f64> = s.workers.iter().map(|w| w.stolen_fraction(step)).collect();
            let (potential, timings) = match self.measured.as_mut() {
                None => {
                    let pot = verlet_step(particles, &mut forces, &s.force_field, self.walls, |p| {
                        let pos: Vec<Point2> = p.iter().map(|q| q.pos).collect();
                        let mesh = CellMesh::from_points(&pos, s.bounds, s.force_field.cutoff);
                        compute_forces(p, &s.force_field, &mesh)
                    })
                    .map_err(|e| at(e.into()))?;
                    let costs: Vec<_> = (0..n)
                        .map(|i| {
                            let work = StepWork::from_messages(i, counts[i], ex.contacts.pair_counts[i], &messages);
                            let noise = if s.cost.jitter > 0.0 {
                                1.0 + s.cost.jitter * self.jitter_rng.random_range(-1.0..=1.0)
                            } else {
                                1.0
                            };
                            simulate_step_cost(&s.workers[i], &work, step, &s.cost, noise)
                        })
                        .collect();
                    (pot, barrier_elapsed(&costs))
                }
                Some(cluster) => {
                    let mut measured = None;
                    let mut failure = None;
                    let pot = verlet_step(particles, &mut forces, &s.force_field, self.walls, |p| {
                        match cluster.step(step, p, &owner, &ex.contacts.ghosts, &stolen) {
                            Ok(m) => {
                                let out = ForceOutput { forces: m.forces.clone(), potential: m.potential };
                                measured = Some(m);
                                Ok(out)
                            }
                            Err(crate::cluster::ClusterError::Md(e)) => Err(e),
                            Err(e) => {
                                failure = Some(e);
                                Ok(ForceOutput { forces: vec![Point2::ZERO; p.len()], potential: 0.0 })
                            }
                        }
                    })
                    .map_err(|e| at(e.into()))?;
                    if let Some(e) = failure {
                        return Err(at(e.into()));
                    }
                    (pot, measured.expect("force evaluation ran").timings)
                }
            };

            let (p_vals, w_vals, clamped) = metrics(&timings, &counts);
            clamped_weights += clamped;
            let smoothed = smoother.update(&w_vals);
            reports = Some(
                (0..n).map(|i| WorkerReport { mp: i, p: p_vals[i], w: w_vals[i], w_smoothed: smoothed[i] }).collect(),
            );

            let rows = (0..n)
                .map(|i| {
                    let t = &timings.samples[i];
                    WorkerRow {
                        n_particles: counts[i],
                        t_md: t.t_md,
                        t_emd: t.t_emd,
                        t_comm: timings.comm_elapsed[i],
                        t_wait: timings.waiting[i],
                        t_elapsed: t.t_elapsed,
                        p: p_vals[i],
                        w: w_vals[i],
                    }
                })
                .collect();
            trace.push(StepRecord {
                step,
                workers: rows,
                imbalance: imbalance(&w_vals),
                migrations: ex.migrations,
                energy: kinetic_energy(particles) + potential,
            });

            if s.renumber_every > 0 && (step + 1) % s.renumber_every == 0 {
                let pos: Vec<Point2> = particles.iter().map(|p| p.pos).collect();
                let mesh = CellMesh::from_points(&pos, s.bounds, s.force_field.cutoff);
                for mp in &mut decomp.mps {
                    mp.particle_ids = renumber_particles(mp, particles, &mesh).order;
                }
            }
            if s.snapshot_every > 0 && step % s.snapshot_every == 0 {
                snapshots.push(Snapshot { step, particles: particles.to_vec(), owner: owner.clone() });
            }
        }

        drop(self.measured.take());
        Ok(RunOutput {
            particles: particles.to_vec(),
            decomposition: decomp,
            owner,
            trace,
            snapshots,
            settle,
            clamped_weights,
        })
    }
}

/// `P` and `W` per worker. A worker with no MD work this step (an empty MP)
/// reports `P = 1` and the mean `W` of the others, so it neither pushes nor
/// pulls its neighbors.
fn metrics(timings: &StepTimings, counts: &[usize]) -> (Vec<f64>, Vec<f64>, usize) {
    let n = counts.len();
    let mut p = vec![1.0; n];
    let mut w: Vec<Option<f64>> = vec![None; n];
    let mut clamped = 0;
    for i in 0..n {
        let sample: &TimingSample = &timings.samples[i];
        if counts[i] == 0 {
            continue;
        }
        if let (Ok(pi), Ok(wi)) = (normalized_md_time(sample), weighting_factor(sample)) {
            p[i] = pi;
            w[i] = Some(wi.value);
            clamped += wi.clamped as usize;
        }
    }
    let known: Vec<f64> = w.iter().flatten().copied().collect();
    let mean = if known.is_empty() { 1.0 } else { known.iter().sum::<f64>() / known.len() as f64 };
    (p, w.into_iter().map(|x| x.unwrap_or(mean)).collect(), clamped)
}
