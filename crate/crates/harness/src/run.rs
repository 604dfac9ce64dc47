//! Planning and executing an experiment: one independent chain per
//! (grid point, chain index), merged in plan order.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use gibbs_core::analytic::critical_coupling;
use gibbs_core::lattice::{magnetization, write_snapshot, Lattice, LatticeConfig, LatticeSpec, Magnetization};
use gibbs_core::lattice_samplers::{LatticeChain, LatticeKernel};
use gibbs_core::observables::{local_orientation, TimeUnit};
use gibbs_core::particle_samplers::{
    ecmc_hard_disk_run, ecmc_smooth_run, hard_disk_metropolis_step, hmc_step, jaster_step, langevin_underdamped_step, EcmcState,
    IntegratorSpec, Kinetic, KineticKind, MdEvent, MdSystem, PhaseState,
};
use gibbs_core::particles::{lattice_start, total_energy, write_particle_snapshot, ParticleConfig, ParticleSpec, Potential};
use gibbs_core::rng::{chain_rng, seed_split, ChainRng};
use gibbs_core::torus::Torus;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ModelBlock, ModelKind, SamplerKind, Start, SweepParameter};
use crate::manifest::Manifest;

/// One chain of the plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannedChain {
    pub run: u32,
    pub chain: u32,
    pub parameter: SweepParameter,
    pub value: f64,
    pub seed: u64,
}

impl PlannedChain {
    pub fn stem(&self) -> String {
        format!("run{:04}_chain{:04}", self.run, self.chain)
    }
}

pub fn plan(config: &ExperimentConfig) -> Vec<PlannedChain> {
    let (parameter, values) = config.grid();
    let mut out = Vec::with_capacity(values.len() * config.schedule.chains);
    for (r, &value) in values.iter().enumerate() {
        for c in 0..config.schedule.chains {
            let (run, chain) = (r as u32, c as u32);
            out.push(PlannedChain { run, chain, parameter, value, seed: seed_split(config.schedule.master_seed, run, chain) });
        }
    }
    out
}

/// Skeleton of one chain, plus whatever else it was asked to keep.
#[derive(Debug, Clone, Default)]
pub struct ChainOutput {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
    pub snapshots: Vec<String>,
    pub events: Vec<MdEvent>,
    /// Raw sampler steps taken, burn-in included.
    pub steps: u64,
    pub error: Option<String>,
}

pub fn time_unit(kind: SamplerKind) -> TimeUnit {
    match kind {
        SamplerKind::Metropolis | SamplerKind::Glauber | SamplerKind::Jaster => TimeUnit::MetropolisSweep,
        SamplerKind::SwendsenWang | SamplerKind::Wolff => TimeUnit::WolffStep,
        SamplerKind::EcmcXy | SamplerKind::Ecmc => TimeUnit::EcmcEventTime,
        SamplerKind::Md | SamplerKind::Hmc | SamplerKind::Langevin => TimeUnit::MdTime,
    }
}

pub fn lattice_spec(m: &ModelBlock) -> gibbs_core::Result<LatticeSpec> {
    let model = m.lattice_model().expect("lattice model");
    LatticeSpec::new(m.dims.clone(), model, m.coupling, m.field, m.field_xy, m.beta)
}

pub fn particle_spec(m: &ModelBlock) -> gibbs_core::Result<ParticleSpec> {
    match m.kind {
        ModelKind::HardDisks => {
            let mut spec = ParticleSpec::hard_disks(m.n, m.eta, m.sigma)?;
            spec.beta = m.beta;
            spec.masses = vec![m.mass; m.n];
            spec.validate()?;
            Ok(spec)
        }
        _ => {
            let potential = Potential::LennardJones { sigma: m.sigma, eps: m.eps, cutoff: m.cutoff };
            ParticleSpec::with_masses(Torus::cubic(2, m.side)?, m.n, potential, m.beta, vec![m.mass; m.n])
        }
    }
}

/// Whether an `auto` lattice start is ordered: above the square-lattice transition coupling.
fn starts_ordered(m: &ModelBlock) -> bool {
    match m.start {
        Start::Ordered => true,
        Start::Disordered => false,
        Start::Auto => {
            let k = m.beta * m.coupling;
            match m.kind {
                ModelKind::Ising => k > critical_coupling(),
                ModelKind::Potts => k > (1.0 + (m.q as f64).sqrt()).ln(),
                _ => k > 1.12,
            }
        }
    }
}

pub fn run_chain(config: &ExperimentConfig, planned: &PlannedChain) -> ChainOutput {
    let model = config.model_at(planned.parameter, planned.value);
    let mut out = ChainOutput::default();
    let result = if model.kind.is_lattice() {
        lattice_chain(config, &model, planned.seed, &mut out)
    } else {
        particle_chain(config, &model, planned.seed, &mut out)
    };
    if let Err(e) = result {
        out.error = Some(e.to_string());
    }
    out
}

fn lattice_chain(config: &ExperimentConfig, model: &ModelBlock, seed: u64, out: &mut ChainOutput) -> Result<()> {
    let spec = lattice_spec(model)?;
    let lattice = Lattice::new(spec.clone())?;
    let n = spec.sites();
    let mut rng = chain_rng(seed);
    let start = if starts_ordered(model) { LatticeConfig::ordered(&spec) } else { LatticeConfig::random(&spec, &mut rng) };
    let s = &config.sampler;
    let interval = s.interval.unwrap_or(n as f64);
    let kernel = match s.kind {
        SamplerKind::Metropolis => LatticeKernel::Metropolis { scan: s.scan, xy_step: s.xy_step },
        SamplerKind::Glauber => LatticeKernel::Glauber { scan: s.scan },
        SamplerKind::SwendsenWang => LatticeKernel::SwendsenWang,
        SamplerKind::Wolff => LatticeKernel::Wolff,
        _ => LatticeKernel::EcmcXy { chain_length: s.chain_length.unwrap_or(std::f64::consts::TAU * n as f64), interval },
    };
    let mut chain = LatticeChain::new(lattice, start, kernel, rng)?;
    let xy = model.kind == ModelKind::Xy;
    let cluster = matches!(s.kind, SamplerKind::SwendsenWang | SamplerKind::Wolff);
    out.columns = vec!["time", "energy", "m"];
    if xy {
        out.columns.push("m_y");
    }
    if cluster {
        out.columns.push("cluster_size");
    }
    let stride = config.schedule.stride.unwrap_or(1);
    let per_step = if s.kind == SamplerKind::EcmcXy { interval } else { 1.0 };
    for k in 0..config.schedule.burn_in + config.schedule.samples {
        let mut last = None;
        for _ in 0..stride {
            last = chain.step()?.cluster_size;
            out.steps += 1;
        }
        if k < config.schedule.burn_in {
            continue;
        }
        let mut row = vec![out.steps as f64 * per_step, chain.lattice.energy(&chain.config)?];
        match magnetization(&chain.config, &spec) {
            Magnetization::Scalar(m) => row.push(m),
            Magnetization::Vector([mx, my]) => row.extend([mx, my]),
        }
        if cluster {
            row.push(last.unwrap_or(0) as f64);
        }
        out.rows.push(row);
        if config.output.snapshots {
            out.snapshots.push(write_snapshot(&chain.config, &spec)?);
        }
    }
    Ok(())
}

/// Mean `|psi_6|` over particles that have neighbours.
fn psi6(config: &ParticleConfig, spec: &ParticleSpec) -> Result<f64> {
    let local = local_orientation(config, spec)?;
    let vals: Vec<f64> = local.iter().flatten().map(|z| z.norm()).collect();
    Ok(if vals.is_empty() { f64::NAN } else { vals.iter().sum::<f64>() / vals.len() as f64 })
}

/// Metropolis pre-moves that break the symmetry of a lattice start, so
/// event-driven samplers never see exactly simultaneous contacts.
fn shake(spec: &ParticleSpec, config: &mut ParticleConfig, rng: &mut ChainRng) -> Result<()> {
    if matches!(spec.potential, Potential::HardDisk { .. }) {
        let sigma = spec.potential.sigma().unwrap_or(1.0);
        for _ in 0..20 * spec.n {
            hard_disk_metropolis_step(spec, config, 0.3 * sigma, rng)?;
        }
    } else {
        let sides = spec.torus.sides().to_vec();
        for (k, x) in config.flat_mut().iter_mut().enumerate() {
            *x += 1e-3 * (rand::Rng::random::<f64>(rng) - 0.5);
            *x = gibbs_core::torus::wrap_coord(*x, sides[k % sides.len()]);
        }
    }
    Ok(())
}

enum ParticleState {
    Moves(ParticleConfig),
    Md(Box<MdSystem>),
    Ecmc(ParticleConfig, EcmcState),
    Phase(PhaseState, Kinetic, IntegratorSpec),
}

fn particle_chain(config: &ExperimentConfig, model: &ModelBlock, seed: u64, out: &mut ChainOutput) -> Result<()> {
    let spec = particle_spec(model)?;
    let mut rng = chain_rng(seed);
    let mut start = lattice_start(&spec)?;
    let s = &config.sampler;
    if matches!(s.kind, SamplerKind::Md | SamplerKind::Ecmc) {
        shake(&spec, &mut start, &mut rng)?;
    }
    let interval = s.interval.unwrap_or(1.0);
    let mut state = match s.kind {
        SamplerKind::Metropolis | SamplerKind::Jaster => ParticleState::Moves(start),
        SamplerKind::Md => {
            let mut md = MdSystem::with_random_velocities(&spec, start, &mut rng)?;
            md.set_logging(config.output.event_log);
            ParticleState::Md(Box::new(md))
        }
        SamplerKind::Ecmc => {
            let direction = EcmcState::random_uniform(spec.n, spec.dim(), &mut rng);
            ParticleState::Ecmc(start, direction)
        }
        _ => {
            let kinetic = Kinetic::for_spec(&spec, KineticKind::Quadratic);
            let integrator = IntegratorSpec {
                step: s.step,
                steps: if s.kind == SamplerKind::Hmc { s.steps } else { 1 },
                friction: s.friction,
                xtra_chances: s.xtra_chances,
                ..IntegratorSpec::leapfrog(s.step, s.steps)
            };
            let phase = PhaseState::new(start.flat().to_vec(), vec![0.0; start.flat().len()])?;
            ParticleState::Phase(phase, kinetic, integrator)
        }
    };
    out.columns = vec!["time", "energy", "psi6"];
    let per_step = match s.kind {
        SamplerKind::Metropolis | SamplerKind::Jaster => 1.0 / spec.n as f64,
        SamplerKind::Hmc => s.step * s.steps as f64,
        SamplerKind::Langevin => s.step,
        _ => interval,
    };
    let default_stride = if matches!(s.kind, SamplerKind::Metropolis | SamplerKind::Jaster) { spec.n } else { 1 };
    let stride = config.schedule.stride.unwrap_or(default_stride);
    for k in 0..config.schedule.burn_in + config.schedule.samples {
        for _ in 0..stride {
            out.steps += 1;
            match &mut state {
                ParticleState::Moves(c) => {
                    if s.kind == SamplerKind::Jaster {
                        jaster_step(&spec, c, s.move_size, s.max_chain, &mut rng)?;
                    } else {
                        hard_disk_metropolis_step(&spec, c, s.move_size, &mut rng)?;
                    }
                }
                ParticleState::Md(md) => {
                    md.advance(out.steps as f64 * interval)?;
                }
                ParticleState::Ecmc(c, e) => {
                    if model.kind == ModelKind::HardDisks {
                        ecmc_hard_disk_run(&spec, c, e, interval, s.refresh, &mut rng)?;
                    } else {
                        ecmc_smooth_run(&spec, c, e, interval, s.refresh, &mut rng)?;
                    }
                }
                ParticleState::Phase(p, kinetic, integrator) => {
                    if s.kind == SamplerKind::Hmc {
                        hmc_step(&spec, kinetic, integrator, p, spec.beta, &mut rng)?;
                    } else {
                        langevin_underdamped_step(&spec, kinetic, integrator, p, spec.beta, &mut rng)?;
                    }
                }
            }
        }
        if let ParticleState::Md(md) = &mut state {
            let log = md.take_log();
            if k >= config.schedule.burn_in {
                out.events.extend(log);
            }
        }
        if k < config.schedule.burn_in {
            continue;
        }
        let current = match &state {
            ParticleState::Moves(c) | ParticleState::Ecmc(c, _) => c.clone(),
            ParticleState::Md(md) => md.config().clone(),
            ParticleState::Phase(p, _, _) => ParticleConfig::new(&spec.torus, p.x.clone())?,
        };
        let energy = total_energy(&current, &spec)?.finite().unwrap_or(f64::INFINITY);
        out.rows.push(vec![out.steps as f64 * per_step, energy, psi6(&current, &spec)?]);
        if config.output.snapshots {
            out.snapshots.push(write_particle_snapshot(&current, &spec)?);
        }
    }
    Ok(())
}

/// Worker count from `GIBBS_WORKERS`, or the machine's parallelism.
pub fn workers() -> usize {
    std::env::var("GIBBS_WORKERS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|&w| w > 0).unwrap_or_else(|| {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    })
}

/// Runs every planned chain on `workers` threads and returns outputs in plan order.
pub fn execute(config: &ExperimentConfig, workers: usize) -> Result<Vec<(PlannedChain, ChainOutput)>> {
    let planned = plan(config);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?;
    let outputs: Vec<ChainOutput> = pool.install(|| planned.par_iter().map(|p| run_chain(config, p)).collect());
    Ok(planned.into_iter().zip(outputs).collect())
}

pub fn series_path(p: &PlannedChain) -> String {
    format!("series/{}.csv", p.stem())
}

fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn write_series(path: &Path, out: &ChainOutput) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(&out.columns)?;
    for row in &out.rows {
        w.write_record(row.iter().map(|v| fmt_f64(*v)))?;
    }
    w.flush()?;
    Ok(())
}

fn write_events(path: &Path, events: &[MdEvent]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["time", "kind", "particles", "diagnostics"])?;
    for e in events {
        let particles = match e.particles {
            (i, Some(j)) => format!("{i} {j}"),
            (i, None) => i.to_string(),
        };
        w.write_record([fmt_f64(e.time), e.kind.token().to_string(), particles, fmt_f64(e.diagnostic)])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the experiment and writes series, snapshots, event logs and the manifest
/// into `dir`. Output bytes depend only on the configuration.
pub fn run_experiment(config: &ExperimentConfig, dir: &Path, workers: usize) -> Result<Manifest> {
    let results = execute(config, workers)?;
    fs::create_dir_all(dir.join("series"))?;
    if config.output.snapshots {
        fs::create_dir_all(dir.join("snapshots"))?;
    }
    if config.output.event_log {
        fs::create_dir_all(dir.join("events"))?;
    }
    let unit = time_unit(config.sampler.kind);
    let mut manifest = Manifest::for_config(config, unit);
    for (p, out) in &results {
        write_series(&dir.join(series_path(p)), out)?;
        for (k, snap) in out.snapshots.iter().enumerate() {
            fs::write(dir.join(format!("snapshots/{}_s{k:06}.txt", p.stem())), snap)?;
        }
        if config.output.event_log {
            write_events(&dir.join(format!("events/{}.csv", p.stem())), &out.events)?;
        }
        manifest.add_chain(p, out);
    }
    fs::write(dir.join("manifest.txt"), manifest.to_text())?;
    Ok(manifest)
}
