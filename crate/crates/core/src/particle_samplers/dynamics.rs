//! Hamiltonian and Langevin integrators on a [`SmoothPotential`].

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid_input, Error, Result};
use crate::particles::{ParticleSpec, SmoothPotential};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KineticKind {
    Quadratic,
    /// Zero below `p_min`, quadratic above `p_max`, quintic in `|p|` between.
    AdaptivelyRestrained { p_min: f64, p_max: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorSpec {
    pub step: f64,
    pub steps: usize,
    pub friction: f64,
    pub refresh_rate: f64,
    pub kinetic: KineticKind,
    pub xtra_chances: usize,
}

impl IntegratorSpec {
    pub fn leapfrog(step: f64, steps: usize) -> Self {
        Self { step, steps, friction: 0.0, refresh_rate: 0.0, kinetic: KineticKind::Quadratic, xtra_chances: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(invalid_input(format!("step must be positive, got {}", self.step)));
        }
        if self.steps == 0 {
            return Err(invalid_input("need at least one leapfrog step"));
        }
        if !(self.friction >= 0.0 && self.friction.is_finite()) || !(self.refresh_rate >= 0.0) {
            return Err(invalid_input("friction and refresh rate must be nonnegative"));
        }
        if let KineticKind::AdaptivelyRestrained { p_min, p_max } = self.kinetic {
            if !(p_min >= 0.0 && p_min < p_max && p_max.is_finite()) {
                return Err(invalid_input(format!("need 0 <= p_min < p_max, got {p_min}, {p_max}")));
            }
        }
        Ok(())
    }
}

/// Kinetic energy with per-coordinate masses. Adaptive restraint acts on
/// blocks of `block` coordinates (one particle), using the block's first mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Kinetic {
    pub kind: KineticKind,
    pub masses: Vec<f64>,
    pub block: usize,
}

impl Kinetic {
    pub fn new(kind: KineticKind, masses: Vec<f64>, block: usize) -> Result<Self> {
        if block == 0 || masses.len() % block != 0 || masses.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(invalid_input("masses must be positive and split into blocks"));
        }
        Ok(Self { kind, masses, block })
    }

    /// Unit masses, one coordinate per block.
    pub fn unit(dim: usize, kind: KineticKind) -> Self {
        Self { kind, masses: vec![1.0; dim], block: 1 }
    }

    pub fn for_spec(spec: &ParticleSpec, kind: KineticKind) -> Self {
        let d = spec.dim();
        let masses = spec.masses.iter().flat_map(|&m| std::iter::repeat_n(m, d)).collect();
        Self { kind, masses, block: d }
    }

    pub fn energy(&self, p: &[f64]) -> f64 {
        match self.kind {
            KineticKind::Quadratic => p.iter().zip(&self.masses).map(|(p, m)| 0.5 * p * p / m).sum(),
            KineticKind::AdaptivelyRestrained { p_min, p_max } => p
                .chunks(self.block)
                .zip(self.masses.chunks(self.block))
                .map(|(pb, mb)| {
                    let s = pb.iter().map(|x| x * x).sum::<f64>().sqrt();
                    restrained(s, mb[0], p_min, p_max).0
                })
                .sum(),
        }
    }

    pub fn gradient(&self, p: &[f64], out: &mut [f64]) {
        match self.kind {
            KineticKind::Quadratic => {
                for ((g, p), m) in out.iter_mut().zip(p).zip(&self.masses) {
                    *g = p / m;
                }
            }
            KineticKind::AdaptivelyRestrained { p_min, p_max } => {
                for ((gb, pb), mb) in out.chunks_mut(self.block).zip(p.chunks(self.block)).zip(self.masses.chunks(self.block)) {
                    let s = pb.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let ds = restrained(s, mb[0], p_min, p_max).1;
                    for (g, x) in gb.iter_mut().zip(pb) {
                        *g = if s > 0.0 { ds * x / s } else { 0.0 };
                    }
                }
            }
        }
    }
}

/// `(k(s), k'(s))` for the restrained single-particle kinetic energy.
fn restrained(s: f64, m: f64, p_min: f64, p_max: f64) -> (f64, f64) {
    if s <= p_min {
        return (0.0, 0.0);
    }
    if s >= p_max {
        return (0.5 * s * s / m, s / m);
    }
    // Quintic Hermite matching value, slope and curvature of both branches.
    let h = p_max - p_min;
    let t = (s - p_min) / h;
    let (t2, t3, t4, t5) = (t * t, t * t * t, t.powi(4), t.powi(5));
    let (f1, d1, a1) = (0.5 * p_max * p_max / m, p_max / m, 1.0 / m);
    let h5 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let h3 = 0.5 * (t3 - 2.0 * t4 + t5);
    let dh5 = 30.0 * t2 - 60.0 * t3 + 30.0 * t4;
    let dh4 = -12.0 * t2 + 28.0 * t3 - 15.0 * t4;
    let dh3 = 0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4);
    let k = f1 * h5 + h * d1 * h4 + h * h * a1 * h3;
    let dk = (f1 * dh5 + h * d1 * dh4 + h * h * a1 * dh3) / h;
    (k, dk)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub time: f64,
}

impl PhaseState {
    pub fn new(x: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if x.len() != p.len() {
            return Err(invalid_input("positions and momenta differ in length"));
        }
        Ok(Self { x, p, time: 0.0 })
    }

    pub fn hamiltonian<U: SmoothPotential + ?Sized>(&self, potential: &U, kinetic: &Kinetic) -> Result<f64> {
        Ok(potential.energy(&self.x)? + kinetic.energy(&self.p))
    }
}

fn finite_or_diverged(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence(format!("non-finite {what}")))
    }
}

fn check_dims<U: SmoothPotential + ?Sized>(potential: &U, kinetic: &Kinetic, state: &PhaseState) -> Result<()> {
    let d = potential.dim();
    if state.x.len() != d || state.p.len() != d || kinetic.masses.len() != d {
        return Err(invalid_input("state, masses and potential dimensions differ"));
    }
    Ok(())
}

/// Velocity Verlet: half kick, `steps` drift/kick rounds, the last kick halved.
pub fn leapfrog_trajectory<U: SmoothPotential + ?Sized>(
    potential: &U,
    kinetic: &Kinetic,
    state: &mut PhaseState,
    step: f64,
    steps: usize,
) -> Result<()> {
    check_dims(potential, kinetic, state)?;
    let d = state.x.len();
    let mut force = vec![0.0; d];
    let mut velocity = vec![0.0; d];
    potential.gradient(&state.x, &mut force)?;
    finite_or_diverged(&force, "force")?;
    for (p, g) in state.p.iter_mut().zip(&force) {
        *p -= 0.5 * step * g;
    }
    for k in 0..steps {
        kinetic.gradient(&state.p, &mut velocity);
        for (x, v) in state.x.iter_mut().zip(&velocity) {
            *x += step * v;
        }
        finite_or_diverged(&state.x, "position")?;
        potential.wrap(&mut state.x);
        potential.gradient(&state.x, &mut force)?;
        finite_or_diverged(&force, "force")?;
        let kick = if k + 1 == steps { 0.5 * step } else { step };
        for (p, g) in state.p.iter_mut().zip(&force) {
            *p -= kick * g;
        }
    }
    state.time += step * steps as f64;
    Ok(())
}

/// Exact Ornstein-Uhlenbeck transition of one momentum coordinate.
pub fn ou_exact_update<R: Rng + ?Sized>(p: f64, mass: f64, friction: f64, beta: f64, t: f64, rng: &mut R) -> f64 {
    let decay = (-friction * t / mass).exp();
    let var = mass / beta * (-(-2.0 * friction * t / mass).exp_m1());
    let xi: f64 = rng.sample(StandardNormal);
    p * decay + var.sqrt() * xi
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HmcOutcome {
    /// Index (0-based) of the accepted trajectory, if any.
    pub accepted: Option<usize>,
    pub divergence: bool,
    /// Energy change of the last trajectory examined.
    pub delta_h: f64,
    pub trajectories: usize,
}

/// Hybrid Monte Carlo with up to `xtra_chances` continuations sharing one uniform.
pub fn hmc_step<U: SmoothPotential + ?Sized, R: Rng + ?Sized>(
    potential: &U,
    kinetic: &Kinetic,
    integrator: &IntegratorSpec,
    state: &mut PhaseState,
    beta: f64,
    rng: &mut R,
) -> Result<HmcOutcome> {
    integrator.validate()?;
    if kinetic.kind != KineticKind::Quadratic {
        return Err(Error::Unsupported("momentum refresh needs the quadratic kinetic energy".into()));
    }
    check_dims(potential, kinetic, state)?;
    for (p, m) in state.p.iter_mut().zip(&kinetic.masses) {
        let xi: f64 = rng.sample(StandardNormal);
        *p = (m / beta).sqrt() * xi;
    }
    let h0 = state.hamiltonian(potential, kinetic)?;
    let u: f64 = rng.random();
    let mut trial = state.clone();
    let mut outcome = HmcOutcome { accepted: None, divergence: false, delta_h: f64::NAN, trajectories: 0 };
    for chance in 0..=integrator.xtra_chances {
        outcome.trajectories += 1;
        let h = leapfrog_trajectory(potential, kinetic, &mut trial, integrator.step, integrator.steps)
            .and_then(|_| trial.hamiltonian(potential, kinetic));
        match h {
            Ok(h) if h.is_finite() => {
                outcome.delta_h = h - h0;
                if u < (-beta * (h - h0)).exp() {
                    outcome.accepted = Some(chance);
                    *state = trial;
                    return Ok(outcome);
                }
            }
            Ok(_) | Err(Error::Divergence(_)) => {
                outcome.divergence = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    for p in state.p.iter_mut() {
        *p = -*p;
    }
    Ok(outcome)
}

/// One velocity-Verlet step followed by the friction/noise update of the momenta.
///
/// The noise step is the exact Ornstein-Uhlenbeck solution for the quadratic
/// kinetic energy and an Euler-Maruyama step otherwise.
pub fn langevin_underdamped_step<U: SmoothPotential + ?Sized, R: Rng + ?Sized>(
    potential: &U,
    kinetic: &Kinetic,
    integrator: &IntegratorSpec,
    state: &mut PhaseState,
    beta: f64,
    rng: &mut R,
) -> Result<()> {
    integrator.validate()?;
    let eps = integrator.step;
    let gamma = integrator.friction;
    leapfrog_trajectory(potential, kinetic, state, eps, 1)?;
    match kinetic.kind {
        KineticKind::Quadratic => {
            for (p, m) in state.p.iter_mut().zip(&kinetic.masses) {
                *p = ou_exact_update(*p, *m, gamma, beta, eps, rng);
            }
        }
        KineticKind::AdaptivelyRestrained { .. } => {
            let mut grad = vec![0.0; state.p.len()];
            kinetic.gradient(&state.p, &mut grad);
            let noise = (2.0 * gamma * eps / beta).sqrt();
            for (p, g) in state.p.iter_mut().zip(&grad) {
                let xi: f64 = rng.sample(StandardNormal);
                *p += -gamma * g * eps + noise * xi;
            }
        }
    }
    finite_or_diverged(&state.p, "momentum")
}

/// Euler-Maruyama step of Brownian dynamics: `x - (eps^2/2) grad U + eps N(0, 1/beta)`.
pub fn langevin_overdamped_step<U: SmoothPotential + ?Sized, R: Rng + ?Sized>(
    potential: &U,
    x: &mut [f64],
    step: f64,
    beta: f64,
    rng: &mut R,
) -> Result<()> {
    if !(step > 0.0) {
        return Err(invalid_input("step must be positive"));
    }
    if x.len() != potential.dim() {
        return Err(invalid_input("state and potential dimensions differ"));
    }
    let mut grad = vec![0.0; x.len()];
    potential.gradient(x, &mut grad)?;
    finite_or_diverged(&grad, "force")?;
    let sd = step / beta.sqrt();
    for (xi, g) in x.iter_mut().zip(&grad) {
        let z: f64 = rng.sample(StandardNormal);
        *xi += -0.5 * step * step * g + sd * z;
    }
    potential.wrap(x);
    Ok(())
}
