//! Event chain Monte Carlo: one active particle moves at unit speed and hands
//! its velocity to the partner responsible for the next event.

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use super::{earliest_contact, hard_disk_sigma, image_horizon};
use crate::error::{invalid_input, invalid_state, Error, Result};
use crate::particles::{ParticleConfig, ParticleSpec, Potential};
use crate::torus::wrap_coord;

const SIMULTANEITY_TOL: f64 = 1e-12;
/// Pushes the active particle just past a cutoff crossing so the new side is unambiguous.
const CROSSING_NUDGE: f64 = 1e-10;

/// How the direction `u` of the active particle is renewed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Refresh {
    None,
    /// Cycle the axis of `u` after every `tau` of displacement.
    XyFixed(f64),
    /// Cycle the axis of `u` at the events of a Poisson clock.
    XyPoisson(f64),
    /// Redraw `u` uniformly on the unit sphere at Poisson events.
    Uniform(f64),
}

impl Refresh {
    fn validate(&self) -> Result<()> {
        match *self {
            Refresh::None => Ok(()),
            Refresh::XyFixed(x) | Refresh::XyPoisson(x) | Refresh::Uniform(x) if x > 0.0 && x.is_finite() => Ok(()),
            _ => Err(invalid_input("refresh parameter must be positive")),
        }
    }

    fn draw_clock<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Refresh::None => f64::INFINITY,
            Refresh::XyFixed(tau) => tau,
            Refresh::XyPoisson(rate) | Refresh::Uniform(rate) => Exp::new(rate).expect("positive rate").sample(rng),
        }
    }

    fn apply<R: Rng + ?Sized>(&self, u: &mut [f64], rng: &mut R) {
        match self {
            Refresh::None => {}
            Refresh::XyFixed(_) | Refresh::XyPoisson(_) => u.rotate_right(1),
            Refresh::Uniform(_) => u.copy_from_slice(&random_unit(u.len(), rng)),
        }
    }
}

fn random_unit<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return g.into_iter().map(|x| x / norm).collect();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EcmcState {
    pub active: usize,
    /// Unit velocity of the active particle.
    pub direction: Vec<f64>,
    /// Displacement left until the next refresh; drawn lazily.
    pub refresh_clock: Option<f64>,
    /// Total displacement so far.
    pub time: f64,
}

impl EcmcState {
    pub fn new(active: usize, direction: Vec<f64>) -> Result<Self> {
        let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(invalid_input(format!("direction must be a unit vector, |u| = {norm}")));
        }
        Ok(Self { active, direction, refresh_clock: None, time: 0.0 })
    }

    /// Random active particle moving along a random positive axis.
    pub fn random_axis<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Self {
        let mut u = vec![0.0; d];
        u[rng.random_range(0..d)] = 1.0;
        Self { active: rng.random_range(0..n), direction: u, refresh_clock: None, time: 0.0 }
    }

    /// Random active particle with a uniformly random direction.
    pub fn random_uniform<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Self {
        let active = rng.random_range(0..n);
        Self { active, direction: random_unit(d, rng), refresh_clock: None, time: 0.0 }
    }

    fn check(&self, config: &ParticleConfig) -> Result<()> {
        if self.active >= config.len() || self.direction.len() != config.dim() {
            return Err(invalid_state("chain state does not match the configuration"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EcmcStats {
    pub lifts: u64,
    pub refreshes: u64,
    /// Pair-factor evaluations (contact solves or rate evaluations).
    pub factor_evaluations: u64,
    /// Thinning candidates, accepted or not.
    pub candidates: u64,
    pub crossings: u64,
}

fn move_active(config: &mut ParticleConfig, sides: &[f64], i: usize, u: &[f64], dt: f64) {
    for ((x, v), l) in config.position_mut(i).iter_mut().zip(u).zip(sides) {
        *x = wrap_coord(*x + v * dt, *l);
    }
}

/// Straight event chains for hard disks over a total displacement `duration`.
pub fn ecmc_hard_disk_run<R: Rng + ?Sized>(
    spec: &ParticleSpec,
    config: &mut ParticleConfig,
    state: &mut EcmcState,
    duration: f64,
    refresh: Refresh,
    rng: &mut R,
) -> Result<EcmcStats> {
    let sigma = hard_disk_sigma(spec)?;
    refresh.validate()?;
    state.check(config)?;
    if !(duration >= 0.0) {
        return Err(invalid_input("duration must be nonnegative"));
    }
    let sides = spec.torus.sides().to_vec();
    let d = sides.len();
    let horizon = image_horizon(spec.torus.min_side(), sigma, 1.0);
    let mut stats = EcmcStats::default();
    let mut remaining = duration;
    let mut s = vec![0.0; d];
    while remaining > 0.0 {
        let clock = *state.refresh_clock.get_or_insert_with(|| refresh.draw_clock(rng));
        let i = state.active;
        let mut best = (f64::INFINITY, usize::MAX);
        let mut second = f64::INFINITY;
        for j in 0..config.len() {
            if j == i {
                continue;
            }
            stats.factor_evaluations += 1;
            spec.torus.separation_into(config.position(i), config.position(j), &mut s);
            if let Some(t) = earliest_contact(&sides, &s, &state.direction, sigma) {
                if t < best.0 {
                    second = best.0;
                    best = (t, j);
                } else if t < second {
                    second = t;
                }
            }
        }
        if best.0 <= horizon && second - best.0 < SIMULTANEITY_TOL {
            return Err(Error::Degenerate(format!("two contacts within {SIMULTANEITY_TOL}")));
        }
        let contact = if best.0 <= horizon { best.0 } else { f64::INFINITY };
        let dt = contact.min(remaining).min(clock).min(horizon);
        move_active(config, &sides, i, &state.direction, dt);
        remaining -= dt;
        state.time += dt;
        state.refresh_clock = Some(clock - dt);
        if dt == contact {
            state.active = best.1;
            stats.lifts += 1;
        } else if dt == clock {
            refresh.apply(&mut state.direction, rng);
            state.refresh_clock = None;
            stats.refreshes += 1;
        }
    }
    Ok(stats)
}

/// `max |U'(r)|` over `[lo, hi]` for the pair potential of `spec`.
fn max_abs_dudr(spec: &ParticleSpec, lo: f64, hi: f64) -> Result<f64> {
    let mut best = spec.pair_dudr(lo)?.abs().max(spec.pair_dudr(hi)?.abs());
    if let Potential::LennardJones { sigma, .. } = spec.potential {
        // |U'| peaks where U'' vanishes.
        let r = (26.0f64 / 7.0).powf(1.0 / 6.0) * sigma;
        if lo < r && r < hi {
            best = best.max(spec.pair_dudr(r)?.abs());
        }
    }
    Ok(best)
}

/// Generalized event chains for a truncated pair potential.
///
/// Pair event times come from thinning: on each look-ahead segment the rate
/// `beta max(0, U'(r) dr/dt)` of every nearby pair is bounded by
/// `beta max |U'|` over the reachable distances. A pair that crosses the
/// cutoff triggers an event with probability `1 - exp(-beta dU)` for the jump `dU`.
pub fn ecmc_smooth_run<R: Rng + ?Sized>(
    spec: &ParticleSpec,
    config: &mut ParticleConfig,
    state: &mut EcmcState,
    duration: f64,
    refresh: Refresh,
    rng: &mut R,
) -> Result<EcmcStats> {
    let (sigma, cutoff) = match spec.potential {
        Potential::LennardJones { sigma, cutoff: Some(c), .. } => (sigma, c),
        _ => return Err(Error::Unsupported("smooth event chains need a Lennard-Jones potential with a cutoff".into())),
    };
    refresh.validate()?;
    state.check(config)?;
    let look_max = 0.1 * sigma;
    if cutoff + 2.0 * look_max > 0.5 * spec.torus.min_side() {
        return Err(invalid_input("cutoff too long for the box"));
    }
    if !(duration >= 0.0) {
        return Err(invalid_input("duration must be nonnegative"));
    }
    let sides = spec.torus.sides().to_vec();
    let d = sides.len();
    let n = config.len();
    let beta = spec.beta;
    let cut_energy = |r_inside: bool| -> Result<f64> {
        if r_inside {
            Ok(spec.pair_energy(cutoff)?.finite().unwrap_or(0.0))
        } else {
            Ok(0.0)
        }
    };
    let mut stats = EcmcStats::default();
    let mut remaining = duration;
    let mut seps = vec![0.0; n * d];
    let mut bounds = vec![0.0; n];
    while remaining > 0.0 {
        let clock = *state.refresh_clock.get_or_insert_with(|| refresh.draw_clock(rng));
        let i = state.active;
        let u = state.direction.clone();
        // Separations, and the earliest cutoff crossing.
        let mut cross = (f64::INFINITY, usize::MAX);
        for j in 0..n {
            if j == i {
                continue;
            }
            let s = &mut seps[j * d..(j + 1) * d];
            spec.torus.separation_into(config.position(i), config.position(j), s);
            let ss: f64 = s.iter().map(|x| x * x).sum();
            let b: f64 = s.iter().zip(&u).map(|(x, y)| x * y).sum();
            let disc = b * b - (ss - cutoff * cutoff);
            let t = if ss < cutoff * cutoff {
                -b + disc.sqrt()
            } else if b < 0.0 && disc > 0.0 {
                (ss - cutoff * cutoff) / (-b + disc.sqrt())
            } else {
                f64::INFINITY
            };
            if t > 0.0 && t < cross.0 {
                cross = (t, j);
            }
        }
        // Look-ahead length and per-pair bounds.
        let mut look = look_max;
        let total = loop {
            let mut total = 0.0;
            for j in 0..n {
                bounds[j] = 0.0;
                if j == i {
                    continue;
                }
                let r0 = seps[j * d..(j + 1) * d].iter().map(|x| x * x).sum::<f64>().sqrt();
                let lo = (r0 - look).max(1e-3 * sigma);
                let hi = (r0 + look).min(cutoff);
                if lo >= cutoff {
                    continue;
                }
                stats.factor_evaluations += 1;
                bounds[j] = beta * max_abs_dudr(spec, lo, hi)?;
                total += bounds[j];
            }
            if total * look <= 50.0 || look < 1e-9 * sigma {
                break total;
            }
            look *= 0.5;
        };
        let segment = look.min(remaining).min(clock).min(cross.0);
        let candidate = if total > 0.0 { Exp::new(total).expect("positive").sample(rng) } else { f64::INFINITY };
        if candidate < segment {
            move_active(config, &sides, i, &u, candidate);
            remaining -= candidate;
            state.time += candidate;
            state.refresh_clock = Some(clock - candidate);
            stats.candidates += 1;
            // Pick a pair in proportion to its bound and thin against the true rate.
            let mut pick = rng.random::<f64>() * total;
            let mut j = usize::MAX;
            for (k, &bk) in bounds.iter().enumerate() {
                if bk > 0.0 {
                    j = k;
                    if pick < bk {
                        break;
                    }
                    pick -= bk;
                }
            }
            let mut s = vec![0.0; d];
            spec.torus.separation_into(config.position(i), config.position(j), &mut s);
            let r = s.iter().map(|x| x * x).sum::<f64>().sqrt();
            stats.factor_evaluations += 1;
            let rate = beta * (spec.pair_dudr(r)? * s.iter().zip(&u).map(|(x, y)| x * y).sum::<f64>() / r).max(0.0);
            if rate > bounds[j] * (1.0 + 1e-9) {
                return Err(Error::RateBound { rate, bound: bounds[j] });
            }
            if rng.random::<f64>() * bounds[j] < rate {
                state.active = j;
                stats.lifts += 1;
            }
            continue;
        }
        let step = if segment == cross.0 { segment + CROSSING_NUDGE } else { segment };
        move_active(config, &sides, i, &u, step);
        remaining -= step;
        state.time += step;
        state.refresh_clock = Some(clock - step);
        if segment == cross.0 {
            stats.crossings += 1;
            let j = cross.1;
            let was_inside = seps[j * d..(j + 1) * d].iter().map(|x| x * x).sum::<f64>() < cutoff * cutoff;
            // Energy just inside the cutoff is lost when leaving, gained when entering.
            let du = if was_inside { -cut_energy(true)? } else { cut_energy(true)? };
            if du > 0.0 && rng.random::<f64>() >= (-beta * du).exp() {
                state.active = j;
                stats.lifts += 1;
            }
        } else if segment == clock {
            refresh.apply(&mut state.direction, rng);
            state.refresh_clock = None;
            stats.refreshes += 1;
        }
    }
    Ok(stats)
}

/// Product of per-factor Metropolis filters, one independent coin per factor.
pub fn factorized_filter_accept<R: Rng + ?Sized>(deltas: &[f64], beta: f64, rng: &mut R) -> Result<bool> {
    if deltas.iter().any(|d| !d.is_finite()) || !(beta > 0.0) {
        return Err(invalid_input("factor energy changes must be finite and beta positive"));
    }
    let mut accept = true;
    for &delta in deltas {
        if delta > 0.0 && rng.random::<f64>() >= (-beta * delta).exp() {
            accept = false;
        }
    }
    Ok(accept)
}
