//! Event-driven molecular dynamics of equal-mass hard disks.
//!
//! Positions stay inside `[0, L)` per axis. Every pair keeps the absolute time
//! of its next event; after an event only pairs touching the affected particles
//! are re-solved. Wall crossings are events of their own so that each
//! collision time is solved on a straight, unwrapped segment.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{contact_time, earliest_contact, hard_disk_sigma, image_horizon};
use crate::error::{invalid_input, invalid_state, Error, Result};
use crate::particles::{hard_disk_valid, ParticleConfig, ParticleSpec};
use crate::torus::{wrap_coord, Torus};

const CONTACT_TOL: f64 = 1e-9;
const SIMULTANEITY_TOL: f64 = 1e-12;

/// Time until disks at `xi`, `xj` moving with `vi`, `vj` touch along the
/// minimal-image segment, if they do before either wraps to another image.
pub fn md_collision_time(
    torus: &Torus,
    xi: &[f64],
    xj: &[f64],
    vi: &[f64],
    vj: &[f64],
    sigma: f64,
) -> Result<Option<f64>> {
    let d = torus.dim();
    if [xi.len(), xj.len(), vi.len(), vj.len()].iter().any(|&l| l != d) {
        return Err(invalid_input("vector lengths do not match the torus dimension"));
    }
    let mut s = vec![0.0; d];
    torus.separation_into(xi, xj, &mut s);
    if s.iter().map(|x| x * x).sum::<f64>().sqrt() < 2.0 * sigma - CONTACT_TOL {
        return Err(invalid_state("disks overlap"));
    }
    let w: Vec<f64> = vi.iter().zip(vj).map(|(a, b)| a - b).collect();
    Ok(contact_time(&s, &w, sigma))
}

/// Elastic equal-mass collision; `x_ij = x_i - x_j` at contact.
pub fn md_collide(vi: &[f64], vj: &[f64], x_ij: &[f64], sigma: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let norm = x_ij.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 2.0 * sigma).abs() > CONTACT_TOL {
        return Err(invalid_state(format!("separation {norm} is not at contact 2 sigma = {}", 2.0 * sigma)));
    }
    let proj: f64 = vi.iter().zip(vj).zip(x_ij).map(|((a, b), x)| (a - b) * x).sum::<f64>() / (4.0 * sigma * sigma);
    let vi2 = vi.iter().zip(x_ij).map(|(v, x)| v - proj * x).collect();
    let vj2 = vj.iter().zip(x_ij).map(|(v, x)| v + proj * x).collect();
    Ok((vi2, vj2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdEventKind {
    Collision,
    Boundary,
}

impl MdEventKind {
    pub fn token(&self) -> &'static str {
        match self {
            MdEventKind::Collision => "collision",
            MdEventKind::Boundary => "boundary",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MdEvent {
    pub time: f64,
    pub kind: MdEventKind,
    pub particles: (usize, Option<usize>),
    /// Boundary axis, or the squared-speed sum after a collision.
    pub diagnostic: f64,
}

#[derive(Debug, Clone, Copy)]
struct PairClock {
    time: f64,
    collides: bool,
}

#[derive(Debug, Clone)]
pub struct MdSystem {
    torus: Torus,
    sigma: f64,
    config: ParticleConfig,
    velocities: Vec<f64>,
    time: f64,
    collisions: u64,
    pairs: Vec<PairClock>,
    walls: Vec<f64>,
    log: Vec<MdEvent>,
    logging: bool,
}

impl MdSystem {
    pub fn new(spec: &ParticleSpec, config: ParticleConfig, velocities: Vec<f64>) -> Result<Self> {
        let sigma = hard_disk_sigma(spec)?;
        if spec.masses.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::Unsupported("collision rule assumes equal masses".into()));
        }
        if config.len() != spec.n || config.dim() != spec.dim() || velocities.len() != config.flat().len() {
            return Err(invalid_input("configuration or velocities do not match the spec"));
        }
        if velocities.iter().any(|v| !v.is_finite()) {
            return Err(invalid_input("non-finite velocity"));
        }
        if !hard_disk_valid(&config, spec)? {
            return Err(invalid_state("start configuration has overlapping disks"));
        }
        let n = config.len();
        let d = config.dim();
        let mut sys = Self {
            torus: spec.torus.clone(),
            sigma,
            config,
            velocities,
            time: 0.0,
            collisions: 0,
            pairs: vec![PairClock { time: f64::INFINITY, collides: false }; n * n],
            walls: vec![f64::INFINITY; n * d],
            log: Vec::new(),
            logging: false,
        };
        for i in 0..n {
            sys.schedule_walls(i);
            for j in i + 1..n {
                sys.schedule_pair(i, j);
            }
        }
        Ok(sys)
    }

    /// Start with independent standard normal velocity components.
    pub fn with_random_velocities<R: Rng + ?Sized>(spec: &ParticleSpec, config: ParticleConfig, rng: &mut R) -> Result<Self> {
        let v = (0..config.flat().len()).map(|_| rng.sample(StandardNormal)).collect();
        Self::new(spec, config, v)
    }

    pub fn set_logging(&mut self, on: bool) {
        self.logging = on;
    }

    pub fn take_log(&mut self) -> Vec<MdEvent> {
        std::mem::take(&mut self.log)
    }

    pub fn config(&self) -> &ParticleConfig {
        &self.config
    }

    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn collisions(&self) -> u64 {
        self.collisions
    }

    pub fn speed_sq_sum(&self) -> f64 {
        self.velocities.iter().map(|v| v * v).sum()
    }

    pub fn momentum(&self) -> Vec<f64> {
        let d = self.config.dim();
        let mut p = vec![0.0; d];
        for (k, v) in self.velocities.iter().enumerate() {
            p[k % d] += v;
        }
        p
    }

    fn velocity(&self, i: usize) -> &[f64] {
        let d = self.config.dim();
        &self.velocities[i * d..(i + 1) * d]
    }

    fn schedule_walls(&mut self, i: usize) {
        let d = self.config.dim();
        for a in 0..d {
            let x = self.config.position(i)[a];
            let v = self.velocities[i * d + a];
            let side = self.torus.sides()[a];
            let dt = if v > 0.0 {
                (side - x) / v
            } else if v < 0.0 {
                // A coordinate at 0 heading down sits on the upper wall.
                if x == 0.0 { side / -v } else { x / -v }
            } else {
                f64::INFINITY
            };
            self.walls[i * d + a] = self.time + dt;
        }
    }

    fn schedule_pair(&mut self, i: usize, j: usize) {
        let (i, j) = (i.min(j), i.max(j));
        let d = self.config.dim();
        let mut s = vec![0.0; d];
        self.torus.separation_into(self.config.position(i), self.config.position(j), &mut s);
        let w: Vec<f64> = self.velocity(i).iter().zip(self.velocity(j)).map(|(a, b)| a - b).collect();
        let speed = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let horizon = image_horizon(self.torus.min_side(), self.sigma, speed);
        let clock = match earliest_contact(self.torus.sides(), &s, &w, self.sigma) {
            Some(t) if t <= horizon => PairClock { time: self.time + t, collides: true },
            _ => PairClock { time: self.time + horizon, collides: false },
        };
        let n = self.config.len();
        self.pairs[i * n + j] = clock;
    }

    fn reschedule(&mut self, i: usize) {
        for k in 0..self.config.len() {
            if k != i {
                self.schedule_pair(i, k);
            }
        }
    }

    fn drift(&mut self, dt: f64) {
        let sides = self.torus.sides().to_vec();
        let d = sides.len();
        for (k, x) in self.config.flat_mut().iter_mut().enumerate() {
            *x = wrap_coord(*x + self.velocities[k] * dt, sides[k % d]);
        }
        self.time += dt;
    }

    /// Processes the next event (collision, wall crossing or horizon recheck).
    /// Returns the event if it is a collision or wall crossing.
    pub fn next_event(&mut self) -> Result<Option<MdEvent>> {
        let n = self.config.len();
        let d = self.config.dim();
        let mut first: Option<(f64, usize, usize)> = None;
        let mut second_collision = f64::INFINITY;
        let mut first_collision = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                let c = self.pairs[i * n + j];
                if c.collides {
                    if c.time < first_collision {
                        second_collision = first_collision;
                        first_collision = c.time;
                    } else if c.time < second_collision {
                        second_collision = c.time;
                    }
                }
                if first.is_none_or(|(t, _, _)| c.time < t) {
                    first = Some((c.time, i, j));
                }
            }
        }
        let wall = self
            .walls
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, &t)| (t, k));
        let pair_time = first.map_or(f64::INFINITY, |f| f.0);
        let wall_time = wall.map_or(f64::INFINITY, |w| w.0);
        if !pair_time.is_finite() && !wall_time.is_finite() {
            return Err(invalid_state("no future events: all particles are at rest"));
        }
        if wall_time <= pair_time {
            let (t, k) = wall.expect("finite wall time");
            let (i, axis) = (k / d, k % d);
            self.drift(t - self.time);
            self.config.position_mut(i)[axis] = 0.0;
            self.schedule_walls(i);
            self.reschedule(i);
            let ev = MdEvent { time: self.time, kind: MdEventKind::Boundary, particles: (i, None), diagnostic: axis as f64 };
            if self.logging {
                self.log.push(ev.clone());
            }
            return Ok(Some(ev));
        }
        let (t, i, j) = first.expect("finite pair time");
        let collides = self.pairs[i * n + j].collides;
        if collides && second_collision - first_collision < SIMULTANEITY_TOL {
            return Err(Error::Degenerate(format!("two collisions within {SIMULTANEITY_TOL} at t = {t}")));
        }
        self.drift(t - self.time);
        if !collides {
            self.schedule_pair(i, j);
            return Ok(None);
        }
        let mut s = vec![0.0; d];
        self.torus.separation_into(self.config.position(i), self.config.position(j), &mut s);
        let (vi, vj) = md_collide(self.velocity(i), self.velocity(j), &s, self.sigma)?;
        self.velocities[i * d..(i + 1) * d].copy_from_slice(&vi);
        self.velocities[j * d..(j + 1) * d].copy_from_slice(&vj);
        self.collisions += 1;
        for k in [i, j] {
            self.schedule_walls(k);
            self.reschedule(k);
        }
        let ev = MdEvent { time: self.time, kind: MdEventKind::Collision, particles: (i, Some(j)), diagnostic: self.speed_sq_sum() };
        if self.logging {
            self.log.push(ev.clone());
        }
        Ok(Some(ev))
    }

    /// Runs until `collisions` further collisions have happened.
    pub fn run_collisions(&mut self, collisions: u64) -> Result<()> {
        if self.config.len() < 2 && collisions > 0 {
            return Err(invalid_input("a single disk never collides"));
        }
        let target = self.collisions + collisions;
        while self.collisions < target {
            self.next_event()?;
        }
        Ok(())
    }

    /// Runs all events strictly before `until`, then drifts to it.
    pub fn advance(&mut self, until: f64) -> Result<()> {
        if until < self.time {
            return Err(invalid_input("cannot advance backwards in time"));
        }
        loop {
            let n = self.config.len();
            let next_pair = (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .map(|(i, j)| self.pairs[i * n + j].time)
                .fold(f64::INFINITY, f64::min);
            let next_wall = self.walls.iter().copied().fold(f64::INFINITY, f64::min);
            if next_pair.min(next_wall) >= until {
                break;
            }
            self.next_event()?;
        }
        self.drift(until - self.time);
        // Walls are absolute times; nothing to refresh. Pair clocks remain valid.
        Ok(())
    }
}
