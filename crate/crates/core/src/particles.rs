//! Particle potentials on the torus: hard disks, soft disks, Lennard-Jones and
//! harmonic bonded terms.
//!
//! Positions are stored as a flat `N x d` buffer of wrapped coordinates.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::Rng;

use crate::error::{invalid_input, invalid_state, Error, Result};
use crate::lattice::short_hash;
use crate::torus::Torus;

/// Cosine clamp used when differentiating `arccos`.
const ANGLE_GUARD: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum BondTerm {
    Stretch { i: usize, j: usize, r0: f64, kb: f64 },
    Angle { i: usize, j: usize, k: usize, phi0: f64, ka: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    HardDisk { sigma: f64 },
    SoftDisk { sigma: f64, k: u32, eps: f64 },
    /// `cutoff: None` disables truncation.
    LennardJones { sigma: f64, eps: f64, cutoff: Option<f64> },
    Bonded(Vec<BondTerm>),
}

impl Potential {
    /// Lennard-Jones with the plain truncation at `2 sigma`.
    pub fn lennard_jones(sigma: f64, eps: f64) -> Self {
        Potential::LennardJones { sigma, eps, cutoff: Some(2.0 * sigma) }
    }

    pub fn sigma(&self) -> Option<f64> {
        match *self {
            Potential::HardDisk { sigma } | Potential::SoftDisk { sigma, .. } | Potential::LennardJones { sigma, .. } => Some(sigma),
            Potential::Bonded(_) => None,
        }
    }

    /// Interaction range beyond which the pair term vanishes.
    pub fn cutoff(&self) -> Option<f64> {
        match *self {
            Potential::HardDisk { sigma } => Some(2.0 * sigma),
            Potential::LennardJones { cutoff, .. } => cutoff,
            _ => None,
        }
    }

    fn token(&self) -> String {
        match self {
            Potential::HardDisk { sigma } => format!("hard:{sigma:e}"),
            Potential::SoftDisk { sigma, k, eps } => format!("soft:{sigma:e},{k},{eps:e}"),
            Potential::LennardJones { sigma, eps, cutoff } => format!("lj:{sigma:e},{eps:e},{cutoff:?}"),
            Potential::Bonded(terms) => format!("bonded:{terms:?}"),
        }
    }
}

/// Energy that may be infinite (a forbidden hard-disk overlap).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Energy {
    Finite(f64),
    Forbidden,
}

impl Energy {
    pub fn is_forbidden(&self) -> bool {
        matches!(self, Energy::Forbidden)
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            Energy::Finite(u) => Some(u),
            Energy::Forbidden => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSpec {
    pub torus: Torus,
    pub n: usize,
    pub potential: Potential,
    pub beta: f64,
    pub masses: Vec<f64>,
}

impl ParticleSpec {
    /// Spec with unit masses.
    pub fn new(torus: Torus, n: usize, potential: Potential, beta: f64) -> Result<Self> {
        Self::with_masses(torus, n, potential, beta, vec![1.0; n])
    }

    pub fn with_masses(torus: Torus, n: usize, potential: Potential, beta: f64, masses: Vec<f64>) -> Result<Self> {
        let spec = Self { torus, n, potential, beta, masses };
        spec.validate()?;
        Ok(spec)
    }

    /// 2D hard disks of radius `sigma` in a square box sized for density `eta`.
    pub fn hard_disks(n: usize, eta: f64, sigma: f64) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(invalid_input(format!("density must lie in (0, 1), got {eta}")));
        }
        let side = (n as f64 * PI * sigma * sigma / eta).sqrt();
        Self::new(Torus::cubic(2, side)?, n, Potential::HardDisk { sigma }, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid_input("need at least one particle"));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(invalid_input(format!("beta must be positive, got {}", self.beta)));
        }
        if self.masses.len() != self.n || self.masses.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(invalid_input("need one positive mass per particle"));
        }
        let positive = |x: f64| x.is_finite() && x > 0.0;
        match &self.potential {
            Potential::HardDisk { sigma } => {
                if !positive(*sigma) {
                    return Err(invalid_input("sigma must be positive"));
                }
            }
            Potential::SoftDisk { sigma, k, eps } => {
                if !positive(*sigma) || !positive(*eps) || *k < 1 {
                    return Err(invalid_input("soft disks need sigma > 0, eps > 0, k >= 1"));
                }
            }
            Potential::LennardJones { sigma, eps, cutoff } => {
                if !positive(*sigma) || !positive(*eps) {
                    return Err(invalid_input("Lennard-Jones needs sigma > 0, eps > 0"));
                }
                if let Some(c) = cutoff {
                    if !(c.is_finite() && *c > *sigma) {
                        return Err(invalid_input(format!("cutoff {c} must exceed sigma")));
                    }
                }
            }
            Potential::Bonded(terms) => {
                for t in terms {
                    let (idx, params): (Vec<usize>, [f64; 2]) = match *t {
                        BondTerm::Stretch { i, j, r0, kb } => (vec![i, j], [r0, kb]),
                        BondTerm::Angle { i, j, k, phi0, ka } => (vec![i, j, k], [phi0, ka]),
                    };
                    if idx.iter().any(|&a| a >= self.n) {
                        return Err(invalid_input(format!("bond index out of range in {t:?}")));
                    }
                    if idx.iter().enumerate().any(|(a, x)| idx[..a].contains(x)) {
                        return Err(invalid_input(format!("bond indices must be distinct in {t:?}")));
                    }
                    if !params.iter().all(|&p| positive(p)) {
                        return Err(invalid_input(format!("bond parameters must be positive in {t:?}")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.torus.dim()
    }

    /// `eta = N v_d sigma^d / V` with `v_d` the unit-ball volume (`pi` in 2D).
    pub fn density(&self) -> Option<f64> {
        let sigma = self.potential.sigma()?;
        let unit_ball = match self.dim() {
            1 => 2.0,
            2 => PI,
            _ => 4.0 * PI / 3.0,
        };
        Some(self.n as f64 * unit_ball * sigma.powi(self.dim() as i32) / self.torus.volume())
    }

    pub fn hash(&self) -> String {
        let canonical = format!(
            "{:?}|{}|{}|{:e}|{:?}",
            self.torus.sides(),
            self.n,
            self.potential.token(),
            self.beta,
            self.masses
        );
        short_hash(canonical.as_bytes())
    }

    /// Pair potential as a function of separation distance.
    pub fn pair_energy(&self, r: f64) -> Result<Energy> {
        if !(r > 0.0) {
            return Err(Error::Singularity(format!("pair distance {r} is not positive")));
        }
        Ok(match self.potential {
            Potential::HardDisk { sigma } => {
                if r > 2.0 * sigma {
                    Energy::Finite(0.0)
                } else {
                    Energy::Forbidden
                }
            }
            Potential::SoftDisk { sigma, k, eps } => Energy::Finite(eps * (2.0 * sigma / r).powi(k as i32)),
            Potential::LennardJones { sigma, eps, cutoff } => {
                if cutoff.is_some_and(|c| r > c) {
                    Energy::Finite(0.0)
                } else {
                    let s6 = (sigma / r).powi(6);
                    Energy::Finite(4.0 * eps * (s6 * s6 - s6))
                }
            }
            Potential::Bonded(_) => Energy::Finite(0.0),
        })
    }

    /// `dU/dr` of the pair potential (zero for hard disks and bonded specs).
    pub fn pair_dudr(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::Singularity(format!("pair distance {r} is not positive")));
        }
        Ok(match self.potential {
            Potential::SoftDisk { sigma, k, eps } => -(k as f64) * eps * (2.0 * sigma / r).powi(k as i32) / r,
            Potential::LennardJones { sigma, eps, cutoff } => {
                if cutoff.is_some_and(|c| r > c) {
                    0.0
                } else {
                    let s6 = (sigma / r).powi(6);
                    4.0 * eps * (-12.0 * s6 * s6 + 6.0 * s6) / r
                }
            }
            _ => 0.0,
        })
    }

    pub fn is_pairwise(&self) -> bool {
        !matches!(self.potential, Potential::Bonded(_))
    }

    /// Gradient of the pair term with respect to `x_i`; the `x_j` gradient is its negation.
    pub fn pair_gradient(&self, xi: &[f64], xj: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        if xi.len() != d || xj.len() != d {
            return Err(invalid_input("position has wrong dimension"));
        }
        let mut sep = vec![0.0; d];
        self.torus.separation_into(xi, xj, &mut sep);
        let r = sep.iter().map(|s| s * s).sum::<f64>().sqrt();
        if r == 0.0 {
            return Err(Error::Singularity("coincident particles".into()));
        }
        let du = self.pair_dudr(r)?;
        Ok(sep.iter().map(|s| du * s / r).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleConfig {
    dim: usize,
    positions: Vec<f64>,
}

impl ParticleConfig {
    /// Wraps raw coordinates (flat `N x d`) onto the torus.
    pub fn new(torus: &Torus, mut flat: Vec<f64>) -> Result<Self> {
        let d = torus.dim();
        if flat.len() % d != 0 {
            return Err(invalid_input(format!("{} coordinates do not split into {d}-vectors", flat.len())));
        }
        if flat.iter().any(|x| !x.is_finite()) {
            return Err(invalid_input("non-finite coordinate"));
        }
        torus.wrap_in_place(&mut flat);
        Ok(Self { dim: d, positions: flat })
    }

    pub fn from_points(torus: &Torus, points: &[Vec<f64>]) -> Result<Self> {
        Self::new(torus, points.concat())
    }

    pub fn len(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn position_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn flat(&self) -> &[f64] {
        &self.positions
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.positions
    }

    fn check(&self, spec: &ParticleSpec) -> Result<()> {
        if self.dim != spec.dim() || self.len() != spec.n {
            return Err(invalid_state(format!(
                "configuration of {} particles in {}D does not match spec ({} in {}D)",
                self.len(),
                self.dim,
                spec.n,
                spec.dim()
            )));
        }
        Ok(())
    }
}

/// True iff every minimal-image pair distance exceeds `2 sigma`.
pub fn hard_disk_valid(config: &ParticleConfig, spec: &ParticleSpec) -> Result<bool> {
    config.check(spec)?;
    let sigma = match spec.potential {
        Potential::HardDisk { sigma } => sigma,
        _ => return Err(Error::Unsupported("hard_disk_valid needs a hard-disk spec".into())),
    };
    let contact = 4.0 * sigma * sigma;
    for i in 0..config.len() {
        for j in 0..i {
            if spec.torus.distance_sq(config.position(i), config.position(j)) <= contact {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// `arccos` of the normalised `x_ij . x_jk`, exactly as the angle term is defined.
pub fn bond_angle(torus: &Torus, xi: &[f64], xj: &[f64], xk: &[f64]) -> Result<f64> {
    let d = torus.dim();
    let (mut a, mut b) = (vec![0.0; d], vec![0.0; d]);
    torus.separation_into(xi, xj, &mut a);
    torus.separation_into(xj, xk, &mut b);
    let (na, nb) = (norm(&a), norm(&b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Singularity("coincident atoms in angle term".into()));
    }
    Ok((dot(&a, &b) / (na * nb)).clamp(-1.0, 1.0).acos())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Sum of harmonic stretch and angle terms.
pub fn bonded_energy(config: &ParticleConfig, torus: &Torus, terms: &[BondTerm]) -> Result<f64> {
    let mut u = 0.0;
    for t in terms {
        match *t {
            BondTerm::Stretch { i, j, r0, kb } => {
                let r = torus.distance_sq(config.position(i), config.position(j)).sqrt();
                u += 0.5 * kb * (r - r0).powi(2);
            }
            BondTerm::Angle { i, j, k, phi0, ka } => {
                let phi = bond_angle(torus, config.position(i), config.position(j), config.position(k))?;
                u += 0.5 * ka * (phi - phi0).powi(2);
            }
        }
    }
    Ok(u)
}

fn bonded_gradient(config: &ParticleConfig, torus: &Torus, terms: &[BondTerm], out: &mut [f64]) -> Result<()> {
    let d = torus.dim();
    let (mut a, mut b) = (vec![0.0; d], vec![0.0; d]);
    for t in terms {
        match *t {
            BondTerm::Stretch { i, j, r0, kb } => {
                torus.separation_into(config.position(i), config.position(j), &mut a);
                let r = norm(&a);
                if r == 0.0 {
                    return Err(Error::Singularity("coincident atoms in stretch term".into()));
                }
                let f = kb * (r - r0) / r;
                for c in 0..d {
                    out[i * d + c] += f * a[c];
                    out[j * d + c] -= f * a[c];
                }
            }
            BondTerm::Angle { i, j, k, phi0, ka } => {
                torus.separation_into(config.position(i), config.position(j), &mut a);
                torus.separation_into(config.position(j), config.position(k), &mut b);
                let (na, nb) = (norm(&a), norm(&b));
                if na == 0.0 || nb == 0.0 {
                    return Err(Error::Singularity("coincident atoms in angle term".into()));
                }
                let raw = dot(&a, &b) / (na * nb);
                let phi = raw.clamp(-1.0, 1.0).acos();
                let c = raw.clamp(-ANGLE_GUARD, ANGLE_GUARD);
                // dU/dc = ka (phi - phi0) dphi/dc with dphi/dc = -1/sqrt(1 - c^2).
                let du_dc = -ka * (phi - phi0) / (1.0 - c * c).sqrt();
                for e in 0..d {
                    let dc_da = b[e] / (na * nb) - raw * a[e] / (na * na);
                    let dc_db = a[e] / (na * nb) - raw * b[e] / (nb * nb);
                    out[i * d + e] += du_dc * dc_da;
                    out[j * d + e] += du_dc * (dc_db - dc_da);
                    out[k * d + e] -= du_dc * dc_db;
                }
            }
        }
    }
    Ok(())
}

/// Total potential: pair sum over `i < j` (skipping pairs beyond the cutoff) or the bonded sum.
pub fn total_energy(config: &ParticleConfig, spec: &ParticleSpec) -> Result<Energy> {
    config.check(spec)?;
    if let Potential::Bonded(terms) = &spec.potential {
        return Ok(Energy::Finite(bonded_energy(config, &spec.torus, terms)?));
    }
    let cutoff_sq = spec.potential.cutoff().map(|c| c * c);
    let mut u = 0.0;
    for i in 0..config.len() {
        for j in 0..i {
            let r2 = spec.torus.distance_sq(config.position(i), config.position(j));
            if let Some(c2) = cutoff_sq {
                if r2 > c2 {
                    continue;
                }
            }
            match spec.pair_energy(r2.sqrt())? {
                Energy::Finite(e) => u += e,
                Energy::Forbidden => return Ok(Energy::Forbidden),
            }
        }
    }
    Ok(Energy::Finite(u))
}

/// Flat `N x d` gradient of the total potential; zero for hard disks.
pub fn total_gradient(config: &ParticleConfig, spec: &ParticleSpec) -> Result<Vec<f64>> {
    config.check(spec)?;
    let mut out = vec![0.0; config.flat().len()];
    gradient_into(config, spec, &mut out)?;
    Ok(out)
}

fn gradient_into(config: &ParticleConfig, spec: &ParticleSpec, out: &mut [f64]) -> Result<()> {
    out.iter_mut().for_each(|g| *g = 0.0);
    match &spec.potential {
        Potential::HardDisk { .. } => Ok(()),
        Potential::Bonded(terms) => bonded_gradient(config, &spec.torus, terms, out),
        _ => {
            let d = spec.dim();
            let cutoff_sq = spec.potential.cutoff().map(|c| c * c);
            let mut sep = vec![0.0; d];
            for i in 0..config.len() {
                for j in 0..i {
                    spec.torus.separation_into(config.position(i), config.position(j), &mut sep);
                    let r2 = dot(&sep, &sep);
                    if cutoff_sq.is_some_and(|c2| r2 > c2) {
                        continue;
                    }
                    if r2 == 0.0 {
                        return Err(Error::Singularity(format!("particles {i} and {j} coincide")));
                    }
                    let r = r2.sqrt();
                    let f = spec.pair_dudr(r)? / r;
                    for c in 0..d {
                        out[i * d + c] += f * sep[c];
                        out[j * d + c] -= f * sep[c];
                    }
                }
            }
            Ok(())
        }
    }
}

/// A differentiable potential on a flat coordinate vector, the interface used
/// by the gradient-based samplers.
pub trait SmoothPotential {
    fn dim(&self) -> usize;
    fn energy(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()>;
    /// Maps coordinates back into the domain after a drift (no-op on the real line).
    fn wrap(&self, _x: &mut [f64]) {}
}

impl SmoothPotential for ParticleSpec {
    fn dim(&self) -> usize {
        self.n * self.torus.dim()
    }

    fn energy(&self, x: &[f64]) -> Result<f64> {
        let c = ParticleConfig { dim: self.torus.dim(), positions: x.to_vec() };
        match total_energy(&c, self)? {
            Energy::Finite(u) => Ok(u),
            Energy::Forbidden => Err(Error::Unsupported("hard-disk potential is not smooth".into())),
        }
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if matches!(self.potential, Potential::HardDisk { .. }) {
            return Err(Error::Unsupported("hard-disk potential is not smooth".into()));
        }
        let c = ParticleConfig { dim: self.torus.dim(), positions: x.to_vec() };
        c.check(self)?;
        gradient_into(&c, self, out)
    }

    fn wrap(&self, x: &mut [f64]) {
        self.torus.wrap_in_place(x);
    }
}

/// `U(x) = (k/2) |x|^2` on the real line (any dimension).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    pub dim: usize,
    pub stiffness: f64,
}

impl SmoothPotential for Quadratic {
    fn dim(&self) -> usize {
        self.dim
    }

    fn energy(&self, x: &[f64]) -> Result<f64> {
        Ok(0.5 * self.stiffness * dot(x, x))
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        for (g, xi) in out.iter_mut().zip(x) {
            *g = self.stiffness * xi;
        }
        Ok(())
    }
}

/// One-dimensional double well `U(x) = (x^2 - 1)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DoubleWell;

impl DoubleWell {
    pub fn potential(x: f64) -> f64 {
        (x * x - 1.0).powi(2)
    }
}

impl SmoothPotential for DoubleWell {
    fn dim(&self) -> usize {
        1
    }

    fn energy(&self, x: &[f64]) -> Result<f64> {
        Ok(Self::potential(x[0]))
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        out[0] = 4.0 * x[0] * (x[0] * x[0] - 1.0);
        Ok(())
    }
}

/// Hexagonal start: rows of `nc` sites, odd rows shifted by half a spacing,
/// filled row by row until `N` sites are placed. Other dimensions use a cubic grid.
pub fn lattice_start(spec: &ParticleSpec) -> Result<ParticleConfig> {
    let sides = spec.torus.sides();
    let n = spec.n;
    let flat = if spec.dim() == 2 {
        let (lx, ly) = (sides[0], sides[1]);
        let nc = ((n as f64 * lx / ly * 3f64.sqrt() / 2.0).sqrt().ceil() as usize).max(1);
        let nr = n.div_ceil(nc);
        let (ax, ay) = (lx / nc as f64, ly / nr as f64);
        let mut flat = Vec::with_capacity(2 * n);
        for s in 0..n {
            let (row, col) = (s / nc, s % nc);
            let shift = if row % 2 == 1 { 0.5 * ax } else { 0.0 };
            flat.push((col as f64 + 0.25) * ax + shift);
            flat.push((row as f64 + 0.5) * ay);
        }
        flat
    } else {
        let d = spec.dim();
        let per_axis = (n as f64).powf(1.0 / d as f64).ceil() as usize;
        let mut flat = Vec::with_capacity(d * n);
        for s in 0..n {
            let mut rest = s;
            for a in 0..d {
                flat.push((rest % per_axis) as f64 * sides[a] / per_axis as f64);
                rest /= per_axis;
            }
        }
        flat
    };
    let config = ParticleConfig::new(&spec.torus, flat)?;
    if matches!(spec.potential, Potential::HardDisk { .. }) && !hard_disk_valid(&config, spec)? {
        return Err(invalid_input("density too high for a lattice start"));
    }
    Ok(config)
}

/// Uniform hard-disk configuration by whole-configuration rejection (small `N` only).
pub fn random_hard_disk_config<R: Rng + ?Sized>(spec: &ParticleSpec, rng: &mut R, max_tries: usize) -> Result<ParticleConfig> {
    let sides = spec.torus.sides().to_vec();
    for _ in 0..max_tries {
        let flat: Vec<f64> = (0..spec.n * sides.len()).map(|k| rng.random::<f64>() * sides[k % sides.len()]).collect();
        let c = ParticleConfig::new(&spec.torus, flat)?;
        if hard_disk_valid(&c, spec)? {
            return Ok(c);
        }
    }
    Err(Error::InsufficientData(format!("no valid configuration in {max_tries} tries")))
}

/// Snapshot: header `L_1 .. L_d spec-hash`, then one `x y [z]` line per particle.
pub fn write_particle_snapshot(config: &ParticleConfig, spec: &ParticleSpec) -> Result<String> {
    config.check(spec)?;
    let mut out = String::new();
    for l in spec.torus.sides() {
        let _ = write!(out, "{l} ");
    }
    let _ = writeln!(out, "{}", spec.hash());
    for i in 0..config.len() {
        let line: Vec<String> = config.position(i).iter().map(|x| x.to_string()).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    Ok(out)
}

pub fn read_particle_snapshot(text: &str, spec: &ParticleSpec) -> Result<ParticleConfig> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| invalid_input("empty snapshot"))?.split_whitespace().collect();
    let d = spec.dim();
    let sides_ok = header.len() == d + 1
        && header[..d].iter().zip(spec.torus.sides()).all(|(h, l)| h.parse::<f64>().ok() == Some(*l));
    if !sides_ok || header[d] != spec.hash() {
        return Err(invalid_input("snapshot header does not match spec"));
    }
    let mut flat = Vec::with_capacity(spec.n * d);
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| invalid_input(format!("bad coordinate `{t}`"))))
            .collect::<Result<_>>()?;
        if row.len() != d {
            return Err(invalid_input(format!("expected {d} coordinates, got `{line}`")));
        }
        flat.extend(row);
    }
    let c = ParticleConfig::new(&spec.torus, flat)?;
    c.check(spec)?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::chain_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn lj(cutoff: Option<f64>) -> ParticleSpec {
        let t = Torus::cubic(2, 10.0).unwrap();
        ParticleSpec::new(t, 2, Potential::LennardJones { sigma: 1.0, eps: 1.5, cutoff }, 1.0).unwrap()
    }

    #[test]
    fn pair_energy_examples() {
        let s = lj(None);
        assert_eq!(s.pair_energy(1.0).unwrap(), Energy::Finite(0.0));
        let rmin = 2f64.powf(1.0 / 6.0);
        assert!((s.pair_energy(rmin).unwrap().finite().unwrap() + 1.5).abs() < 1e-12);
        assert!(s.pair_dudr(rmin).unwrap().abs() < 1e-12);
        assert!(matches!(s.pair_energy(0.0), Err(Error::Singularity(_))));

        let t = Torus::cubic(2, 10.0).unwrap();
        let soft = ParticleSpec::new(t, 2, Potential::SoftDisk { sigma: 0.5, k: 12, eps: 0.7 }, 1.0).unwrap();
        assert!((soft.pair_energy(1.0).unwrap().finite().unwrap() - 0.7).abs() < 1e-15);

        let truncated = lj(Some(2.0));
        assert_eq!(truncated.pair_energy(2.01).unwrap(), Energy::Finite(0.0));
        assert!(truncated.pair_energy(1.99).unwrap().finite().unwrap() < 0.0);
    }

    #[test]
    fn pair_derivative_matches_finite_differences() {
        let t = Torus::cubic(2, 10.0).unwrap();
        let soft = ParticleSpec::new(t, 2, Potential::SoftDisk { sigma: 0.5, k: 6, eps: 1.0 }, 1.0).unwrap();
        let mut rng = chain_rng(5);
        for s in [lj(None), soft] {
            for _ in 0..200 {
                let r = 0.9 + 2.0 * rng.random::<f64>();
                let h = 1e-6;
                let up = s.pair_energy(r + h).unwrap().finite().unwrap();
                let dn = s.pair_energy(r - h).unwrap().finite().unwrap();
                let fd = (up - dn) / (2.0 * h);
                let an = s.pair_dudr(r).unwrap();
                assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-3), "r {r}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn pair_gradient_is_antisymmetric_and_zero_at_minimum() {
        let s = lj(None);
        let rmin = 2f64.powf(1.0 / 6.0);
        let g = s.pair_gradient(&[1.0, 1.0], &[1.0 + rmin, 1.0]).unwrap();
        assert!(g.iter().all(|c| c.abs() < 1e-12));
        let a = s.pair_gradient(&[9.5, 0.2], &[0.6, 9.9]).unwrap();
        let b = s.pair_gradient(&[0.6, 9.9], &[9.5, 0.2]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x + y).abs() < 1e-12);
        }
        assert!(s.pair_gradient(&[1.0, 1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn hard_disk_validity() {
        let t = Torus::cubic(2, 10.0).unwrap();
        let s = ParticleSpec::new(t.clone(), 2, Potential::HardDisk { sigma: 1.0 }, 1.0).unwrap();
        let close = ParticleConfig::new(&t, vec![1.0, 1.0, 2.9, 1.0]).unwrap();
        assert!(!hard_disk_valid(&close, &s).unwrap());
        let across = ParticleConfig::new(&t, vec![0.5, 5.0, 8.0, 5.0]).unwrap();
        assert!(hard_disk_valid(&across, &s).unwrap());
        let overlap_across = ParticleConfig::new(&t, vec![0.5, 5.0, 9.0, 5.0]).unwrap();
        assert!(!hard_disk_valid(&overlap_across, &s).unwrap());
        assert_eq!(total_energy(&across, &s).unwrap(), Energy::Finite(0.0));
        assert_eq!(total_energy(&close, &s).unwrap(), Energy::Forbidden);
        assert!(total_gradient(&across, &s).unwrap().iter().all(|g| *g == 0.0));
    }

    #[test]
    fn bonded_examples() {
        let t = Torus::cubic(3, 20.0).unwrap();
        let c = ParticleConfig::new(&t, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        let phi = bond_angle(&t, c.position(0), c.position(1), c.position(2)).unwrap();
        assert!((phi - PI / 2.0).abs() < 1e-12);

        let s = BondTerm::Stretch { i: 0, j: 1, r0: 1.0, kb: 2.0 };
        assert_eq!(bonded_energy(&c, &t, &[s.clone()]).unwrap(), 0.0);
        let c2 = ParticleConfig::new(&t, vec![1.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        assert!((bonded_energy(&c2, &t, &[s]).unwrap() - 0.25).abs() < 1e-15);

        // A straight chain gives zero angle under the x_ij . x_jk convention.
        let line = ParticleConfig::new(&t, vec![2.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(bond_angle(&t, line.position(0), line.position(1), line.position(2)).unwrap().abs() < 1e-7);

        let coincident = ParticleConfig::new(&t, vec![0.0; 9]).unwrap();
        let a = BondTerm::Angle { i: 0, j: 1, k: 2, phi0: 1.9, ka: 1.0 };
        assert!(matches!(bonded_energy(&coincident, &t, &[a]), Err(Error::Singularity(_))));
    }

    #[test]
    fn bond_spec_validation() {
        let t = Torus::cubic(3, 20.0).unwrap();
        let bad = Potential::Bonded(vec![BondTerm::Angle { i: 0, j: 0, k: 1, phi0: 1.0, ka: 1.0 }]);
        assert!(ParticleSpec::new(t.clone(), 3, bad, 1.0).is_err());
        let out = Potential::Bonded(vec![BondTerm::Stretch { i: 0, j: 3, r0: 1.0, kb: 1.0 }]);
        assert!(ParticleSpec::new(t.clone(), 3, out, 1.0).is_err());
        assert!(ParticleSpec::new(t, 3, Potential::LennardJones { sigma: 1.0, eps: 1.0, cutoff: Some(0.5) }, 1.0).is_err());
    }

    fn fd_gradient(spec: &ParticleSpec, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|k| {
                let (mut up, mut dn) = (x.to_vec(), x.to_vec());
                up[k] += h;
                dn[k] -= h;
                (spec.energy(&up).unwrap() - spec.energy(&dn).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    fn assert_close(a: &[f64], b: &[f64], rel: f64) {
        let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-8);
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= rel * scale, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn total_gradient_matches_finite_differences() {
        let t = Torus::cubic(2, 6.0).unwrap();
        let spec = ParticleSpec::new(t.clone(), 5, Potential::LennardJones { sigma: 1.0, eps: 1.0, cutoff: None }, 1.0).unwrap();
        let c = ParticleConfig::new(&t, vec![0.5, 0.5, 1.7, 0.6, 0.9, 1.8, 5.5, 1.2, 3.0, 3.1]).unwrap();
        let g = total_gradient(&c, &spec).unwrap();
        assert_close(&g, &fd_gradient(&spec, c.flat(), 1e-6), 1e-5);

        let soft = ParticleSpec::new(t.clone(), 5, Potential::SoftDisk { sigma: 0.5, k: 12, eps: 1.0 }, 1.0).unwrap();
        let g = total_gradient(&c, &soft).unwrap();
        assert_close(&g, &fd_gradient(&soft, c.flat(), 1e-6), 1e-5);

        let t3 = Torus::cubic(3, 10.0).unwrap();
        let bonds = Potential::Bonded(vec![
            BondTerm::Stretch { i: 0, j: 1, r0: 1.0, kb: 3.0 },
            BondTerm::Stretch { i: 1, j: 2, r0: 1.0, kb: 3.0 },
            BondTerm::Angle { i: 0, j: 1, k: 2, phi0: 1.9, ka: 2.0 },
        ]);
        let water = ParticleSpec::new(t3.clone(), 3, bonds, 1.0).unwrap();
        let cw = ParticleConfig::new(&t3, vec![5.9, 5.1, 5.0, 5.0, 5.0, 5.2, 4.6, 5.7, 4.8]).unwrap();
        let g = total_gradient(&cw, &water).unwrap();
        assert_close(&g, &fd_gradient(&water, cw.flat(), 1e-6), 1e-5);
    }

    #[test]
    fn two_particle_total_is_pair_energy() {
        let s = lj(None);
        let c = ParticleConfig::new(&s.torus, vec![1.0, 1.0, 2.3, 1.4]).unwrap();
        let r = s.torus.distance_sq(c.position(0), c.position(1)).sqrt();
        assert_eq!(total_energy(&c, &s).unwrap(), s.pair_energy(r).unwrap());
    }

    #[test]
    fn lattice_start_is_valid() {
        for (n, eta) in [(16, 0.5), (64, 0.7), (7, 0.3), (224, 0.6)] {
            let spec = ParticleSpec::hard_disks(n, eta, 1.0).unwrap();
            assert!((spec.density().unwrap() - eta).abs() < 1e-12);
            let c = lattice_start(&spec).unwrap();
            assert!(hard_disk_valid(&c, &spec).unwrap(), "n {n} eta {eta}");
        }
    }

    #[test]
    fn particle_snapshot_roundtrip() {
        let spec = ParticleSpec::hard_disks(9, 0.3, 1.0).unwrap();
        let mut rng = chain_rng(1);
        let c = random_hard_disk_config(&spec, &mut rng, 100_000).unwrap();
        let text = write_particle_snapshot(&c, &spec).unwrap();
        assert_eq!(read_particle_snapshot(&text, &spec).unwrap(), c);
    }

    proptest! {
        #[test]
        fn translation_invariance(shift in prop::collection::vec(-20.0f64..20.0, 2), seed in 0u64..1000) {
            let t = Torus::cubic(2, 7.0).unwrap();
            let spec = ParticleSpec::new(t.clone(), 4, Potential::LennardJones { sigma: 1.0, eps: 1.0, cutoff: Some(2.0) }, 1.0).unwrap();
            let mut rng = chain_rng(seed);
            let raw: Vec<f64> = (0..8).map(|_| rng.random::<f64>() * 7.0).collect();
            let moved: Vec<f64> = raw.iter().enumerate().map(|(k, x)| x + shift[k % 2]).collect();
            let a = total_energy(&ParticleConfig::new(&t, raw).unwrap(), &spec).unwrap().finite().unwrap();
            let b = total_energy(&ParticleConfig::new(&t, moved).unwrap(), &spec).unwrap().finite().unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }
}
