//! Markov kernels for lattice models: single-site Metropolis and Glauber,
//! Swendsen-Wang and Wolff cluster updates, and event chain Monte Carlo for XY.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{invalid_input, Error, Result};
use crate::lattice::{reduce_angle, Lattice, LatticeConfig, LatticeModel, Spin, Spins};
use crate::rng::ChainRng;

/// `min(1, e^{-x})` with `x = beta dU`.
#[inline]
pub fn metropolis_acceptance(beta_du: f64) -> f64 {
    if beta_du <= 0.0 {
        1.0
    } else {
        (-beta_du).exp()
    }
}

/// `e^{-x} / (1 + e^{-x})` with `x = beta dU`.
#[inline]
pub fn glauber_acceptance(beta_du: f64) -> f64 {
    1.0 / (1.0 + beta_du.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scan {
    #[default]
    Random,
    Systematic,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SweepStats {
    pub proposed: u64,
    pub accepted: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Rule {
    Metropolis,
    Glauber,
}

/// Acceptance table for Ising flips indexed by spin sign and neighbour sum.
fn ising_table(lattice: &Lattice, rule: Rule) -> Vec<f64> {
    let deg = lattice.neighbors.degree() as i32;
    let (j, h, beta) = (lattice.spec.coupling, lattice.spec.field, lattice.spec.beta);
    let mut table = Vec::with_capacity(2 * (2 * deg as usize + 1));
    for s in [-1i32, 1] {
        for sum in -deg..=deg {
            // Flipping x to -x changes U by 2 x (J sum + h).
            let du = 2.0 * s as f64 * (j * sum as f64 + h);
            table.push(match rule {
                Rule::Metropolis => metropolis_acceptance(beta * du),
                Rule::Glauber => glauber_acceptance(beta * du),
            });
        }
    }
    table
}

fn site_order<R: Rng + ?Sized>(scan: Scan, k: usize, n: usize, rng: &mut R) -> usize {
    match scan {
        Scan::Random => rng.random_range(0..n),
        Scan::Systematic => k,
    }
}

fn ising_sweep<R: Rng + ?Sized>(lattice: &Lattice, x: &mut [i8], rule: Rule, scan: Scan, rng: &mut R) -> SweepStats {
    let table = ising_table(lattice, rule);
    let deg = lattice.neighbors.degree() as i32;
    let width = (2 * deg + 1) as usize;
    let n = x.len();
    let mut stats = SweepStats { proposed: n as u64, accepted: 0 };
    for k in 0..n {
        let i = site_order(scan, k, n, rng);
        let sum = lattice.ising_local_field(x, i);
        let idx = if x[i] > 0 { width } else { 0 } + (sum + deg) as usize;
        let a = table[idx];
        if a >= 1.0 || rng.random::<f64>() < a {
            x[i] = -x[i];
            stats.accepted += 1;
        }
    }
    stats
}

/// Default XY Metropolis angular step, in radians.
pub const DEFAULT_XY_STEP: f64 = 1.0;

/// One sweep of `N` single-site Metropolis proposals.
///
/// Ising proposes a sign flip, Potts a uniform different value and XY a
/// uniform angular shift in `[-xy_step, xy_step]`.
pub fn metropolis_sweep<R: Rng + ?Sized>(
    lattice: &Lattice,
    config: &mut LatticeConfig,
    scan: Scan,
    xy_step: f64,
    rng: &mut R,
) -> Result<SweepStats> {
    config.validate(&lattice.spec)?;
    let beta = lattice.spec.beta;
    let n = lattice.sites();
    if let Spins::Ising(x) = &mut config.spins {
        return Ok(ising_sweep(lattice, x, Rule::Metropolis, scan, rng));
    }
    let mut stats = SweepStats { proposed: n as u64, accepted: 0 };
    for k in 0..n {
        let i = site_order(scan, k, n, rng);
        let proposal = match (lattice.spec.model, config.get(i)) {
            (LatticeModel::Potts { q }, Spin::Potts(cur)) => {
                let r = rng.random_range(1..q);
                Spin::Potts(if r >= cur { r + 1 } else { r })
            }
            (LatticeModel::Xy, Spin::Xy(a)) => Spin::Xy(reduce_angle(a + xy_step * (2.0 * rng.random::<f64>() - 1.0))),
            _ => unreachable!("validated configuration"),
        };
        let du = lattice.delta_energy(config, i, proposal)?;
        if rng.random::<f64>() < metropolis_acceptance(beta * du) {
            config.set(i, proposal)?;
            stats.accepted += 1;
        }
    }
    Ok(stats)
}

/// One sweep of `N` Glauber (heat-bath) updates; Ising only.
pub fn glauber_sweep<R: Rng + ?Sized>(lattice: &Lattice, config: &mut LatticeConfig, scan: Scan, rng: &mut R) -> Result<SweepStats> {
    config.validate(&lattice.spec)?;
    match &mut config.spins {
        Spins::Ising(x) => Ok(ising_sweep(lattice, x, Rule::Glauber, scan, rng)),
        _ => Err(Error::Unsupported("Glauber dynamics is implemented for the Ising model only".into())),
    }
}

/// `q_ij = 1 - exp(-2 beta J I(x_i = x_j))`.
pub fn bond_probability(beta: f64, coupling: f64, aligned: bool) -> f64 {
    if aligned {
        -(-2.0 * beta * coupling).exp_m1()
    } else {
        0.0
    }
}

fn cluster_preconditions(lattice: &Lattice) -> Result<()> {
    if lattice.spec.model != LatticeModel::Ising {
        return Err(Error::Unsupported("cluster updates are implemented for the Ising model only".into()));
    }
    if lattice.spec.field != 0.0 {
        return Err(Error::Unsupported("cluster updates require zero field".into()));
    }
    if lattice.spec.coupling <= 0.0 {
        return Err(Error::Unsupported("cluster updates require a ferromagnetic coupling".into()));
    }
    Ok(())
}

fn ising_spins_mut(config: &mut LatticeConfig) -> &mut Vec<i8> {
    match &mut config.spins {
        Spins::Ising(x) => x,
        _ => unreachable!("checked by cluster_preconditions"),
    }
}

/// Bond variables on the `dN` torus edges, indexed `site * d + axis`
/// for the edge from `site` to its `+1` neighbour along `axis`.
#[derive(Debug, Clone, PartialEq)]
pub struct BondField {
    pub dim: usize,
    pub bonds: Vec<bool>,
}

pub fn sample_bonds<R: Rng + ?Sized>(lattice: &Lattice, config: &LatticeConfig, rng: &mut R) -> Result<BondField> {
    cluster_preconditions(lattice)?;
    config.validate(&lattice.spec)?;
    let x = match &config.spins {
        Spins::Ising(x) => x,
        _ => unreachable!(),
    };
    let d = lattice.spec.dim();
    let p = bond_probability(lattice.spec.beta, lattice.spec.coupling, true);
    let mut bonds = Vec::with_capacity(d * x.len());
    for i in 0..x.len() {
        for a in 0..d {
            let j = lattice.neighbors.forward(i, a);
            bonds.push(x[i] == x[j] && rng.random::<f64>() < p);
        }
    }
    Ok(BondField { dim: d, bonds })
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), rank: vec![0; n] }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// One Swendsen-Wang update; returns the number of clusters.
pub fn swendsen_wang_step<R: Rng + ?Sized>(lattice: &Lattice, config: &mut LatticeConfig, rng: &mut R) -> Result<usize> {
    let field = sample_bonds(lattice, config, rng)?;
    let n = lattice.sites();
    let mut uf = UnionFind::new(n);
    for (e, &b) in field.bonds.iter().enumerate() {
        if b {
            uf.union(e / field.dim, lattice.neighbors.forward(e / field.dim, e % field.dim));
        }
    }
    // Decide each cluster's flip once, at its root, in site order.
    let mut flip = vec![None::<bool>; n];
    let mut clusters = 0;
    let x = ising_spins_mut(config);
    for i in 0..n {
        let r = uf.find(i);
        let f = *flip[r].get_or_insert_with(|| {
            clusters += 1;
            rng.random::<bool>()
        });
        if f {
            x[i] = -x[i];
        }
    }
    Ok(clusters)
}

/// One Wolff update; returns the size of the flipped cluster.
pub fn wolff_step<R: Rng + ?Sized>(lattice: &Lattice, config: &mut LatticeConfig, rng: &mut R) -> Result<usize> {
    cluster_preconditions(lattice)?;
    config.validate(&lattice.spec)?;
    let p = bond_probability(lattice.spec.beta, lattice.spec.coupling, true);
    let n = lattice.sites();
    let x = ising_spins_mut(config);
    let seed = rng.random_range(0..n);
    let s = x[seed];
    // Flipping on insertion marks membership: a flipped site is never aligned with `s` again.
    x[seed] = -s;
    let mut stack = vec![seed];
    let mut size = 1;
    while let Some(i) = stack.pop() {
        for &k in lattice.neighbors.of(i) {
            if x[k] == s && rng.random::<f64>() < p {
                x[k] = -s;
                size += 1;
                stack.push(k);
            }
        }
    }
    Ok(size)
}

/// Persistent state of the XY event chain: active spin and angular direction.
#[derive(Debug, Clone, PartialEq)]
pub struct XyEventChain {
    pub active: usize,
    pub direction: f64,
    /// Angular displacement between refreshments.
    pub chain_length: f64,
    /// Displacement since the last refreshment.
    pub travelled: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EcmcStats {
    pub lifts: u64,
    pub refreshes: u64,
    pub factor_evaluations: u64,
}

impl XyEventChain {
    /// Default chain length `2 pi N`.
    pub fn new<R: Rng + ?Sized>(lattice: &Lattice, rng: &mut R) -> Self {
        Self::with_chain_length(lattice, TAU * lattice.sites() as f64, rng)
    }

    pub fn with_chain_length<R: Rng + ?Sized>(lattice: &Lattice, chain_length: f64, rng: &mut R) -> Self {
        let mut s = Self { active: 0, direction: 1.0, chain_length, travelled: 0.0 };
        s.refresh(lattice.sites(), rng);
        s
    }

    /// Resamples the active spin and direction uniformly; both are
    /// independent of the spins under the lifted target.
    fn refresh<R: Rng + ?Sized>(&mut self, n: usize, rng: &mut R) {
        self.active = rng.random_range(0..n);
        self.direction = if rng.random::<bool>() { 1.0 } else { -1.0 };
        self.travelled = 0.0;
    }
}

/// Event rate of the factor `-J cos(x_i - x_j)` when `x_i` moves with velocity `v`.
pub fn xy_factor_rate(beta: f64, coupling: f64, xi: f64, xj: f64, v: f64) -> f64 {
    beta * (coupling * (xi - xj).sin() * v).max(0.0)
}

/// Time until the factor `-J cos(theta)` has risen by `budget` along its
/// increasing stretches, where `theta = v (x_i - x_j)` advances at unit rate.
pub fn xy_event_time(theta: f64, coupling: f64, budget: f64) -> f64 {
    let theta = reduce_angle(theta);
    let mut t = 0.0;
    let mut b = budget;
    let mut th = theta;
    if th >= PI {
        t += TAU - th;
        th = 0.0;
    }
    // Rise available before the maximum at theta = pi.
    let rise = coupling * (1.0 + th.cos());
    if b <= rise {
        return t + ((th.cos() - b / coupling).clamp(-1.0, 1.0)).acos() - th;
    }
    b -= rise;
    t += TAU - th;
    let cycle = 2.0 * coupling;
    let full = (b / cycle).floor();
    b -= full * cycle;
    t += full * TAU;
    t + (1.0 - b / coupling).clamp(-1.0, 1.0).acos()
}

/// Runs the XY event chain for a total angular displacement `duration`.
pub fn ecmc_xy_run<R: Rng + ?Sized>(
    lattice: &Lattice,
    config: &mut LatticeConfig,
    state: &mut XyEventChain,
    duration: f64,
    rng: &mut R,
) -> Result<EcmcStats> {
    if lattice.spec.model != LatticeModel::Xy {
        return Err(Error::Unsupported("event chain kernel is implemented for the XY model".into()));
    }
    if lattice.spec.field_xy != [0.0, 0.0] {
        return Err(Error::Unsupported("event chain XY requires zero field".into()));
    }
    if lattice.spec.coupling <= 0.0 {
        return Err(Error::Unsupported("event chain XY requires J > 0".into()));
    }
    if !(duration >= 0.0 && duration.is_finite()) || !(state.chain_length > 0.0) {
        return Err(invalid_input("duration and chain length must be positive"));
    }
    config.validate(&lattice.spec)?;
    let (beta, j) = (lattice.spec.beta, lattice.spec.coupling);
    let n = lattice.sites();
    let x = match &mut config.spins {
        Spins::Xy(x) => x,
        _ => unreachable!(),
    };
    let mut stats = EcmcStats::default();
    let mut left = duration;
    while left > 0.0 {
        let i = state.active;
        let v = state.direction;
        let mut best = f64::INFINITY;
        let mut winner = i;
        for &k in lattice.neighbors.of(i) {
            let e: f64 = Exp1.sample(rng);
            let t = xy_event_time(v * (x[i] - x[k]), j, e / beta);
            stats.factor_evaluations += 1;
            if t < best {
                best = t;
                winner = k;
            }
        }
        let until_refresh = state.chain_length - state.travelled;
        let step = best.min(left).min(until_refresh);
        x[i] = reduce_angle(x[i] + v * step);
        left -= step;
        state.travelled += step;
        if step == until_refresh {
            state.refresh(n, rng);
            stats.refreshes += 1;
        } else if step == best {
            state.active = winner;
            stats.lifts += 1;
        }
    }
    Ok(stats)
}

/// Sampler choice for a lattice chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LatticeKernel {
    Metropolis { scan: Scan, xy_step: f64 },
    Glauber { scan: Scan },
    SwendsenWang,
    Wolff,
    /// `interval` is the angular displacement per step.
    EcmcXy { chain_length: f64, interval: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepInfo {
    pub cluster_size: Option<usize>,
    pub accepted: u64,
    pub factor_evaluations: u64,
}

/// A lattice Markov chain: configuration, kernel, generator and step counter.
///
/// One step is a sweep (Metropolis, Glauber), a cluster update (Swendsen-Wang,
/// Wolff) or `interval` of angular displacement (event chain).
#[derive(Debug, Clone)]
pub struct LatticeChain {
    pub lattice: Lattice,
    pub config: LatticeConfig,
    pub kernel: LatticeKernel,
    pub rng: ChainRng,
    pub steps: u64,
    pub ecmc: Option<XyEventChain>,
}

impl LatticeChain {
    pub fn new(lattice: Lattice, config: LatticeConfig, kernel: LatticeKernel, mut rng: ChainRng) -> Result<Self> {
        config.validate(&lattice.spec)?;
        let ecmc = match kernel {
            LatticeKernel::EcmcXy { chain_length, .. } => Some(XyEventChain::with_chain_length(&lattice, chain_length, &mut rng)),
            _ => None,
        };
        Ok(Self { lattice, config, kernel, rng, steps: 0, ecmc })
    }

    pub fn step(&mut self) -> Result<StepInfo> {
        let deg = self.lattice.neighbors.degree() as u64;
        let n = self.lattice.sites() as u64;
        let info = match self.kernel {
            LatticeKernel::Metropolis { scan, xy_step } => {
                let s = metropolis_sweep(&self.lattice, &mut self.config, scan, xy_step, &mut self.rng)?;
                StepInfo { cluster_size: None, accepted: s.accepted, factor_evaluations: 2 * deg * n }
            }
            LatticeKernel::Glauber { scan } => {
                let s = glauber_sweep(&self.lattice, &mut self.config, scan, &mut self.rng)?;
                StepInfo { cluster_size: None, accepted: s.accepted, factor_evaluations: deg * n }
            }
            LatticeKernel::SwendsenWang => {
                let c = swendsen_wang_step(&self.lattice, &mut self.config, &mut self.rng)?;
                StepInfo { cluster_size: Some(c), accepted: 0, factor_evaluations: deg * n / 2 }
            }
            LatticeKernel::Wolff => {
                let c = wolff_step(&self.lattice, &mut self.config, &mut self.rng)?;
                StepInfo { cluster_size: Some(c), accepted: 1, factor_evaluations: deg * c as u64 }
            }
            LatticeKernel::EcmcXy { interval, .. } => {
                let state = self.ecmc.as_mut().expect("event chain state");
                let s = ecmc_xy_run(&self.lattice, &mut self.config, state, interval, &mut self.rng)?;
                StepInfo { cluster_size: None, accepted: s.lifts, factor_evaluations: s.factor_evaluations }
            }
        };
        self.steps += 1;
        Ok(info)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::ExactEnsemble;
    use crate::lattice::{magnetic_density, LatticeSpec};
    use crate::rng::chain_rng;

    fn ising(dims: Vec<usize>, beta: f64) -> Lattice {
        Lattice::new(LatticeSpec::ising(dims, 1.0, 0.0, beta).unwrap()).unwrap()
    }

    #[test]
    fn acceptance_functions() {
        assert_eq!(metropolis_acceptance(0.0), 1.0);
        assert!((metropolis_acceptance(2f64.ln()) - 0.5).abs() < 1e-15);
        assert_eq!(glauber_acceptance(0.0), 0.5);
        assert!((glauber_acceptance(3f64.ln()) - 0.25).abs() < 1e-15);
        for x in [-3.0, -0.1, 0.2, 5.0] {
            assert!(glauber_acceptance(x) < metropolis_acceptance(x));
        }
        assert_eq!(glauber_acceptance(0.0), 0.5 * metropolis_acceptance(0.0));
    }

    #[test]
    fn bond_probability_values() {
        assert_eq!(bond_probability(0.5, 1.0, false), 0.0);
        assert!((bond_probability(0.5, 1.0, true) - 0.63212).abs() < 1e-5);
        assert!(bond_probability(1e-12, 1.0, true) < 1e-11);
    }

    #[test]
    fn bonds_only_join_aligned_spins() {
        let lat = ising(vec![6, 5], 0.9);
        let mut rng = chain_rng(4);
        let mut c = LatticeConfig::random(&lat.spec, &mut rng);
        for _ in 0..50 {
            let f = sample_bonds(&lat, &c, &mut rng).unwrap();
            assert_eq!(f.bonds.len(), 2 * 30);
            let Spins::Ising(x) = &c.spins else { unreachable!() };
            for (e, &b) in f.bonds.iter().enumerate() {
                let (i, a) = (e / 2, e % 2);
                assert!(!b || x[i] == x[lat.neighbors.forward(i, a)]);
            }
            swendsen_wang_step(&lat, &mut c, &mut rng).unwrap();
        }
    }

    #[test]
    fn cluster_preconditions_enforced() {
        let mut rng = chain_rng(0);
        let field = Lattice::new(LatticeSpec::ising(vec![4, 4], 1.0, 0.1, 0.5).unwrap()).unwrap();
        let mut c = LatticeConfig::ordered(&field.spec);
        assert!(matches!(wolff_step(&field, &mut c, &mut rng), Err(Error::Unsupported(_))));
        assert!(matches!(swendsen_wang_step(&field, &mut c, &mut rng), Err(Error::Unsupported(_))));
        let potts = Lattice::new(LatticeSpec::potts(vec![4, 4], 3, 1.0, 0.5).unwrap()).unwrap();
        let mut cp = LatticeConfig::ordered(&potts.spec);
        assert!(glauber_sweep(&potts, &mut cp, Scan::Random, &mut rng).is_err());
        assert!(metropolis_sweep(&potts, &mut cp, Scan::Random, 1.0, &mut rng).is_ok());
    }

    #[test]
    fn wolff_limits() {
        let mut rng = chain_rng(1);
        let hot = ising(vec![8, 8], 1e-9);
        let mut c = LatticeConfig::ordered(&hot.spec);
        for _ in 0..100 {
            assert_eq!(wolff_step(&hot, &mut c, &mut rng).unwrap(), 1);
        }
        let cold = ising(vec![8, 8], 50.0);
        let mut c = LatticeConfig::ordered(&cold.spec);
        assert_eq!(wolff_step(&cold, &mut c, &mut rng).unwrap(), 64);
        assert_eq!(magnetic_density(&c).norm(), 1.0);
        let Spins::Ising(x) = &c.spins else { unreachable!() };
        assert!(x.iter().all(|&s| s == -1));
    }

    #[test]
    fn glauber_matches_conditional_probability() {
        // Fix neighbours of site 0 on a 3x3 lattice; the flip frequency of a single
        // Glauber update at site 0 equals the heat-bath conditional.
        let lat = ising(vec![3, 3], 0.6);
        let mut rng = chain_rng(8);
        let base = LatticeConfig { spins: Spins::Ising(vec![1, 1, -1, 1, 1, 1, 1, 1, 1]) };
        let du = lat.delta_energy(&base, 0, Spin::Ising(-1)).unwrap();
        let expected = glauber_acceptance(0.6 * du);
        let table = ising_table(&lat, Rule::Glauber);
        let Spins::Ising(x) = &base.spins else { unreachable!() };
        let sum = lat.ising_local_field(x, 0);
        assert_eq!(sum, 2);
        let trials = 200_000;
        let flips = (0..trials).filter(|_| rng.random::<f64>() < table[9 + (sum + 4) as usize]).count();
        let p = flips as f64 / trials as f64;
        let se = (expected * (1.0 - expected) / trials as f64).sqrt();
        assert!((p - expected).abs() < 4.0 * se, "{p} vs {expected}");
    }

    fn empirical_abs_m(lat: &Lattice, kernel: LatticeKernel, steps: usize, seed: u64) -> f64 {
        let c = LatticeConfig::random(&lat.spec, &mut chain_rng(seed));
        let mut chain = LatticeChain::new(lat.clone(), c, kernel, chain_rng(seed + 1)).unwrap();
        for _ in 0..1000 {
            chain.step().unwrap();
        }
        let mut acc = 0.0;
        for _ in 0..steps {
            chain.step().unwrap();
            acc += magnetic_density(&chain.config).norm();
        }
        acc / steps as f64
    }

    #[test]
    fn samplers_reproduce_small_lattice_magnetization() {
        let lat = ising(vec![2, 2], 0.4);
        let exact = ExactEnsemble::new(&lat.spec).unwrap().mean_abs_magnetization();
        for kernel in [
            LatticeKernel::Metropolis { scan: Scan::Random, xy_step: 1.0 },
            LatticeKernel::Glauber { scan: Scan::Random },
            LatticeKernel::SwendsenWang,
            LatticeKernel::Wolff,
        ] {
            let m = empirical_abs_m(&lat, kernel, 200_000, 11);
            assert!((m - exact).abs() < 0.01, "{kernel:?}: {m} vs {exact}");
        }
    }

    #[test]
    fn systematic_scan_visits_every_site() {
        // At infinite temperature every flip is accepted, so one systematic sweep
        // negates the whole configuration.
        let lat = ising(vec![3, 4], 1e-12);
        let mut rng = chain_rng(6);
        let start = LatticeConfig::random(&lat.spec, &mut rng);
        let mut c = start.clone();
        let stats = metropolis_sweep(&lat, &mut c, Scan::Systematic, 1.0, &mut rng).unwrap();
        assert_eq!(stats.accepted, 12);
        let (Spins::Ising(a), Spins::Ising(b)) = (&start.spins, &c.spins) else { unreachable!() };
        assert!(a.iter().zip(b).all(|(x, y)| *x == -*y));
    }

    #[test]
    fn potts_metropolis_matches_enumeration() {
        let lat = Lattice::new(LatticeSpec::potts(vec![2, 2], 3, 1.0, 0.8).unwrap()).unwrap();
        let e = ExactEnsemble::new(&lat.spec).unwrap();
        let exact = e.expectation(|s| e.energies[s]);
        let mut c = LatticeConfig::random(&lat.spec, &mut chain_rng(2));
        let mut rng = chain_rng(3);
        let mut acc = 0.0;
        let steps = 200_000;
        for _ in 0..steps {
            metropolis_sweep(&lat, &mut c, Scan::Random, 1.0, &mut rng).unwrap();
            acc += lat.energy(&c).unwrap();
        }
        assert!((acc / steps as f64 - exact).abs() < 0.05);
    }

    #[test]
    fn xy_rate_examples() {
        assert!((xy_factor_rate(2.0, 1.5, PI / 2.0, 0.0, 1.0) - 3.0).abs() < 1e-15);
        assert_eq!(xy_factor_rate(2.0, 1.5, -PI / 2.0, 0.0, 1.0), 0.0);
        assert_eq!(xy_factor_rate(2.0, 1.5, PI / 2.0, 0.0, -1.0), 0.0);
    }

    #[test]
    fn xy_event_time_inverts_integrated_rate() {
        // Integrate the positive part of d/dt(-J cos theta) numerically and compare.
        let j = 1.3;
        for (theta, budget) in [(0.3, 0.5), (2.0, 0.1), (4.0, 1.0), (1.0, 7.9), (5.5, 2.6), (0.0, 2.6)] {
            let t = xy_event_time(theta, j, budget);
            let steps = 200_000;
            let h = t / steps as f64;
            let mut acc = 0.0;
            for s in 0..steps {
                let th = theta + (s as f64 + 0.5) * h;
                acc += (j * th.sin()).max(0.0) * h;
            }
            assert!((acc - budget).abs() < 1e-6, "theta {theta} budget {budget}: {acc}");
        }
    }

    #[test]
    fn xy_event_chain_preserves_two_spin_law() {
        // 1D ring of two XY spins: the angle difference has density proportional
        // to exp(2 beta J cos(delta)) (two neighbour entries per site).
        let lat = Lattice::new(LatticeSpec::xy(vec![2], 1.0, [0.0; 2], 0.7).unwrap()).unwrap();
        let mut c = LatticeConfig::ordered(&lat.spec);
        let mut rng = chain_rng(5);
        let mut st = XyEventChain::with_chain_length(&lat, 3.0, &mut rng);
        let mut cos_sum = 0.0;
        let samples = 100_000;
        for _ in 0..samples {
            ecmc_xy_run(&lat, &mut c, &mut st, 0.7, &mut rng).unwrap();
            let Spins::Xy(x) = &c.spins else { unreachable!() };
            cos_sum += (x[0] - x[1]).cos();
        }
        // E[cos] = I1(a)/I0(a) with a = 2 beta J, by quadrature.
        let a = 1.4;
        let m = 20_000;
        let (mut num, mut den) = (0.0, 0.0);
        for s in 0..m {
            let d = (s as f64 + 0.5) * TAU / m as f64;
            let w = (a * d.cos()).exp();
            num += d.cos() * w;
            den += w;
        }
        assert!((cos_sum / samples as f64 - num / den).abs() < 0.02);
    }

    #[test]
    fn xy_event_chain_rejects_field() {
        let lat = Lattice::new(LatticeSpec::xy(vec![4, 4], 1.0, [0.1, 0.0], 1.0).unwrap()).unwrap();
        let mut c = LatticeConfig::ordered(&lat.spec);
        let mut rng = chain_rng(0);
        let mut st = XyEventChain::new(&lat, &mut rng);
        assert!(matches!(ecmc_xy_run(&lat, &mut c, &mut st, 1.0, &mut rng), Err(Error::Unsupported(_))));
    }
}
