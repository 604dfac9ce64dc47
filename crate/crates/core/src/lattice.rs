//! Ising, Potts and XY models on periodic d-dimensional cubic lattices.
//!
//! Sites are indexed row-major with the first axis varying slowest. Every site
//! has exactly `2d` neighbour entries; on an axis with two sites the `+1` and
//! `-1` neighbours coincide and the entry appears twice, exactly as the
//! double-counted pair sum over `S_i` requires.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::error::{invalid_input, invalid_state, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LatticeModel {
    Ising,
    Potts { q: u16 },
    Xy,
}

impl LatticeModel {
    pub fn token(&self) -> String {
        match self {
            LatticeModel::Ising => "ising".into(),
            LatticeModel::Potts { q } => format!("potts{q}"),
            LatticeModel::Xy => "xy".into(),
        }
    }

    pub fn from_token(s: &str) -> Result<Self> {
        match s {
            "ising" => Ok(LatticeModel::Ising),
            "xy" => Ok(LatticeModel::Xy),
            _ => match s.strip_prefix("potts").map(str::parse::<u16>) {
                Some(Ok(q)) => Ok(LatticeModel::Potts { q }),
                _ => Err(invalid_input(format!("unknown lattice model `{s}`"))),
            },
        }
    }
}

/// Model, geometry and hyperparameters of a lattice system.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec {
    pub dims: Vec<usize>,
    pub model: LatticeModel,
    /// Exchange constant `J`.
    pub coupling: f64,
    /// Scalar field `h` (Ising only).
    pub field: f64,
    /// Planar field `h_XY` (XY only).
    pub field_xy: [f64; 2],
    pub beta: f64,
}

impl LatticeSpec {
    pub fn ising(dims: Vec<usize>, coupling: f64, field: f64, beta: f64) -> Result<Self> {
        Self::new(dims, LatticeModel::Ising, coupling, field, [0.0; 2], beta)
    }

    pub fn potts(dims: Vec<usize>, q: u16, coupling: f64, beta: f64) -> Result<Self> {
        Self::new(dims, LatticeModel::Potts { q }, coupling, 0.0, [0.0; 2], beta)
    }

    pub fn xy(dims: Vec<usize>, coupling: f64, field_xy: [f64; 2], beta: f64) -> Result<Self> {
        Self::new(dims, LatticeModel::Xy, coupling, 0.0, field_xy, beta)
    }

    pub fn new(
        dims: Vec<usize>,
        model: LatticeModel,
        coupling: f64,
        field: f64,
        field_xy: [f64; 2],
        beta: f64,
    ) -> Result<Self> {
        let spec = Self { dims, model, coupling, field, field_xy, beta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(invalid_input("lattice needs at least one axis"));
        }
        if let Some(n) = self.dims.iter().find(|&&n| n < 2) {
            return Err(invalid_input(format!("every axis needs at least 2 sites, got {n}")));
        }
        if let LatticeModel::Potts { q } = self.model {
            if q < 2 {
                return Err(invalid_input(format!("Potts model needs q >= 2, got {q}")));
            }
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(invalid_input(format!("beta must be positive, got {}", self.beta)));
        }
        if !self.coupling.is_finite() || !self.field.is_finite() || !self.field_xy.iter().all(|h| h.is_finite()) {
            return Err(invalid_input("coupling and fields must be finite"));
        }
        Ok(())
    }

    pub fn sites(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        let mut s = self.clone();
        s.beta = beta;
        s.validate()?;
        Ok(s)
    }

    pub fn dims_token(&self) -> String {
        self.dims.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("x")
    }

    /// Short content hash of the spec, used in snapshot headers.
    pub fn hash(&self) -> String {
        let canonical = format!(
            "{}|{}|{:e}|{:e}|{:e},{:e}|{:e}",
            self.model.token(),
            self.dims_token(),
            self.coupling,
            self.field,
            self.field_xy[0],
            self.field_xy[1],
            self.beta
        );
        short_hash(canonical.as_bytes())
    }
}

pub(crate) fn short_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().take(8).fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Precomputed `2d` neighbour indices per site.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTable {
    degree: usize,
    table: Vec<usize>,
}

impl NeighborTable {
    pub fn new(dims: &[usize]) -> Self {
        let n: usize = dims.iter().product();
        let d = dims.len();
        let mut strides = vec![1usize; d];
        for a in (0..d.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * dims[a + 1];
        }
        let mut table = Vec::with_capacity(n * 2 * d);
        for site in 0..n {
            for a in 0..d {
                let coord = (site / strides[a]) % dims[a];
                let base = site - coord * strides[a];
                let up = (coord + 1) % dims[a];
                let down = (coord + dims[a] - 1) % dims[a];
                table.push(base + up * strides[a]);
                table.push(base + down * strides[a]);
            }
        }
        Self { degree: 2 * d, table }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn sites(&self) -> usize {
        self.table.len() / self.degree
    }

    #[inline]
    pub fn of(&self, site: usize) -> &[usize] {
        &self.table[site * self.degree..(site + 1) * self.degree]
    }

    /// The `+1` neighbour along `axis`; iterating it over all sites and axes
    /// lists each of the `dN` lattice edges once.
    #[inline]
    pub fn forward(&self, site: usize, axis: usize) -> usize {
        self.table[site * self.degree + 2 * axis]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Spin {
    Ising(i8),
    Potts(u16),
    Xy(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Spins {
    Ising(Vec<i8>),
    Potts(Vec<u16>),
    Xy(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeConfig {
    pub spins: Spins,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Magnetization {
    Scalar(f64),
    Vector([f64; 2]),
}

impl Magnetization {
    pub fn norm(&self) -> f64 {
        match *self {
            Magnetization::Scalar(m) => m.abs(),
            Magnetization::Vector([x, y]) => x.hypot(y),
        }
    }
}

impl LatticeConfig {
    pub fn len(&self) -> usize {
        match &self.spins {
            Spins::Ising(v) => v.len(),
            Spins::Potts(v) => v.len(),
            Spins::Xy(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All spins aligned: `+1`, state `1`, or angle `0`.
    pub fn ordered(spec: &LatticeSpec) -> Self {
        let n = spec.sites();
        let spins = match spec.model {
            LatticeModel::Ising => Spins::Ising(vec![1; n]),
            LatticeModel::Potts { .. } => Spins::Potts(vec![1; n]),
            LatticeModel::Xy => Spins::Xy(vec![0.0; n]),
        };
        Self { spins }
    }

    /// Independent uniform spins (the infinite-temperature state).
    pub fn random<R: Rng + ?Sized>(spec: &LatticeSpec, rng: &mut R) -> Self {
        let n = spec.sites();
        let spins = match spec.model {
            LatticeModel::Ising => Spins::Ising((0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect()),
            LatticeModel::Potts { q } => Spins::Potts((0..n).map(|_| rng.random_range(1..=q)).collect()),
            LatticeModel::Xy => Spins::Xy((0..n).map(|_| rng.random::<f64>() * TAU).collect()),
        };
        Self { spins }
    }

    pub fn get(&self, site: usize) -> Spin {
        match &self.spins {
            Spins::Ising(v) => Spin::Ising(v[site]),
            Spins::Potts(v) => Spin::Potts(v[site]),
            Spins::Xy(v) => Spin::Xy(v[site]),
        }
    }

    /// Sets a spin, reducing XY angles mod 2π.
    pub fn set(&mut self, site: usize, value: Spin) -> Result<()> {
        match (&mut self.spins, value) {
            (Spins::Ising(v), Spin::Ising(s)) => v[site] = s,
            (Spins::Potts(v), Spin::Potts(s)) => v[site] = s,
            (Spins::Xy(v), Spin::Xy(a)) => v[site] = reduce_angle(a),
            _ => return Err(invalid_input("spin kind does not match configuration")),
        }
        Ok(())
    }

    pub fn validate(&self, spec: &LatticeSpec) -> Result<()> {
        if self.len() != spec.sites() {
            return Err(invalid_state(format!(
                "configuration has {} sites, spec needs {}",
                self.len(),
                spec.sites()
            )));
        }
        match (&self.spins, spec.model) {
            (Spins::Ising(v), LatticeModel::Ising) => {
                if let Some(s) = v.iter().find(|&&s| s != 1 && s != -1) {
                    return Err(invalid_state(format!("Ising spin {s} not in {{-1, +1}}")));
                }
            }
            (Spins::Potts(v), LatticeModel::Potts { q }) => {
                if let Some(s) = v.iter().find(|&&s| s < 1 || s > q) {
                    return Err(invalid_state(format!("Potts spin {s} not in 1..={q}")));
                }
            }
            (Spins::Xy(v), LatticeModel::Xy) => {
                if let Some(a) = v.iter().find(|a| !(a.is_finite() && **a >= 0.0 && **a < TAU)) {
                    return Err(invalid_state(format!("XY angle {a} not in [0, 2pi)")));
                }
            }
            _ => return Err(invalid_state("configuration model does not match spec")),
        }
        Ok(())
    }
}

#[inline]
pub fn reduce_angle(a: f64) -> f64 {
    crate::torus::wrap_coord(a, TAU)
}

/// Spec plus precomputed neighbour table.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub spec: LatticeSpec,
    pub neighbors: NeighborTable,
}

impl Lattice {
    pub fn new(spec: LatticeSpec) -> Result<Self> {
        spec.validate()?;
        let neighbors = NeighborTable::new(&spec.dims);
        Ok(Self { spec, neighbors })
    }

    pub fn sites(&self) -> usize {
        self.spec.sites()
    }

    /// Full potential, written as the double-counted neighbour sum with prefactor 1/2.
    pub fn energy(&self, config: &LatticeConfig) -> Result<f64> {
        config.validate(&self.spec)?;
        let j = self.spec.coupling;
        let n = self.sites();
        let u = match &config.spins {
            Spins::Ising(x) => {
                let mut pair = 0.0;
                let mut total = 0.0;
                for i in 0..n {
                    let xi = x[i] as f64;
                    for &k in self.neighbors.of(i) {
                        pair += xi * x[k] as f64;
                    }
                    total += xi;
                }
                -0.5 * j * pair - self.spec.field * total
            }
            Spins::Potts(x) => {
                let mut pair = 0.0;
                for i in 0..n {
                    for &k in self.neighbors.of(i) {
                        if x[i] == x[k] {
                            pair += 1.0;
                        }
                    }
                }
                -0.5 * j * pair
            }
            Spins::Xy(x) => {
                let mut pair = 0.0;
                let (mut cx, mut sy) = (0.0, 0.0);
                for i in 0..n {
                    for &k in self.neighbors.of(i) {
                        pair += (x[i] - x[k]).cos();
                    }
                    cx += x[i].cos();
                    sy += x[i].sin();
                }
                -0.5 * j * pair - (self.spec.field_xy[0] * cx + self.spec.field_xy[1] * sy)
            }
        };
        Ok(u)
    }

    /// Energy change from setting `site` to `proposed`, from the `2d` neighbour terms only.
    pub fn delta_energy(&self, config: &LatticeConfig, site: usize, proposed: Spin) -> Result<f64> {
        if site >= self.sites() {
            return Err(invalid_input(format!("site {site} out of range")));
        }
        let nb = self.neighbors.of(site);
        let j = self.spec.coupling;
        match (&config.spins, proposed) {
            (Spins::Ising(x), Spin::Ising(s)) => {
                if s != 1 && s != -1 {
                    return Err(invalid_state(format!("Ising spin {s} not in {{-1, +1}}")));
                }
                let dx = (s - x[site]) as f64;
                let sum: i32 = nb.iter().map(|&k| x[k] as i32).sum();
                Ok(-j * dx * sum as f64 - self.spec.field * dx)
            }
            (Spins::Potts(x), Spin::Potts(s)) => {
                let q = match self.spec.model {
                    LatticeModel::Potts { q } => q,
                    _ => return Err(invalid_state("Potts spin on non-Potts lattice")),
                };
                if s < 1 || s > q {
                    return Err(invalid_state(format!("Potts spin {s} not in 1..={q}")));
                }
                let old = x[site];
                let mut d = 0i32;
                for &k in nb {
                    d += (x[k] == s) as i32 - (x[k] == old) as i32;
                }
                Ok(-j * d as f64)
            }
            (Spins::Xy(x), Spin::Xy(a)) => {
                if !a.is_finite() {
                    return Err(invalid_state("non-finite XY angle"));
                }
                let old = x[site];
                let mut d = 0.0;
                for &k in nb {
                    d += (a - x[k]).cos() - (old - x[k]).cos();
                }
                let h = self.spec.field_xy;
                let dfield = h[0] * (a.cos() - old.cos()) + h[1] * (a.sin() - old.sin());
                Ok(-j * d - dfield)
            }
            _ => Err(invalid_state("spin kind does not match configuration")),
        }
    }

    /// Sum of neighbour spins of an Ising site.
    #[inline]
    pub fn ising_local_field(&self, x: &[i8], site: usize) -> i32 {
        self.neighbors.of(site).iter().map(|&k| x[k] as i32).sum()
    }
}

/// Magnetic density: `(1/N) sum x_i` for Ising, the planar mean for XY.
///
/// Potts uses the state-1 indicator rescaled to `[-1/(q-1), 1]`,
/// `(q n_1 / N - 1) / (q - 1)`, which equals the Ising value for `q = 2`
/// under the map `1 -> +1, 2 -> -1`.
pub fn magnetic_density(config: &LatticeConfig) -> Magnetization {
    match &config.spins {
        Spins::Ising(x) => {
            let s: i64 = x.iter().map(|&v| v as i64).sum();
            Magnetization::Scalar(s as f64 / x.len() as f64)
        }
        Spins::Potts(x) => {
            let q = x.iter().copied().max().unwrap_or(2).max(2) as f64;
            let n1 = x.iter().filter(|&&v| v == 1).count() as f64;
            Magnetization::Scalar((q * n1 / x.len() as f64 - 1.0) / (q - 1.0))
        }
        Spins::Xy(x) => {
            let n = x.len() as f64;
            let (c, s) = x.iter().fold((0.0, 0.0), |(c, s), a| (c + a.cos(), s + a.sin()));
            Magnetization::Vector([c / n, s / n])
        }
    }
}

/// Potts magnetic density with an explicit `q` (the config alone cannot know it).
pub fn potts_magnetic_density(config: &LatticeConfig, q: u16) -> Result<f64> {
    match &config.spins {
        Spins::Potts(x) => {
            let q = q as f64;
            let n1 = x.iter().filter(|&&v| v == 1).count() as f64;
            Ok((q * n1 / x.len() as f64 - 1.0) / (q - 1.0))
        }
        _ => Err(invalid_input("not a Potts configuration")),
    }
}

/// Magnetic density for any model, using the spec for Potts `q`.
pub fn magnetization(config: &LatticeConfig, spec: &LatticeSpec) -> Magnetization {
    match spec.model {
        LatticeModel::Potts { q } => Magnetization::Scalar(potts_magnetic_density(config, q).unwrap_or(f64::NAN)),
        _ => magnetic_density(config),
    }
}

/// Writes a snapshot: header `model dims spec-hash`, then one spin per line.
pub fn write_snapshot(config: &LatticeConfig, spec: &LatticeSpec) -> Result<String> {
    config.validate(spec)?;
    let mut out = format!("{} {} {}\n", spec.model.token(), spec.dims_token(), spec.hash());
    match &config.spins {
        Spins::Ising(x) => x.iter().for_each(|s| {
            let _ = writeln!(out, "{s}");
        }),
        Spins::Potts(x) => x.iter().for_each(|s| {
            let _ = writeln!(out, "{s}");
        }),
        // `{}` on f64 prints the shortest representation that round-trips.
        Spins::Xy(x) => x.iter().for_each(|a| {
            let _ = writeln!(out, "{a}");
        }),
    }
    Ok(out)
}

/// Parses a snapshot, checking it against `spec` (model, dims and hash).
pub fn read_snapshot(text: &str, spec: &LatticeSpec) -> Result<LatticeConfig> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| invalid_input("empty snapshot"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(invalid_input(format!("malformed snapshot header `{header}`")));
    }
    let model = LatticeModel::from_token(fields[0])?;
    if model != spec.model || fields[1] != spec.dims_token() || fields[2] != spec.hash() {
        return Err(invalid_input(format!(
            "snapshot header `{header}` does not match spec `{} {} {}`",
            spec.model.token(),
            spec.dims_token(),
            spec.hash()
        )));
    }
    let bad = |l: &str| Error::InvalidInput(format!("bad spin value `{l}`"));
    let body: Vec<&str> = lines.filter(|l| !l.trim().is_empty()).collect();
    let spins = match model {
        LatticeModel::Ising => Spins::Ising(body.iter().map(|l| l.trim().parse().map_err(|_| bad(l))).collect::<Result<_>>()?),
        LatticeModel::Potts { .. } => Spins::Potts(body.iter().map(|l| l.trim().parse().map_err(|_| bad(l))).collect::<Result<_>>()?),
        LatticeModel::Xy => Spins::Xy(body.iter().map(|l| l.trim().parse().map_err(|_| bad(l))).collect::<Result<_>>()?),
    };
    let config = LatticeConfig { spins };
    config.validate(spec)?;
    Ok(config)
}
