//! Estimators over sample traces and particle configurations.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{invalid_input, Error, Result};
use crate::particles::{ParticleConfig, ParticleSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TimeUnit {
    MetropolisSweep,
    WolffStep,
    EcmcEventTime,
    MdTime,
}

impl TimeUnit {
    pub fn token(&self) -> &'static str {
        match self {
            TimeUnit::MetropolisSweep => "metropolis_sweep",
            TimeUnit::WolffStep => "wolff_step",
            TimeUnit::EcmcEventTime => "ecmc_event_time",
            TimeUnit::MdTime => "md_time",
        }
    }

    pub fn from_token(token: &str) -> Result<Self> {
        Ok(match token {
            "metropolis_sweep" => TimeUnit::MetropolisSweep,
            "wolff_step" => TimeUnit::WolffStep,
            "ecmc_event_time" => TimeUnit::EcmcEventTime,
            "md_time" => TimeUnit::MdTime,
            other => return Err(invalid_input(format!("unknown time unit {other:?}"))),
        })
    }
}

/// A scalar trace sampled every `interval` time units, with its burn-in still attached.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSeries {
    pub values: Vec<f64>,
    pub time_unit: TimeUnit,
    pub interval: f64,
    pub burn_in: usize,
}

impl ObservableSeries {
    pub fn new(values: Vec<f64>, time_unit: TimeUnit, interval: f64, burn_in: usize) -> Result<Self> {
        if burn_in >= values.len() {
            return Err(invalid_input(format!("burn-in {burn_in} leaves nothing of {} samples", values.len())));
        }
        if !(interval > 0.0) {
            return Err(invalid_input("sampling interval must be positive"));
        }
        Ok(Self { values, time_unit, interval, burn_in })
    }

    /// Samples after burn-in.
    pub fn kept(&self) -> &[f64] {
        &self.values[self.burn_in..]
    }
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::InsufficientData("variance needs at least two samples".into()));
    }
    let m = mean(x);
    Ok(x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64)
}

/// `beta^2 Var[U]` of the energies kept after burn-in.
pub fn specific_heat_estimate(energies: &ObservableSeries, beta: f64) -> Result<f64> {
    Ok(beta * beta * sample_variance(energies.kept())?)
}

/// Mean and standard error from `batches` contiguous batch means.
pub fn batch_means(x: &[f64], batches: usize) -> Result<(f64, f64)> {
    if batches < 2 || x.len() < batches {
        return Err(Error::InsufficientData(format!("{} samples cannot form {batches} batches", x.len())));
    }
    let size = x.len() / batches;
    let means: Vec<f64> = x.chunks_exact(size).take(batches).map(mean).collect();
    Ok((mean(&means), (sample_variance(&means)? / batches as f64).sqrt()))
}

/// Mean and standard error across independent per-chain estimates.
pub fn combine_chains(estimates: &[f64]) -> Result<(f64, f64)> {
    let m = mean(estimates);
    let se = if estimates.len() > 1 { (sample_variance(estimates)? / estimates.len() as f64).sqrt() } else { f64::NAN };
    Ok((m, se))
}

/// Normalized autocorrelation `rho(k)` for `k < n`, by zero-padded FFT.
pub fn autocorrelation(x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 2 {
        return Err(Error::InsufficientData("autocorrelation needs two samples".into()));
    }
    let m = mean(x);
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex64> = x.iter().map(|v| Complex64::new(v - m, 0.0)).collect();
    buf.resize(size, Complex64::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex64::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let c0 = buf[0].re;
    if c0 <= 0.0 {
        return Err(Error::InsufficientData("constant series has no autocorrelation".into()));
    }
    Ok(buf[..n].iter().map(|z| z.re / c0).collect())
}

/// Integrated autocorrelation time in samples, `1 + 2 sum rho(k)`, truncated by
/// Geyer's initial monotone positive sequence on pair sums `rho(2m) + rho(2m+1)`.
pub fn integrated_autocorrelation_samples(x: &[f64]) -> Result<f64> {
    if x.len() < 100 {
        return Err(Error::InsufficientData(format!("{} samples; at least 100 are needed", x.len())));
    }
    let rho = autocorrelation(x)?;
    let mut total = 0.0;
    let mut prev = f64::INFINITY;
    for m in 0..rho.len() / 2 {
        let gamma = rho[2 * m] + rho[2 * m + 1];
        if gamma <= 0.0 {
            break;
        }
        let gamma = gamma.min(prev);
        total += gamma;
        prev = gamma;
    }
    Ok((2.0 * total - 1.0).max(1.0))
}

/// Integrated autocorrelation time in the series' own time units.
pub fn integrated_autocorrelation_time(series: &ObservableSeries) -> Result<f64> {
    Ok(integrated_autocorrelation_samples(series.kept())? * series.interval)
}

/// Mean with the standard error `sqrt(Var tau / n)`.
pub fn mean_with_iat_error(x: &[f64]) -> Result<(f64, f64)> {
    let tau = integrated_autocorrelation_samples(x)?;
    Ok((mean(x), (sample_variance(x)? * tau / x.len() as f64).sqrt()))
}

fn require_2d(spec: &ParticleSpec, config: &ParticleConfig) -> Result<()> {
    if spec.dim() != 2 || config.dim() != 2 || config.len() != spec.n {
        return Err(invalid_input("orientational observables need a matching 2D configuration"));
    }
    Ok(())
}

/// Neighbours by the midpoint rule: `i` and `j` are neighbours when the centre
/// of their minimal separation vector is strictly closer to them than to any other particle.
pub fn neighbor_sets(config: &ParticleConfig, spec: &ParticleSpec) -> Result<Vec<Vec<usize>>> {
    require_2d(spec, config)?;
    let n = config.len();
    let torus = &spec.torus;
    let mut sets = vec![Vec::new(); n];
    let mut s = [0.0; 2];
    for i in 0..n {
        for j in i + 1..n {
            torus.separation_into(config.position(j), config.position(i), &mut s);
            let half_sq = 0.25 * (s[0] * s[0] + s[1] * s[1]);
            let xi = config.position(i);
            let mid = [xi[0] + 0.5 * s[0], xi[1] + 0.5 * s[1]];
            let blocked = (0..n).any(|k| k != i && k != j && torus.distance_sq(&mid, config.position(k)) <= half_sq);
            if !blocked {
                sets[i].push(j);
                sets[j].push(i);
            }
        }
    }
    Ok(sets)
}

/// Local six-fold orientation `Psi_i`; `None` for a particle without neighbours.
pub fn local_orientation(config: &ParticleConfig, spec: &ParticleSpec) -> Result<Vec<Option<Complex64>>> {
    let sets = neighbor_sets(config, spec)?;
    let mut s = [0.0; 2];
    Ok(sets
        .iter()
        .enumerate()
        .map(|(i, nb)| {
            if nb.is_empty() {
                return None;
            }
            let sum: Complex64 = nb
                .iter()
                .map(|&j| {
                    spec.torus.separation_into(config.position(j), config.position(i), &mut s);
                    Complex64::from_polar(1.0, 6.0 * s[1].atan2(s[0]))
                })
                .sum();
            Some(sum / nb.len() as f64)
        })
        .collect())
}

/// `n` points spaced geometrically from `r_min` to `r_max`.
pub fn log_grid(r_min: f64, r_max: f64, n: usize) -> Result<Vec<f64>> {
    if !(r_min > 0.0 && r_max > r_min) || n < 2 {
        return Err(invalid_input("need 0 < r_min < r_max and at least two points"));
    }
    let ratio = (r_max / r_min).ln() / (n - 1) as f64;
    Ok((0..n).map(|k| r_min * (ratio * k as f64).exp()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationNormalization {
    /// Pair count per configuration, averaged over the ensemble.
    PairCount,
    /// Mean of `Re(Psi_i* Psi_j)` over pairs in the bin, divided by `E|Psi|^2`.
    PerPairOverMeanSquare,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationCurve {
    pub r: Vec<f64>,
    /// `None` where no pair fell in the bin.
    pub values: Vec<Option<f64>>,
    pub half_width: f64,
    pub normalization: CorrelationNormalization,
    pub configurations: usize,
}

fn check_grid(r: &[f64], half_width: f64) -> Result<()> {
    if !(half_width > 0.0) || r.iter().any(|x| !(*x > 0.0)) {
        return Err(invalid_input("bin centres and half-width must be positive"));
    }
    if r.windows(2).any(|w| w[1] - w[0] < 2.0 * half_width) {
        return Err(invalid_input("bins overlap: centres must be increasing and at least 2 half-widths apart"));
    }
    Ok(())
}

fn bins_of(r: &[f64], half_width: f64, d: f64) -> impl Iterator<Item = usize> + '_ {
    let start = r.partition_point(|c| *c + half_width <= d);
    (start..r.len()).take_while(move |&k| (r[k] - d).abs() < half_width)
}

/// Number of pairs with `|r - d_ij| < half_width`, averaged over configurations.
pub fn positional_correlation(configs: &[ParticleConfig], spec: &ParticleSpec, r: &[f64], half_width: f64) -> Result<CorrelationCurve> {
    check_grid(r, half_width)?;
    if configs.is_empty() {
        return Err(Error::InsufficientData("empty ensemble".into()));
    }
    let mut counts = vec![0u64; r.len()];
    for c in configs {
        let n = c.len();
        for i in 0..n {
            for j in i + 1..n {
                let d = spec.torus.distance_sq(c.position(i), c.position(j)).sqrt();
                for k in bins_of(r, half_width, d) {
                    counts[k] += 1;
                }
            }
        }
    }
    let m = configs.len() as f64;
    Ok(CorrelationCurve {
        r: r.to_vec(),
        values: counts.iter().map(|&c| (c > 0).then(|| c as f64 / m)).collect(),
        half_width,
        normalization: CorrelationNormalization::PairCount,
        configurations: configs.len(),
    })
}

/// Orientational correlation: per-bin mean of `Re(Psi_i* Psi_j)` over contributing
/// pairs, divided by the ensemble estimate of `E|Psi_i|^2`.
pub fn orientational_correlation(configs: &[ParticleConfig], spec: &ParticleSpec, r: &[f64], half_width: f64) -> Result<CorrelationCurve> {
    check_grid(r, half_width)?;
    if configs.is_empty() {
        return Err(Error::InsufficientData("empty ensemble".into()));
    }
    let mut sums = vec![0.0; r.len()];
    let mut counts = vec![0u64; r.len()];
    let (mut sq_sum, mut sq_count) = (0.0, 0usize);
    for c in configs {
        let psi = local_orientation(c, spec)?;
        for p in psi.iter().flatten() {
            sq_sum += p.norm_sqr();
            sq_count += 1;
        }
        let n = c.len();
        for i in 0..n {
            let Some(pi) = psi[i] else { continue };
            for j in i + 1..n {
                let Some(pj) = psi[j] else { continue };
                let d = spec.torus.distance_sq(c.position(i), c.position(j)).sqrt();
                let w = (pi.conj() * pj).re;
                for k in bins_of(r, half_width, d) {
                    sums[k] += w;
                    counts[k] += 1;
                }
            }
        }
    }
    if sq_count == 0 || sq_sum == 0.0 {
        return Err(Error::InsufficientData("no particle has an orientation".into()));
    }
    let norm = sq_sum / sq_count as f64;
    Ok(CorrelationCurve {
        r: r.to_vec(),
        values: sums.iter().zip(&counts).map(|(s, &c)| (c > 0).then(|| s / c as f64 / norm)).collect(),
        half_width,
        normalization: CorrelationNormalization::PerPairOverMeanSquare,
        configurations: configs.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PressureEstimate {
    /// `beta p`.
    pub value: f64,
    pub stderr: f64,
    /// Extrapolated radial distribution at contact.
    pub contact_value: f64,
    /// Pairs observed in the fitting window.
    pub contact_pairs: u64,
}

const CONTACT_BINS: usize = 10;
const CONTACT_WINDOW: f64 = 0.05; // in units of 2 sigma: (2 sigma, 2.1 sigma]
const MIN_CONTACT_PAIRS: u64 = 200;
const PRESSURE_BATCHES: usize = 20;

/// Running pair counts in `CONTACT_BINS` bins on `(2 sigma, 2.1 sigma]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactAccumulator {
    sigma: f64,
    counts: Vec<u64>,
    configurations: u64,
}

impl ContactAccumulator {
    pub fn new(spec: &ParticleSpec) -> Result<Self> {
        let sigma = super::particle_samplers::hard_disk_sigma(spec)?;
        if spec.dim() != 2 {
            return Err(Error::Unsupported("pressure estimator is two-dimensional".into()));
        }
        if 2.1 * sigma > 0.5 * spec.torus.min_side() {
            return Err(invalid_input("box too small for the contact window"));
        }
        Ok(Self { sigma, counts: vec![0; CONTACT_BINS], configurations: 0 })
    }

    pub fn add(&mut self, config: &ParticleConfig, spec: &ParticleSpec) {
        let lo = 2.0 * self.sigma;
        let width = lo * CONTACT_WINDOW / CONTACT_BINS as f64;
        for i in 0..config.len() {
            for j in i + 1..config.len() {
                let d = spec.torus.distance_sq(config.position(i), config.position(j)).sqrt();
                if d > lo {
                    let k = ((d - lo) / width) as usize;
                    if k < CONTACT_BINS {
                        self.counts[k] += 1;
                    }
                }
            }
        }
        self.configurations += 1;
    }

    pub fn merge(&mut self, other: &Self) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.configurations += other.configurations;
    }

    pub fn configurations(&self) -> u64 {
        self.configurations
    }

    pub fn pairs(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Radial distribution at contact: bins normalized by `N^2 / 2` pairs spread
    /// uniformly over the box, then a least-squares line evaluated at `2 sigma`.
    pub fn contact_value(&self, spec: &ParticleSpec) -> f64 {
        let lo = 2.0 * self.sigma;
        let width = lo * CONTACT_WINDOW / CONTACT_BINS as f64;
        let n = spec.n as f64;
        let per = self.configurations as f64 * 0.5 * n * n / spec.torus.volume();
        let (mut x, mut g) = (Vec::new(), Vec::new());
        for (k, &count) in self.counts.iter().enumerate() {
            let (a, b) = (lo + k as f64 * width, lo + (k + 1) as f64 * width);
            x.push(0.5 * (a + b) - lo);
            g.push(count as f64 / (per * PI * (b * b - a * a)));
        }
        intercept(&x, &g)
    }

    /// `beta p = (eta / pi sigma^2)(1 + 2 eta g(2 sigma))`.
    pub fn pressure(&self, spec: &ParticleSpec) -> f64 {
        let eta = spec.density().expect("hard disks have a density");
        eta / (PI * self.sigma * self.sigma) * (1.0 + 2.0 * eta * self.contact_value(spec))
    }
}

/// Least-squares line through `(x, y)`, evaluated at `x = 0`.
fn intercept(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    my - sxy / sxx * mx
}

/// Pressure from per-batch accumulators (consecutive stretches of one chain, or
/// independent chains). The value pools all batches; the standard error is the
/// spread of the per-batch pressures.
pub fn pressure_from_batches(batches: &[ContactAccumulator], spec: &ParticleSpec) -> Result<PressureEstimate> {
    let Some(first) = batches.first() else {
        return Err(Error::InsufficientData("no batches".into()));
    };
    let mut total = first.clone();
    for b in &batches[1..] {
        total.merge(b);
    }
    let pairs = total.pairs();
    if pairs < MIN_CONTACT_PAIRS {
        let have = total.configurations.max(1) as f64;
        let need = (MIN_CONTACT_PAIRS as f64 / (pairs.max(1) as f64 / have)).ceil();
        return Err(Error::InsufficientData(format!(
            "{pairs} pairs in the contact window from {} configurations; about {need} configurations needed for {MIN_CONTACT_PAIRS}",
            total.configurations
        )));
    }
    let stderr = if batches.len() > 1 {
        let values: Vec<f64> = batches.iter().map(|b| b.pressure(spec)).collect();
        (sample_variance(&values)? / values.len() as f64).sqrt()
    } else {
        f64::NAN
    };
    Ok(PressureEstimate { value: total.pressure(spec), stderr, contact_value: total.contact_value(spec), contact_pairs: pairs })
}

/// Hard-disk pressure from an ordered ensemble, with batch-means error over
/// `PRESSURE_BATCHES` consecutive stretches.
pub fn pressure_estimate(configs: &[ParticleConfig], spec: &ParticleSpec) -> Result<PressureEstimate> {
    let size = configs.len().div_ceil(PRESSURE_BATCHES).max(1);
    let mut batches = Vec::new();
    for chunk in configs.chunks(size) {
        let mut acc = ContactAccumulator::new(spec)?;
        for c in chunk {
            acc.add(c, spec);
        }
        batches.push(acc);
    }
    if batches.is_empty() {
        batches.push(ContactAccumulator::new(spec)?);
    }
    pressure_from_batches(&batches, spec)
}
