//! Exact reference results: the 1D transfer matrix, Onsager's 2D specific heat
//! and spontaneous magnetization, brute-force enumeration of small lattices and
//! exact asymptotic variances of single-site kernels.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid_input, Error, Result};
use crate::lattice::{potts_magnetic_density, Lattice, LatticeConfig, LatticeModel, LatticeSpec, Spins};

/// `beta_c J = ln(1 + sqrt 2) / 2`.
pub fn critical_coupling() -> f64 {
    (1.0 + 2f64.sqrt()).ln() / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrixResult {
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    /// `F = -ln(lambda_+^N + lambda_-^N) / beta`.
    pub free_energy: f64,
    pub free_energy_per_particle: f64,
    pub log_partition: f64,
}

/// Free energy of the periodic 1D Ising chain.
pub fn ising1d_free_energy(beta: f64, coupling: f64, field: f64, n: usize) -> Result<TransferMatrixResult> {
    if !(beta > 0.0 && coupling > 0.0) || !field.is_finite() || !beta.is_finite() || !coupling.is_finite() {
        return Err(invalid_input("need beta > 0, J > 0 and finite h"));
    }
    if n < 2 {
        return Err(invalid_input(format!("need N >= 2, got {n}")));
    }
    let (bj, bh) = (beta * coupling, beta * field);
    // ln lambda_+ = beta J + ln(cosh bh + sqrt(sinh^2 bh + e^{-4 beta J})), then
    // lambda_- from lambda_+ lambda_- = 2 sinh(2 beta J) to avoid cancellation.
    let root = (bh.sinh().powi(2) + (-4.0 * bj).exp()).sqrt();
    let ln_plus = bj + (bh.cosh() + root).ln();
    let ln_minus = (2.0 * (2.0 * bj).sinh()).ln() - ln_plus;
    let ratio_n = (n as f64 * (ln_minus - ln_plus)).exp();
    let log_z = n as f64 * ln_plus + ratio_n.ln_1p();
    let free_energy = -log_z / beta;
    Ok(TransferMatrixResult {
        lambda_plus: ln_plus.exp(),
        lambda_minus: ln_minus.exp(),
        free_energy,
        free_energy_per_particle: free_energy / n as f64,
        log_partition: log_z,
    })
}

/// Onsager's `gamma(K)` with `K = beta J`, the integral evaluated by double-exponential quadrature.
pub fn onsager_gamma(k: f64) -> f64 {
    let c2 = (2.0 * k).cosh();
    let kappa_sq = 4.0 * (2.0 * k).sinh().powi(2) / c2.powi(4);
    let integrand = |w: f64| {
        let s = w.sin();
        (0.5 * (1.0 + (1.0 - kappa_sq * s * s).max(0.0).sqrt())).ln()
    };
    let integral = quadrature::double_exponential::integrate(integrand, 0.0, PI / 2.0, 1e-15).integral;
    (2.0 * c2).ln() + integral / PI
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecificHeat {
    /// Thermodynamic specific heat per particle.
    pub value: f64,
    /// Set within `1e-4` of the critical coupling, where the value is unreliable.
    pub near_critical: bool,
}

/// `K^2 gamma''(K)`: the thermodynamic zero-field specific heat per particle.
///
/// The second derivative uses central differences at steps `h` and `h/2`
/// combined by Richardson extrapolation, with `h = min(1e-3 K, |K - K_c|/4)`.
pub fn onsager_specific_heat(k: f64) -> Result<SpecificHeat> {
    if !(k.is_finite() && k > 0.0) {
        return Err(invalid_input(format!("beta J must be positive, got {k}")));
    }
    let dist = (k - critical_coupling()).abs();
    let h = (1e-3 * k).min(dist / 4.0).max(1e-7 * k);
    let g0 = onsager_gamma(k);
    let d2 = |h: f64| (onsager_gamma(k + h) - 2.0 * g0 + onsager_gamma(k - h)) / (h * h);
    let second = (4.0 * d2(h / 2.0) - d2(h)) / 3.0;
    Ok(SpecificHeat { value: k * k * second, near_critical: dist < 1e-4 })
}

/// Onsager-Yang spontaneous magnetic density, zero at and above the critical temperature.
pub fn spontaneous_magnetization(k: f64) -> f64 {
    if k <= critical_coupling() {
        0.0
    } else {
        (1.0 - (2.0 * k).sinh().powi(-4)).max(0.0).powf(0.125)
    }
}

/// Exhaustive Boltzmann ensemble of a small Ising or Potts lattice.
///
/// State index `s` encodes site `i` in base-`q` digit `i`; for Ising digit 0 is `+1`.
#[derive(Debug, Clone)]
pub struct ExactEnsemble {
    pub spec: LatticeSpec,
    pub q: usize,
    pub energies: Vec<f64>,
    pub magnetizations: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub log_partition: f64,
}

pub const ENUMERATION_LIMIT: u128 = 1 << 20;

fn state_space(spec: &LatticeSpec, limit: u128) -> Result<(usize, usize)> {
    let q = match spec.model {
        LatticeModel::Ising => 2usize,
        LatticeModel::Potts { q } => q as usize,
        LatticeModel::Xy => return Err(Error::Unsupported("XY has a continuous state space".into())),
    };
    let n = spec.sites();
    let states = (q as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if states > limit {
        return Err(Error::TooLarge { states, limit });
    }
    Ok((q, states as usize))
}

fn digit_spin(model: LatticeModel, digit: usize) -> i64 {
    match model {
        LatticeModel::Ising => {
            if digit == 0 {
                1
            } else {
                -1
            }
        }
        _ => digit as i64 + 1,
    }
}

impl ExactEnsemble {
    pub fn new(spec: &LatticeSpec) -> Result<Self> {
        spec.validate()?;
        let (q, states) = state_space(spec, ENUMERATION_LIMIT)?;
        let lattice = Lattice::new(spec.clone())?;
        let n = spec.sites();
        let is_ising = spec.model == LatticeModel::Ising;

        // Integer bookkeeping: doubled pair sum A (over neighbour entries) and
        // spin sum M (Ising) or state-1 count (Potts); U = -J A / 2 - h M.
        let mut digits = vec![0usize; n];
        let mut spins: Vec<i64> = (0..n).map(|_| digit_spin(spec.model, 0)).collect();
        let pair = |spins: &[i64], i: usize, v: i64| -> i64 {
            lattice
                .neighbors
                .of(i)
                .iter()
                .map(|&k| if is_ising { v * spins[k] } else { (v == spins[k]) as i64 })
                .sum()
        };
        let mut a: i64 = (0..n).map(|i| pair(&spins, i, spins[i])).sum();
        let mut m: i64 = if is_ising { spins.iter().sum() } else { n as i64 };

        let mut energies = Vec::with_capacity(states);
        let mut magnetizations = Vec::with_capacity(states);
        let qf = q as f64;
        for s in 0..states {
            if s > 0 {
                let mut i = 0;
                loop {
                    let old = spins[i];
                    digits[i] = (digits[i] + 1) % q;
                    let new = digit_spin(spec.model, digits[i]);
                    // Each neighbour entry of i contributes twice to A (once from each end).
                    a += 2 * (pair(&spins, i, new) - pair(&spins, i, old));
                    // A self-loop cannot occur since every axis has at least two sites.
                    spins[i] = new;
                    if is_ising {
                        m += new - old;
                    } else {
                        m += (new == 1) as i64 - (old == 1) as i64;
                    }
                    if digits[i] != 0 {
                        break;
                    }
                    i += 1;
                }
            }
            let u = -0.5 * spec.coupling * a as f64 - if is_ising { spec.field * m as f64 } else { 0.0 };
            energies.push(u);
            magnetizations.push(if is_ising {
                m as f64 / n as f64
            } else {
                (qf * m as f64 / n as f64 - 1.0) / (qf - 1.0)
            });
        }
        let max_w = energies.iter().map(|u| -spec.beta * u).fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = energies.iter().map(|u| (-spec.beta * u - max_w).exp()).collect();
        let z: f64 = weights.iter().sum();
        let probabilities = weights.iter().map(|w| w / z).collect();
        Ok(Self { spec: spec.clone(), q, energies, magnetizations, probabilities, log_partition: max_w + z.ln() })
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn expectation(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.probabilities.iter().enumerate().map(|(s, p)| p * f(s)).sum()
    }

    pub fn mean_energy(&self) -> f64 {
        self.expectation(|s| self.energies[s])
    }

    pub fn energy_variance(&self) -> f64 {
        let mu = self.mean_energy();
        self.expectation(|s| (self.energies[s] - mu).powi(2))
    }

    /// `beta^2 Var U` for the whole system.
    pub fn specific_heat(&self) -> f64 {
        self.spec.beta.powi(2) * self.energy_variance()
    }

    pub fn mean_abs_magnetization(&self) -> f64 {
        self.expectation(|s| self.magnetizations[s].abs())
    }

    pub fn entropy(&self) -> f64 {
        -self.probabilities.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>()
    }

    pub fn free_energy(&self) -> f64 {
        -self.log_partition / self.spec.beta
    }

    pub fn config(&self, state: usize) -> LatticeConfig {
        config_of(self.spec.model, self.q, self.spec.sites(), state)
    }

    /// Inverse of [`ExactEnsemble::config`].
    pub fn state_index(&self, config: &LatticeConfig) -> usize {
        state_index(config, self.q)
    }
}

fn config_of(model: LatticeModel, q: usize, n: usize, mut state: usize) -> LatticeConfig {
    let mut digits = Vec::with_capacity(n);
    for _ in 0..n {
        digits.push(state % q);
        state /= q;
    }
    let spins = match model {
        LatticeModel::Ising => Spins::Ising(digits.iter().map(|&d| if d == 0 { 1 } else { -1 }).collect()),
        _ => Spins::Potts(digits.iter().map(|&d| d as u16 + 1).collect()),
    };
    LatticeConfig { spins }
}

/// Base-`q` index of a discrete configuration (site 0 least significant).
pub fn state_index(config: &LatticeConfig, q: usize) -> usize {
    let digit = |i: usize| -> usize {
        match &config.spins {
            Spins::Ising(x) => (x[i] == -1) as usize,
            Spins::Potts(x) => x[i] as usize - 1,
            Spins::Xy(_) => 0,
        }
    };
    (0..config.len()).rev().fold(0, |acc, i| acc * q + digit(i))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Metropolis,
    Glauber,
}

pub const KERNEL_LIMIT: u128 = 1 << 12;

/// Dense random-scan single-site transition matrix, rows summing to one.
pub fn transition_matrix(kind: KernelKind, spec: &LatticeSpec) -> Result<DMatrix<f64>> {
    let (q, states) = state_space(spec, KERNEL_LIMIT)?;
    if kind == KernelKind::Glauber && spec.model != LatticeModel::Ising {
        return Err(Error::Unsupported("Glauber dynamics is defined for the Ising model".into()));
    }
    let lattice = Lattice::new(spec.clone())?;
    let n = spec.sites();
    let mut p = DMatrix::<f64>::zeros(states, states);
    let mut pow = vec![1usize; n];
    for i in 1..n {
        pow[i] = pow[i - 1] * q;
    }
    for s in 0..states {
        let config = config_of(spec.model, q, n, s);
        let mut stay = 1.0;
        for (i, &step) in pow.iter().enumerate() {
            let digit = (s / step) % q;
            for new in (0..q).filter(|&d| d != digit) {
                let spin = match spec.model {
                    LatticeModel::Ising => crate::lattice::Spin::Ising(if new == 0 { 1 } else { -1 }),
                    _ => crate::lattice::Spin::Potts(new as u16 + 1),
                };
                let x = spec.beta * lattice.delta_energy(&config, i, spin)?;
                let accept = match kind {
                    KernelKind::Metropolis => (-x).exp().min(1.0),
                    KernelKind::Glauber => 1.0 / (1.0 + x.exp()),
                };
                let rate = accept / (n as f64 * (q - 1) as f64);
                let t = s + new * step - digit * step;
                p[(s, t)] += rate;
                stay -= rate;
            }
        }
        p[(s, s)] += stay;
    }
    Ok(p)
}

/// Stationary distribution, variance and asymptotic variance of `f` under the kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelVariance {
    /// `nu(P, f) = 2 <fbar, (I - P)^{-1} fbar>_pi - Var_pi(f)`.
    pub asymptotic_variance: f64,
    pub variance: f64,
}

pub fn exact_kernel_variance(
    kind: KernelKind,
    spec: &LatticeSpec,
    f: impl Fn(&LatticeConfig) -> f64,
) -> Result<KernelVariance> {
    let p = transition_matrix(kind, spec)?;
    let ensemble = ExactEnsemble::new(spec)?;
    let pi = &ensemble.probabilities;
    let states = pi.len();

    if !irreducible(&p) {
        return Err(Error::NonErgodic("transition graph is not strongly connected".into()));
    }
    let values: Vec<f64> = (0..states).map(|s| f(&ensemble.config(s))).collect();
    let mean: f64 = values.iter().zip(pi).map(|(v, w)| v * w).sum();
    let fbar = DVector::from_iterator(states, values.iter().map(|v| v - mean));
    let variance: f64 = fbar.iter().zip(pi).map(|(v, w)| v * v * w).sum();

    // Solve (I - P + 1 pi^T) g = fbar; for pi(fbar) = 0 this is the Poisson solution.
    let mut a = DMatrix::<f64>::identity(states, states) - &p;
    for r in 0..states {
        for c in 0..states {
            a[(r, c)] += pi[c];
        }
    }
    let g = a
        .lu()
        .solve(&fbar)
        .ok_or_else(|| Error::NonErgodic("fundamental matrix is singular".into()))?;
    let inner: f64 = (0..states).map(|s| pi[s] * fbar[s] * g[s]).sum();
    Ok(KernelVariance { asymptotic_variance: 2.0 * inner - variance, variance })
}

fn irreducible(p: &DMatrix<f64>) -> bool {
    let n = p.nrows();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(s) = stack.pop() {
            for t in 0..n {
                let w = if forward { p[(s, t)] } else { p[(t, s)] };
                if w > 0.0 && !seen[t] {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
        seen.iter().all(|&b| b)
    };
    reach(true) && reach(false)
}

/// Magnetic density as an observable for [`exact_kernel_variance`].
pub fn magnetization_observable(spec: &LatticeSpec) -> impl Fn(&LatticeConfig) -> f64 + '_ {
    move |c: &LatticeConfig| match spec.model {
        LatticeModel::Potts { q } => potts_magnetic_density(c, q).unwrap_or(f64::NAN),
        _ => match crate::lattice::magnetic_density(c) {
            crate::lattice::Magnetization::Scalar(m) => m,
            v => v.norm(),
        },
    }
}
