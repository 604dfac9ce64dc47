//! Goodness-of-fit tests, including variants that tolerate Markov chain correlation.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor};

use crate::error::{invalid_input, Error, Result};
use crate::observables::{integrated_autocorrelation_samples, mean};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    /// Degrees of freedom, or the effective sample size for KS tests.
    pub dof: f64,
    pub p_value: f64,
}

/// Minimum expected count per bin; sparser bins are pooled.
pub const MIN_EXPECTED: f64 = 5.0;

fn chi_square_p(stat: f64, dof: f64) -> Result<f64> {
    let dist = ChiSquared::new(dof).map_err(|e| invalid_input(e.to_string()))?;
    Ok(dist.sf(stat))
}

/// Pearson test of counts against probabilities. Bins whose expected count is
/// below [`MIN_EXPECTED`] are merged into one pooled bin.
pub fn chi_square_test(observed: &[u64], probabilities: &[f64]) -> Result<TestResult> {
    if observed.len() != probabilities.len() || observed.is_empty() {
        return Err(invalid_input("counts and probabilities differ in length"));
    }
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return Err(Error::InsufficientData("no observations".into()));
    }
    let psum: f64 = probabilities.iter().sum();
    let n = total as f64;
    let (mut stat, mut bins) = (0.0, 0usize);
    let (mut pooled_o, mut pooled_e) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probabilities) {
        let e = n * p / psum;
        if e < MIN_EXPECTED {
            pooled_o += o as f64;
            pooled_e += e;
        } else {
            stat += (o as f64 - e).powi(2) / e;
            bins += 1;
        }
    }
    if pooled_e > 0.0 {
        stat += (pooled_o - pooled_e).powi(2) / pooled_e;
        bins += 1;
    }
    if bins < 2 {
        return Err(Error::InsufficientData("fewer than two usable bins".into()));
    }
    let dof = (bins - 1) as f64;
    Ok(TestResult { statistic: stat, dof, p_value: chi_square_p(stat, dof)? })
}

/// Two-sample chi-square test of equal bin probabilities; empty bins are skipped.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> Result<TestResult> {
    if a.len() != b.len() {
        return Err(invalid_input("histograms differ in length"));
    }
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::InsufficientData("empty histogram".into()));
    }
    let (ka, kb) = ((nb / na).sqrt(), (na / nb).sqrt());
    let (mut stat, mut bins) = (0.0, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        if x + y == 0 {
            continue;
        }
        stat += (ka * x as f64 - kb * y as f64).powi(2) / (x + y) as f64;
        bins += 1;
    }
    if bins < 2 {
        return Err(Error::InsufficientData("fewer than two occupied bins".into()));
    }
    let dof = (bins - 1) as f64;
    Ok(TestResult { statistic: stat, dof, p_value: chi_square_p(stat, dof)? })
}

/// Wald test of category frequencies from a correlated chain.
///
/// The chain is cut into `batches` contiguous batches; the batch frequency
/// vectors are treated as independent draws and Hotelling's `T^2` against the
/// target probabilities is converted to an `F` statistic. Categories too rare
/// to be seen [`MIN_EXPECTED`] times per batch are pooled, and one category is
/// dropped to remove the sum-to-one degeneracy.
pub fn batch_means_wald(samples: &[usize], probabilities: &[f64], batches: usize) -> Result<TestResult> {
    let k_all = probabilities.len();
    if samples.iter().any(|&s| s >= k_all) {
        return Err(invalid_input("sample outside the category range"));
    }
    let per_batch = samples.len() / batches.max(1);
    if batches < 3 || per_batch == 0 {
        return Err(Error::InsufficientData("too few samples for the requested batches".into()));
    }
    let psum: f64 = probabilities.iter().sum();
    // Map categories to groups: frequent ones keep their own, rare ones share the last.
    let frequent: Vec<usize> = (0..k_all).filter(|&c| per_batch as f64 * probabilities[c] / psum >= MIN_EXPECTED).collect();
    let mut group = vec![frequent.len(); k_all];
    for (g, &c) in frequent.iter().enumerate() {
        group[c] = g;
    }
    let pooled = frequent.len() < k_all;
    let groups = frequent.len() + pooled as usize;
    let k = groups - 1;
    if k == 0 {
        return Err(Error::InsufficientData("a single category carries all the mass".into()));
    }
    if batches <= k {
        return Err(Error::InsufficientData(format!("need more than {k} batches")));
    }
    let mut target = vec![0.0; groups];
    for c in 0..k_all {
        target[group[c]] += probabilities[c] / psum;
    }
    let mut freqs = DMatrix::<f64>::zeros(batches, k);
    for b in 0..batches {
        let chunk = &samples[b * per_batch..(b + 1) * per_batch];
        for &s in chunk {
            let g = group[s];
            if g < k {
                freqs[(b, g)] += 1.0 / per_batch as f64;
            }
        }
    }
    let means = DVector::from_fn(k, |g, _| freqs.column(g).mean());
    let mut cov = DMatrix::<f64>::zeros(k, k);
    for b in 0..batches {
        let dev = freqs.row(b).transpose() - &means;
        cov += &dev * dev.transpose();
    }
    cov /= (batches - 1) as f64;
    let diff = &means - DVector::from_fn(k, |g, _| target[g]);
    let solved = cov
        .clone()
        .lu()
        .solve(&diff)
        .ok_or_else(|| Error::InsufficientData("batch covariance is singular".into()))?;
    let t2 = batches as f64 * diff.dot(&solved);
    let (kf, bf) = (k as f64, batches as f64);
    let f = (bf - kf) / (kf * (bf - 1.0)) * t2;
    let dist = FisherSnedecor::new(kf, bf - kf).map_err(|e| invalid_input(e.to_string()))?;
    Ok(TestResult { statistic: f, dof: kf, p_value: dist.sf(f) })
}

/// Keeps every `ceil(2 tau)`-th sample so the remainder is close to independent.
pub fn thin_by_iat(x: &[f64]) -> Result<Vec<f64>> {
    let tau = integrated_autocorrelation_samples(x)?;
    let stride = (2.0 * tau).ceil().max(1.0) as usize;
    Ok(x.iter().step_by(stride).copied().collect())
}

/// Counts in `bins` equal bins over `[lo, hi)`; values outside are dropped.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<u64> {
    let mut h = vec![0u64; bins];
    let w = (hi - lo) / bins as f64;
    for &v in values {
        if v >= lo && v < hi {
            h[(((v - lo) / w) as usize).min(bins - 1)] += 1;
        }
    }
    h
}

/// Asymptotic Kolmogorov survival function with Stephens' small-sample correction.
pub fn kolmogorov_p(d: f64, n_eff: f64) -> f64 {
    let sn = n_eff.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov test of (assumed independent) samples.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<TestResult> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no samples".into()));
    }
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let d = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    Ok(TestResult { statistic: d, dof: n, p_value: kolmogorov_p(d, n) })
}

fn ecdf(sorted: &[f64], x: f64) -> f64 {
    sorted.partition_point(|v| *v <= x) as f64 / sorted.len() as f64
}

fn ecdf_left(sorted: &[f64], x: f64) -> f64 {
    sorted.partition_point(|v| *v < x) as f64 / sorted.len() as f64
}

/// KS-type test of the Richardson-extrapolated distribution `(4 F_fine - F_coarse) / 3`,
/// where `fine` was sampled with half the step of `coarse` and both carry an
/// `O(step^2)` bias. The effective sample size accounts for the combination weights.
pub fn ks_extrapolated(fine: &[f64], coarse: &[f64], cdf: impl Fn(f64) -> f64) -> Result<TestResult> {
    if fine.is_empty() || coarse.is_empty() {
        return Err(Error::InsufficientData("no samples".into()));
    }
    let mut a = fine.to_vec();
    let mut b = coarse.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let mut d: f64 = 0.0;
    for &x in a.iter().chain(&b) {
        let f = cdf(x);
        let right = (4.0 * ecdf(&a, x) - ecdf(&b, x)) / 3.0;
        let left = (4.0 * ecdf_left(&a, x) - ecdf_left(&b, x)) / 3.0;
        d = d.max((right - f).abs()).max((left - f).abs());
    }
    let n_eff = 9.0 / (16.0 / a.len() as f64 + 1.0 / b.len() as f64);
    Ok(TestResult { statistic: d, dof: n_eff, p_value: kolmogorov_p(d, n_eff) })
}

/// Mean of the samples with a Richardson step extrapolation, `(4 m_fine - m_coarse) / 3`.
pub fn extrapolated_mean(fine: &[f64], coarse: &[f64]) -> f64 {
    (4.0 * mean(fine) - mean(coarse)) / 3.0
}
