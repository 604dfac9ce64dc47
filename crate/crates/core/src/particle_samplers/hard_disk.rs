//! Hard-disk Metropolis and Jaster moves.

use rand::Rng;

use super::hard_disk_sigma;
use crate::error::{invalid_input, Result};
use crate::particles::{ParticleConfig, ParticleSpec};
use crate::torus::wrap_coord;

/// Particles other than `skip` within `2 sigma` of `pos`.
fn overlaps(spec: &ParticleSpec, config: &ParticleConfig, pos: &[f64], skip: usize, sigma: f64, out: &mut Vec<usize>) {
    out.clear();
    let contact = 4.0 * sigma * sigma;
    for j in 0..config.len() {
        if j != skip && spec.torus.distance_sq(pos, config.position(j)) <= contact {
            out.push(j);
        }
    }
}

fn displaced(spec: &ParticleSpec, x: &[f64], u: &[f64]) -> Vec<f64> {
    x.iter().zip(u).zip(spec.torus.sides()).map(|((xi, ui), l)| wrap_coord(xi + ui, *l)).collect()
}

fn innovation<R: Rng + ?Sized>(d: usize, eps: f64, rng: &mut R) -> Vec<f64> {
    (0..d).map(|_| eps * (2.0 * rng.random::<f64>() - 1.0)).collect()
}

/// Moves a uniformly chosen disk by `u ~ U[-eps, eps]^d`; accepted iff no overlap.
pub fn hard_disk_metropolis_step<R: Rng + ?Sized>(
    spec: &ParticleSpec,
    config: &mut ParticleConfig,
    eps: f64,
    rng: &mut R,
) -> Result<bool> {
    let sigma = hard_disk_sigma(spec)?;
    if !(eps > 0.0) {
        return Err(invalid_input("move size must be positive"));
    }
    let i = rng.random_range(0..config.len());
    let u = innovation(spec.dim(), eps, rng);
    let new = displaced(spec, config.position(i), &u);
    let mut hits = Vec::new();
    overlaps(spec, config, &new, i, sigma, &mut hits);
    if hits.is_empty() {
        config.position_mut(i).copy_from_slice(&new);
        Ok(true)
    } else {
        Ok(false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JasterOutcome {
    /// Accepted after moving this many disks.
    Accepted(usize),
    MultipleOverlap,
    Exhausted,
}

impl JasterOutcome {
    pub fn accepted(&self) -> bool {
        matches!(self, JasterOutcome::Accepted(_))
    }
}

/// Jaster's move: one innovation `u` passed along a chain of single overlaps.
///
/// Each displaced disk keeps its new position while the chain continues; the
/// whole chain is undone on rejection.
pub fn jaster_step<R: Rng + ?Sized>(
    spec: &ParticleSpec,
    config: &mut ParticleConfig,
    eps: f64,
    max_attempts: usize,
    rng: &mut R,
) -> Result<JasterOutcome> {
    let sigma = hard_disk_sigma(spec)?;
    if !(eps > 0.0) || max_attempts == 0 {
        return Err(invalid_input("need a positive move size and at least one attempt"));
    }
    let mut mover = rng.random_range(0..config.len());
    let u = innovation(spec.dim(), eps, rng);
    let mut undo: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut hits = Vec::new();
    let outcome = loop {
        if undo.len() == max_attempts {
            break JasterOutcome::Exhausted;
        }
        let new = displaced(spec, config.position(mover), &u);
        undo.push((mover, config.position(mover).to_vec()));
        config.position_mut(mover).copy_from_slice(&new);
        overlaps(spec, config, &new, mover, sigma, &mut hits);
        match hits.len() {
            0 => return Ok(JasterOutcome::Accepted(undo.len())),
            1 => mover = hits[0],
            _ => break JasterOutcome::MultipleOverlap,
        }
    };
    for (k, old) in undo.into_iter().rev() {
        config.position_mut(k).copy_from_slice(&old);
    }
    Ok(outcome)
}
