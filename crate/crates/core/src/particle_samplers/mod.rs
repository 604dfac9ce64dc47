//! Samplers and integrators for particle systems.
//!
//! - [`hard_disk`]: single-particle Metropolis and Jaster's chained displacement move.
//! - [`md`]: event-driven hard-disk molecular dynamics.
//! - [`dynamics`]: leapfrog, hybrid Monte Carlo with extra chances, Langevin integrators.
//! - [`ecmc`]: event chain Monte Carlo for hard disks and smooth pair potentials.

pub mod dynamics;
pub mod ecmc;
pub mod hard_disk;
pub mod md;

pub use dynamics::{
    hmc_step, langevin_overdamped_step, langevin_underdamped_step, leapfrog_trajectory, ou_exact_update, HmcOutcome,
    IntegratorSpec, Kinetic, KineticKind, PhaseState,
};
pub use ecmc::{
    ecmc_hard_disk_run, ecmc_smooth_run, factorized_filter_accept, EcmcState, EcmcStats, Refresh,
};
pub use hard_disk::{hard_disk_metropolis_step, jaster_step, JasterOutcome};
pub use md::{md_collide, md_collision_time, MdEvent, MdEventKind, MdSystem};

use crate::particles::{ParticleSpec, Potential};
use crate::error::{Error, Result};

/// Events on a straight-line relative flow `s + w t` are searched among the
/// `3^d` neighbouring images; beyond this time a farther image could be hit first.
pub(crate) fn image_horizon(spec_min_side: f64, sigma: f64, speed: f64) -> f64 {
    if speed == 0.0 {
        f64::INFINITY
    } else {
        (1.5 * spec_min_side - 2.0 * sigma) / speed
    }
}

/// Time `t >= 0` at which `|s + w t| = 2 sigma` on an approaching straight path.
pub(crate) fn contact_time(s: &[f64], w: &[f64], sigma: f64) -> Option<f64> {
    let b: f64 = s.iter().zip(w).map(|(x, y)| x * y).sum();
    if b >= 0.0 {
        return None;
    }
    let ww: f64 = w.iter().map(|x| x * x).sum();
    let c = s.iter().map(|x| x * x).sum::<f64>() - 4.0 * sigma * sigma;
    let disc = b * b - ww * c;
    if disc <= 0.0 {
        return None;
    }
    // Smaller root of ww t^2 + 2 b t + c = 0, in the stable form.
    let t = c / (-b + disc.sqrt());
    (t >= 0.0).then_some(t)
}

/// Earliest [`contact_time`] over the `3^d` images of `s`.
pub(crate) fn earliest_contact(sides: &[f64], s: &[f64], w: &[f64], sigma: f64) -> Option<f64> {
    let d = s.len();
    let mut best: Option<f64> = None;
    let mut img = vec![0.0; d];
    for code in 0..3usize.pow(d as u32) {
        let mut c = code;
        for a in 0..d {
            img[a] = s[a] + sides[a] * ((c % 3) as f64 - 1.0);
            c /= 3;
        }
        if let Some(t) = contact_time(&img, w, sigma) {
            if best.is_none_or(|bt| t < bt) {
                best = Some(t);
            }
        }
    }
    best
}

pub(crate) fn hard_disk_sigma(spec: &ParticleSpec) -> Result<f64> {
    match spec.potential {
        Potential::HardDisk { sigma } => Ok(sigma),
        _ => Err(Error::Unsupported("sampler requires a hard-disk spec".into())),
    }
}
