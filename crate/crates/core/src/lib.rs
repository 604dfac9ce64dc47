//! Sampling Boltzmann-Gibbs distributions of lattice spin models and particle
//! systems on the torus.
//!
//! The crate is organised by concern:
//!
//! - [`torus`]: periodic-boundary arithmetic shared by every particle model.
//! - [`lattice`]: Ising, Potts and XY models on periodic cubic lattices.
//! - [`particles`]: hard/soft disks, Lennard-Jones and harmonic bonded terms.
//! - [`analytic`]: exact results (transfer matrix, Onsager, enumeration) used as oracles.
//! - [`lattice_samplers`]: Metropolis, Glauber, Swendsen-Wang, Wolff and event-chain XY kernels.
//! - [`particle_samplers`]: hard-disk Metropolis/Jaster, event-driven MD, leapfrog/HMC,
//!   Langevin integrators and event chain Monte Carlo.
//! - [`observables`]: specific heat, autocorrelation times, correlation functions, pressure.
//! - [`goodness`]: goodness-of-fit tests for correlated Markov chain output.

pub mod analytic;
pub mod error;
pub mod goodness;
pub mod lattice;
pub mod lattice_samplers;
pub mod observables;
pub mod particle_samplers;
pub mod particles;
pub mod rng;
pub mod torus;

pub use error::{Error, Result};
