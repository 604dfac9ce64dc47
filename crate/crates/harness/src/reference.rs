//! Analytic reference curves as CSV.

use std::io::Write;

use anyhow::{bail, Result};
use gibbs_core::analytic::{critical_coupling, ising1d_free_energy, onsager_specific_heat, spontaneous_magnetization};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Curve {
    OnsagerC,
    M0,
    Ising1dF,
}

impl Curve {
    pub fn from_token(s: &str) -> Result<Self> {
        match s {
            "onsager_c" => Ok(Curve::OnsagerC),
            "m0" => Ok(Curve::M0),
            "ising1d_f" => Ok(Curve::Ising1dF),
            _ => bail!("unknown curve `{s}`; known: onsager_c, m0, ising1d_f"),
        }
    }
}

/// Parameters of the finite periodic chain used by `ising1d_f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainParameters {
    pub n: usize,
    pub coupling: f64,
    pub field: f64,
}

/// Square-lattice curves take `beta / beta_c` on the grid (with `J = 1`); the
/// 1D free energy takes `beta`. The specific heat is `inf` at the critical point.
pub fn write_reference<W: Write>(sink: W, curve: Curve, grid: &[f64], chain: ChainParameters) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    match curve {
        Curve::OnsagerC | Curve::M0 => {
            w.write_record(["beta_over_beta_c", "specific_heat", "spontaneous_m"])?;
            for &t in grid {
                if !(t > 0.0 && t.is_finite()) {
                    bail!("beta/beta_c must be positive, got {t}");
                }
                let k = t * critical_coupling();
                let c = if k == critical_coupling() { f64::INFINITY } else { onsager_specific_heat(k)?.value };
                w.write_record([t.to_string(), c.to_string(), spontaneous_magnetization(k).to_string()])?;
            }
        }
        Curve::Ising1dF => {
            w.write_record(["beta", "free_energy", "free_energy_per_particle"])?;
            for &beta in grid {
                let r = ising1d_free_energy(beta, chain.coupling, chain.field, chain.n)?;
                w.write_record([beta.to_string(), r.free_energy.to_string(), r.free_energy_per_particle.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
