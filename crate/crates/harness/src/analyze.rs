//! Estimators over the series written by `run`, one row per grid point.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use gibbs_core::observables::{
    combine_chains, integrated_autocorrelation_time, mean, mean_with_iat_error, pressure_estimate, pressure_from_batches,
    sample_variance, ContactAccumulator, ObservableSeries, TimeUnit,
};
use gibbs_core::particles::{read_particle_snapshot, ParticleConfig};

use crate::config::{parse_config, ExperimentConfig, ModelKind, SweepParameter};
use crate::manifest::Manifest;
use crate::run::{lattice_spec, particle_spec, plan};

pub const OBSERVABLES: [&str; 8] = ["energy", "m", "abs_m", "psi6", "specific_heat", "iat_abs_m", "iat_energy", "pressure"];

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub run: u32,
    pub parameter_value: f64,
    pub observable: String,
    pub value: f64,
    pub stderr: f64,
    pub time_unit: TimeUnit,
    pub n_chains: usize,
}

struct Series {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Series {
    fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
        let columns = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            rows.push(rec.iter().map(|t| t.parse::<f64>().map_err(|_| anyhow!("bad number `{t}` in {}", path.display()))).collect::<Result<_>>()?);
        }
        Ok(Series { columns, rows })
    }

    fn column(&self, name: &str) -> Result<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name).ok_or_else(|| {
            anyhow!("no column `{name}`; available: {}", self.columns.join(", "))
        })?;
        Ok(self.rows.iter().map(|r| r[k]).collect())
    }

    fn magnitude(&self) -> Result<Vec<f64>> {
        let m = self.column("m")?;
        Ok(match self.column("m_y") {
            Ok(my) => m.iter().zip(&my).map(|(a, b)| a.hypot(*b)).collect(),
            Err(_) => m.iter().map(|v| v.abs()).collect(),
        })
    }

    fn interval(&self) -> f64 {
        match self.rows.as_slice() {
            [a, b, ..] => b[0] - a[0],
            _ => 1.0,
        }
    }
}

fn system_size(config: &ExperimentConfig) -> usize {
    if config.model.kind.is_lattice() {
        config.model.dims.iter().product()
    } else {
        config.model.n
    }
}

/// Per-chain value and a single-chain error estimate.
fn chain_estimate(observable: &str, s: &Series, beta: f64, size: usize, unit: TimeUnit) -> Result<(f64, f64)> {
    let mean_err = |x: Vec<f64>| -> Result<(f64, f64)> { Ok(mean_with_iat_error(&x).unwrap_or((mean(&x), f64::NAN))) };
    match observable {
        "energy" | "psi6" => mean_err(s.column(observable)?),
        "abs_m" => mean_err(s.magnitude()?),
        "m" => match s.column("m_y") {
            Ok(my) => {
                let mx = s.column("m")?;
                Ok((mean(&mx).hypot(mean(&my)), f64::NAN))
            }
            Err(_) => mean_err(s.column("m")?),
        },
        "specific_heat" => {
            let e = s.column("energy")?;
            let c = |x: &[f64]| -> Result<f64> { Ok(beta * beta * sample_variance(x)? / size as f64) };
            let value = c(&e)?;
            let per: Vec<f64> = e.chunks(e.len().div_ceil(10).max(2)).filter(|b| b.len() > 1).map(c).collect::<Result<_>>()?;
            let err = if per.len() > 1 { (sample_variance(&per)? / per.len() as f64).sqrt() } else { f64::NAN };
            Ok((value, err))
        }
        "iat_abs_m" | "iat_energy" => {
            let x = if observable == "iat_abs_m" { s.magnitude()? } else { s.column("energy")? };
            let series = ObservableSeries::new(x, unit, s.interval(), 0)?;
            Ok((integrated_autocorrelation_time(&series)?, f64::NAN))
        }
        other => bail!("unknown observable `{other}`; known: {}", OBSERVABLES.join(", ")),
    }
}

fn snapshots(dir: &Path, stem: &str, spec: &gibbs_core::particles::ParticleSpec) -> Result<Vec<ParticleConfig>> {
    let mut paths: Vec<_> = fs::read_dir(dir.join("snapshots"))
        .context("pressure needs snapshots (set output.snapshots = true)")?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with(&format!("{stem}_s"))))
        .collect();
    paths.sort();
    paths.iter().map(|p| Ok(read_particle_snapshot(&fs::read_to_string(p)?, spec)?)).collect()
}

pub fn analyze(dir: &Path, observable: &str) -> Result<Vec<Estimate>> {
    if !OBSERVABLES.contains(&observable) {
        bail!("unknown observable `{observable}`; known: {}", OBSERVABLES.join(", "));
    }
    let manifest = Manifest::parse(&fs::read_to_string(dir.join("manifest.txt")).context("reading manifest.txt")?)?;
    let config = parse_config(&manifest.config_text()).map_err(|e| anyhow!("embedded configuration: {e}"))?;
    let unit = TimeUnit::from_token(manifest.get("time_unit").unwrap_or(""))?;
    let size = system_size(&config);
    let planned = plan(&config);
    let (_, values) = config.grid();
    let mut out = Vec::new();
    for (r, &value) in values.iter().enumerate() {
        let run = r as u32;
        let chains: Vec<_> = planned.iter().filter(|p| p.run == run && manifest.chain_ok(p.run, p.chain)).collect();
        let model = config.model_at(config.grid().0, value);
        let beta = model.beta;
        let (v, se) = if observable == "pressure" {
            if model.kind != ModelKind::HardDisks {
                bail!("pressure is defined for hard disks");
            }
            let spec = particle_spec(&model)?;
            let mut accs = Vec::new();
            let mut all = Vec::new();
            for p in &chains {
                let configs = snapshots(dir, &p.stem(), &spec)?;
                let mut acc = ContactAccumulator::new(&spec)?;
                configs.iter().for_each(|c| acc.add(c, &spec));
                accs.push(acc);
                all.extend(configs);
            }
            let est = if accs.len() > 1 { pressure_from_batches(&accs, &spec)? } else { pressure_estimate(&all, &spec)? };
            (est.value, est.stderr)
        } else {
            if model.kind.is_lattice() {
                lattice_spec(&model)?;
            }
            let mut per = Vec::new();
            let mut single = (f64::NAN, f64::NAN);
            for p in &chains {
                let s = Series::read(&dir.join(crate::run::series_path(p)))?;
                single = chain_estimate(observable, &s, beta, size, unit)?;
                per.push(single.0);
            }
            match per.len() {
                0 => (f64::NAN, f64::NAN),
                1 => single,
                _ => combine_chains(&per)?,
            }
        };
        let parameter_value = match config.grid().0 {
            SweepParameter::Beta => beta,
            SweepParameter::Eta => model.eta,
        };
        out.push(Estimate { run, parameter_value, observable: observable.to_string(), value: v, stderr: se, time_unit: unit, n_chains: chains.len() });
    }
    Ok(out)
}

pub fn write_estimates<W: Write>(sink: W, rows: &[Estimate]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["run", "parameter_value", "observable", "value", "stderr", "time_unit", "n_chains"])?;
    for e in rows {
        w.write_record([
            e.run.to_string(),
            e.parameter_value.to_string(),
            e.observable.clone(),
            e.value.to_string(),
            e.stderr.to_string(),
            e.time_unit.token().to_string(),
            e.n_chains.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
