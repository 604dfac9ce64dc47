//! Experiment configuration: flat INI sections with typed keys.
//!
//! ```ini
//! [model]
//! ; ising | potts | xy | hard_disks | lennard_jones
//! kind = ising
//! dims = 16,16
//! beta = 0.44
//!
//! [sampler]
//! kind = wolff
//!
//! [schedule]
//! ; counted in skeleton samples, not raw steps
//! burn_in = 1000
//! samples = 10000
//! chains = 4
//! master_seed = 7
//!
//! [sweep]
//! parameter = beta
//! start = 0.3
//! stop = 0.6
//! points = 10
//!
//! [output]
//! directory = out
//! ```
//!
//! Parsing collects every problem it finds; each carries a `section.key` path.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use gibbs_core::lattice::LatticeModel;
use gibbs_core::lattice_samplers::{Scan, DEFAULT_XY_STEP};
use gibbs_core::particle_samplers::Refresh;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Ising,
    Potts,
    Xy,
    HardDisks,
    LennardJones,
}

impl ModelKind {
    pub fn is_lattice(&self) -> bool {
        matches!(self, ModelKind::Ising | ModelKind::Potts | ModelKind::Xy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Start {
    /// Ordered when the coupling exceeds the two-dimensional transition value.
    Auto,
    Ordered,
    Disordered,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBlock {
    pub kind: ModelKind,
    pub beta: f64,
    pub dims: Vec<usize>,
    pub coupling: f64,
    pub field: f64,
    pub field_xy: [f64; 2],
    pub q: u16,
    pub start: Start,
    pub n: usize,
    pub eta: f64,
    pub side: f64,
    pub sigma: f64,
    pub eps: f64,
    pub cutoff: Option<f64>,
    pub mass: f64,
}

impl ModelBlock {
    pub fn lattice_model(&self) -> Option<LatticeModel> {
        match self.kind {
            ModelKind::Ising => Some(LatticeModel::Ising),
            ModelKind::Potts => Some(LatticeModel::Potts { q: self.q }),
            ModelKind::Xy => Some(LatticeModel::Xy),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Metropolis,
    Glauber,
    SwendsenWang,
    Wolff,
    EcmcXy,
    Jaster,
    Md,
    Ecmc,
    Hmc,
    Langevin,
}

impl SamplerKind {
    const ALL: [(&'static str, SamplerKind); 10] = [
        ("metropolis", SamplerKind::Metropolis),
        ("glauber", SamplerKind::Glauber),
        ("swendsen_wang", SamplerKind::SwendsenWang),
        ("wolff", SamplerKind::Wolff),
        ("ecmc_xy", SamplerKind::EcmcXy),
        ("jaster", SamplerKind::Jaster),
        ("md", SamplerKind::Md),
        ("ecmc", SamplerKind::Ecmc),
        ("hmc", SamplerKind::Hmc),
        ("langevin", SamplerKind::Langevin),
    ];

    pub fn token(&self) -> &'static str {
        Self::ALL.iter().find(|(_, k)| k == self).map(|(t, _)| *t).unwrap_or("?")
    }

    /// Whether the sampler exists for the model.
    pub fn supports(&self, model: ModelKind) -> bool {
        use ModelKind as M;
        use SamplerKind as S;
        match self {
            S::Metropolis => model != M::LennardJones,
            S::Glauber | S::SwendsenWang | S::Wolff => matches!(model, M::Ising | M::Potts) && (*self != S::Glauber || model == M::Ising),
            S::EcmcXy => model == M::Xy,
            S::Jaster | S::Md => model == M::HardDisks,
            S::Ecmc => matches!(model, M::HardDisks | M::LennardJones),
            S::Hmc | S::Langevin => model == M::LennardJones,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerBlock {
    pub kind: SamplerKind,
    pub scan: Scan,
    pub xy_step: f64,
    /// Particle displacement bound for Metropolis and Jaster moves.
    pub move_size: f64,
    pub max_chain: usize,
    pub refresh: Refresh,
    /// Angular displacement between lattice event-chain refreshments; defaults to `2 pi N`.
    pub chain_length: Option<f64>,
    /// Displacement or time per sampler step for event-driven and dynamics samplers.
    pub interval: Option<f64>,
    pub step: f64,
    pub steps: usize,
    pub friction: f64,
    pub xtra_chances: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    /// Discarded skeleton samples.
    pub burn_in: usize,
    pub samples: usize,
    /// Sampler steps between skeleton samples; `None` picks one sweep.
    pub stride: Option<usize>,
    pub chains: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    Beta,
    Eta,
}

impl SweepParameter {
    pub fn token(&self) -> &'static str {
        match self {
            SweepParameter::Beta => "beta",
            SweepParameter::Eta => "eta",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputBlock {
    pub directory: PathBuf,
    pub snapshots: bool,
    pub event_log: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelBlock,
    pub sampler: SamplerBlock,
    pub schedule: Schedule,
    pub sweep: Option<Sweep>,
    pub output: OutputBlock,
    /// Every key as written, by section; the canonical form embedded in manifests.
    pub entries: BTreeMap<String, BTreeMap<String, String>>,
}

/// All problems found in a configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

const SECTIONS: [&str; 5] = ["model", "sampler", "schedule", "sweep", "output"];

/// Reads one section's keys, remembering which were consumed.
struct Section<'a> {
    name: &'static str,
    keys: Option<&'a BTreeMap<String, String>>,
    used: Vec<&'static str>,
    errors: &'a mut Vec<String>,
}

impl<'a> Section<'a> {
    fn raw(&mut self, key: &'static str) -> Option<&'a str> {
        self.used.push(key);
        self.keys.and_then(|k| k.get(key)).map(|s| s.as_str())
    }

    fn fail(&mut self, key: &str, msg: impl fmt::Display) {
        self.errors.push(format!("{}.{key}: {msg}", self.name));
    }

    fn parsed<T: FromStr>(&mut self, key: &'static str) -> Option<T> {
        let raw = self.raw(key)?;
        match raw.parse::<T>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.fail(key, format!("cannot parse `{raw}`"));
                None
            }
        }
    }

    fn or<T: FromStr>(&mut self, key: &'static str, default: T) -> T {
        self.parsed(key).unwrap_or(default)
    }

    fn required<T: FromStr>(&mut self, key: &'static str) -> Option<T> {
        if self.keys.and_then(|k| k.get(key)).is_none() {
            self.used.push(key);
            self.fail(key, "missing");
            return None;
        }
        self.parsed(key)
    }

    fn positive(&mut self, key: &'static str, value: f64) -> f64 {
        if !(value > 0.0 && value.is_finite()) {
            self.fail(key, format!("must be positive, got {value}"));
        }
        value
    }

    fn finite(&mut self, key: &'static str, value: f64) -> f64 {
        if !value.is_finite() {
            self.fail(key, format!("must be finite, got {value}"));
        }
        value
    }

    fn choice<T: Copy>(&mut self, key: &'static str, default: Option<T>, options: &[(&str, T)]) -> Option<T> {
        let Some(raw) = self.raw(key) else {
            if default.is_none() {
                self.fail(key, "missing");
            }
            return default;
        };
        match options.iter().find(|(t, _)| *t == raw) {
            Some((_, v)) => Some(*v),
            None => {
                let names: Vec<&str> = options.iter().map(|(t, _)| *t).collect();
                self.fail(key, format!("`{raw}` is not one of {}", names.join(", ")));
                None
            }
        }
    }

    fn list<T: FromStr>(&mut self, key: &'static str) -> Option<Vec<T>> {
        let raw = self.raw(key)?;
        let parsed: Result<Vec<T>, _> = raw.split(',').map(|t| t.trim().parse::<T>()).collect();
        match parsed {
            Ok(v) if !v.is_empty() => Some(v),
            _ => {
                self.fail(key, format!("expected a comma-separated list, got `{raw}`"));
                None
            }
        }
    }

    fn finish(self) {
        if let Some(keys) = self.keys {
            for k in keys.keys() {
                if !self.used.contains(&k.as_str()) {
                    self.errors.push(format!("{}.{k}: unknown key", self.name));
                }
            }
        }
    }
}

fn collect_entries(text: &str) -> Result<BTreeMap<String, BTreeMap<String, String>>, ConfigErrors> {
    let ini = ini::Ini::load_from_str(text).map_err(|e| ConfigErrors(vec![format!("syntax: {e}")]))?;
    let mut errors = Vec::new();
    let mut entries: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    for (section, props) in &ini {
        let name = section.unwrap_or("");
        if props.is_empty() && name.is_empty() {
            continue;
        }
        if !SECTIONS.contains(&name) {
            errors.push(if name.is_empty() {
                "keys outside any section".to_string()
            } else {
                format!("{name}: unknown section")
            });
            continue;
        }
        let map = entries.entry(name.to_string()).or_default();
        for (k, v) in props.iter() {
            if map.insert(k.to_string(), v.trim().to_string()).is_some() {
                errors.push(format!("{name}.{k}: given more than once"));
            }
        }
    }
    if errors.is_empty() {
        Ok(entries)
    } else {
        Err(ConfigErrors(errors))
    }
}

/// Inclusive grid `start:stop:points`, or a comma-separated list.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let start: f64 = parts[0].trim().parse().map_err(|_| format!("bad grid start `{}`", parts[0]))?;
        let stop: f64 = parts[1].trim().parse().map_err(|_| format!("bad grid stop `{}`", parts[1]))?;
        let points: usize = parts[2].trim().parse().map_err(|_| format!("bad point count `{}`", parts[2]))?;
        return linspace(start, stop, points);
    }
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad grid value `{t}`")))
        .collect::<Result<Vec<_>, _>>()
        .and_then(|v| if v.is_empty() { Err("empty grid".into()) } else { Ok(v) })
}

fn linspace(start: f64, stop: f64, points: usize) -> Result<Vec<f64>, String> {
    if !(start.is_finite() && stop.is_finite()) || points == 0 {
        return Err("grid needs finite bounds and at least one point".into());
    }
    if points == 1 {
        return Ok(vec![start]);
    }
    let h = (stop - start) / (points - 1) as f64;
    Ok((0..points).map(|i| if i + 1 == points { stop } else { start + h * i as f64 }).collect())
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let entries = collect_entries(text)?;
    let mut errors = Vec::new();

    let mut s = Section { name: "model", keys: entries.get("model"), used: vec![], errors: &mut errors };
    let kind = s.choice(
        "kind",
        None,
        &[
            ("ising", ModelKind::Ising),
            ("potts", ModelKind::Potts),
            ("xy", ModelKind::Xy),
            ("hard_disks", ModelKind::HardDisks),
            ("lennard_jones", ModelKind::LennardJones),
        ],
    );
    let beta = s.or("beta", 1.0);
    let beta = s.positive("beta", beta);
    let mut model = ModelBlock {
        kind: kind.unwrap_or(ModelKind::Ising),
        beta,
        dims: vec![],
        coupling: 1.0,
        field: 0.0,
        field_xy: [0.0; 2],
        q: 2,
        start: Start::Auto,
        n: 0,
        eta: 0.0,
        side: 0.0,
        sigma: 1.0,
        eps: 1.0,
        cutoff: None,
        mass: 1.0,
    };
    match kind {
        Some(k) if k.is_lattice() => {
            model.dims = s.list::<usize>("dims").unwrap_or_default();
            if model.dims.is_empty() || model.dims.iter().any(|&l| l < 2) {
                s.fail("dims", "need at least one side, each at least 2");
            }
            model.coupling = s.or("coupling", 1.0);
            model.coupling = s.finite("coupling", model.coupling);
            model.start = s
                .choice("start", Some(Start::Auto), &[("auto", Start::Auto), ("ordered", Start::Ordered), ("disordered", Start::Disordered)])
                .unwrap_or(Start::Auto);
            match k {
                ModelKind::Ising => {
                    model.field = s.or("field", 0.0);
                    model.field = s.finite("field", model.field);
                }
                ModelKind::Potts => {
                    model.q = s.or("q", 3u16);
                    if model.q < 2 {
                        s.fail("q", "must be at least 2");
                    }
                }
                _ => {
                    let hx = s.or("field_x", 0.0);
                    let hy = s.or("field_y", 0.0);
                    model.field_xy = [s.finite("field_x", hx), s.finite("field_y", hy)];
                }
            }
        }
        Some(k) => {
            model.n = s.required("n").unwrap_or(0);
            if model.n == 0 && s.keys.and_then(|m| m.get("n")).is_some() {
                s.fail("n", "must be at least 1");
            }
            model.sigma = s.or("sigma", 1.0);
            model.sigma = s.positive("sigma", model.sigma);
            model.mass = s.or("mass", 1.0);
            model.mass = s.positive("mass", model.mass);
            if k == ModelKind::HardDisks {
                if let Some(eta) = s.required::<f64>("eta") {
                    if !(eta > 0.0 && eta < 1.0) {
                        s.fail("eta", format!("must lie in (0, 1), got {eta}"));
                    }
                    model.eta = eta;
                }
            } else {
                if let Some(side) = s.required::<f64>("side") {
                    model.side = s.positive("side", side);
                }
                model.eps = s.or("eps", 1.0);
                model.eps = s.positive("eps", model.eps);
                model.cutoff = s.parsed::<f64>("cutoff");
                if let Some(c) = model.cutoff {
                    s.positive("cutoff", c);
                }
            }
        }
        None => {}
    }
    s.finish();

    let mut s = Section { name: "sampler", keys: entries.get("sampler"), used: vec![], errors: &mut errors };
    let sampler_kind = s.choice("kind", None, &SamplerKind::ALL);
    if let (Some(sk), Some(mk)) = (sampler_kind, kind) {
        if !sk.supports(mk) {
            s.fail("kind", format!("`{}` is not available for this model", sk.token()));
        }
    }
    let scan = s.choice("scan", Some(Scan::Random), &[("random", Scan::Random), ("systematic", Scan::Systematic)]).unwrap_or_default();
    let xy_step = s.or("xy_step", DEFAULT_XY_STEP);
    let xy_step = s.positive("xy_step", xy_step);
    let move_size = s.or("move_size", 0.5 * model.sigma);
    let move_size = s.positive("move_size", move_size);
    let max_chain = s.or("max_chain", 100usize);
    if max_chain == 0 {
        s.fail("max_chain", "must be at least 1");
    }
    let refresh_kind = s
        .choice("refresh", Some("uniform"), &[("none", "none"), ("xy_fixed", "xy_fixed"), ("xy_poisson", "xy_poisson"), ("uniform", "uniform")])
        .unwrap_or("uniform");
    let refresh_param = s.or("refresh_parameter", 1.0);
    let refresh_param = s.positive("refresh_parameter", refresh_param);
    let refresh = match refresh_kind {
        "none" => Refresh::None,
        "xy_fixed" => Refresh::XyFixed(refresh_param),
        "xy_poisson" => Refresh::XyPoisson(refresh_param),
        _ => Refresh::Uniform(refresh_param),
    };
    let chain_length = s.parsed::<f64>("chain_length");
    if let Some(c) = chain_length {
        s.positive("chain_length", c);
    }
    let interval = s.parsed::<f64>("interval");
    if let Some(i) = interval {
        s.positive("interval", i);
    }
    let step = s.or("step", 0.01);
    let step = s.positive("step", step);
    let steps = s.or("steps", 10usize);
    if steps == 0 {
        s.fail("steps", "must be at least 1");
    }
    let friction = s.or("friction", 1.0);
    let friction = s.positive("friction", friction);
    let xtra_chances = s.or("xtra_chances", 0usize);
    s.finish();
    let sampler = SamplerBlock {
        kind: sampler_kind.unwrap_or(SamplerKind::Metropolis),
        scan,
        xy_step,
        move_size,
        max_chain,
        refresh,
        chain_length,
        interval,
        step,
        steps,
        friction,
        xtra_chances,
    };

    let mut s = Section { name: "schedule", keys: entries.get("schedule"), used: vec![], errors: &mut errors };
    let burn_in = s.or("burn_in", 0usize);
    let samples = s.required::<usize>("samples").unwrap_or(0);
    if samples == 0 && s.keys.and_then(|m| m.get("samples")).is_some() {
        s.fail("samples", "must be at least 1");
    }
    let stride = s.parsed::<usize>("stride");
    if stride == Some(0) {
        s.fail("stride", "must be at least 1");
    }
    let chains = s.or("chains", 1usize);
    if chains == 0 {
        s.fail("chains", "must be at least 1");
    }
    let master_seed = s.required::<u64>("master_seed").unwrap_or(0);
    s.finish();
    let schedule = Schedule { burn_in, samples, stride, chains, master_seed };

    let sweep = if entries.contains_key("sweep") {
        let mut s = Section { name: "sweep", keys: entries.get("sweep"), used: vec![], errors: &mut errors };
        let parameter = s.choice("parameter", None, &[("beta", SweepParameter::Beta), ("eta", SweepParameter::Eta)]);
        let listed = s.list::<f64>("values");
        let start = s.parsed::<f64>("start");
        let stop = s.parsed::<f64>("stop");
        let points = s.parsed::<usize>("points");
        let values = match (listed, start, stop, points) {
            (Some(v), None, None, None) => Some(v),
            (None, Some(a), Some(b), Some(n)) => match linspace(a, b, n) {
                Ok(v) => Some(v),
                Err(e) => {
                    s.fail("points", e);
                    None
                }
            },
            _ => {
                s.fail("values", "give either `values` or all of `start`, `stop`, `points`");
                None
            }
        };
        if let (Some(p), Some(v)) = (parameter, &values) {
            for x in v {
                let ok = match p {
                    SweepParameter::Beta => *x > 0.0 && x.is_finite(),
                    SweepParameter::Eta => *x > 0.0 && *x < 1.0,
                };
                if !ok {
                    s.fail("values", format!("{} = {x} is out of range", p.token()));
                }
            }
            if p == SweepParameter::Eta && kind != Some(ModelKind::HardDisks) {
                s.fail("parameter", "eta sweeps need hard disks");
            }
        }
        s.finish();
        parameter.zip(values).map(|(parameter, values)| Sweep { parameter, values })
    } else {
        None
    };

    let mut s = Section { name: "output", keys: entries.get("output"), used: vec![], errors: &mut errors };
    let directory = PathBuf::from(s.raw("directory").unwrap_or("output"));
    let snapshots = s.or("snapshots", false);
    let event_log = s.or("event_log", false);
    if event_log && sampler.kind != SamplerKind::Md {
        s.fail("event_log", "event logs are written by the md sampler only");
    }
    s.finish();
    let output = OutputBlock { directory, snapshots, event_log };

    if errors.is_empty() {
        Ok(ExperimentConfig { model, sampler, schedule, sweep, output, entries })
    } else {
        Err(ConfigErrors(errors))
    }
}

impl ExperimentConfig {
    /// Canonical text: sections and keys in sorted order.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        for (section, keys) in &self.entries {
            out.push_str(&format!("[{section}]\n"));
            for (k, v) in keys {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        out
    }

    /// Values taken by the swept parameter, or the model's `beta` when nothing is swept.
    pub fn grid(&self) -> (SweepParameter, Vec<f64>) {
        match &self.sweep {
            Some(s) => (s.parameter, s.values.clone()),
            None => (SweepParameter::Beta, vec![self.model.beta]),
        }
    }

    /// Model block with the swept parameter set to `value`.
    pub fn model_at(&self, parameter: SweepParameter, value: f64) -> ModelBlock {
        let mut m = self.model.clone();
        match parameter {
            SweepParameter::Beta => m.beta = value,
            SweepParameter::Eta => m.eta = value,
        }
        m
    }
}
