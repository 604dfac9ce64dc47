//! Run manifest: a flat `key = value` text file. It embeds the canonical
//! configuration under `config.<section>.<key>`, so `gibbs run manifest.txt`
//! replays the experiment.

use std::collections::BTreeMap;

use anyhow::{anyhow, bail, Result};
use gibbs_core::observables::TimeUnit;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::run::{series_path, ChainOutput, PlannedChain};

pub const MANIFEST_VERSION: &str = "1";
pub const SEED_RULE: &str =
    "seed = mix64((run << 32 | chain) + master_seed * 0x9e3779b97f4a7c15), mix64 = SplitMix64 finalizer; ChaCha8 stream per chain";

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

pub fn config_hash(config: &ExperimentConfig) -> String {
    Sha256::digest(config.canonical_text().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn key_of(p: &PlannedChain, field: &str) -> String {
    format!("chain.{:04}.{:04}.{field}", p.run, p.chain)
}

impl Manifest {
    pub fn for_config(config: &ExperimentConfig, unit: TimeUnit) -> Self {
        let mut m = Manifest::default();
        m.push("manifest_version", MANIFEST_VERSION);
        m.push("software", format!("gibbs-harness {}", env!("CARGO_PKG_VERSION")));
        m.push("config_sha256", config_hash(config));
        m.push("master_seed", config.schedule.master_seed);
        m.push("seed_rule", SEED_RULE);
        m.push("time_unit", unit.token());
        let (parameter, values) = config.grid();
        m.push("parameter", parameter.token());
        m.push("runs", values.len());
        m.push("chains_per_run", config.schedule.chains);
        m.push("planned_chains", values.len() * config.schedule.chains);
        for (r, v) in values.iter().enumerate() {
            m.push(format!("run.{r:04}.value"), v);
        }
        for (section, keys) in &config.entries {
            for (k, v) in keys {
                m.push(format!("config.{section}.{k}"), v);
            }
        }
        m
    }

    fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn add_chain(&mut self, p: &PlannedChain, out: &ChainOutput) {
        self.push(key_of(p, "seed"), p.seed);
        self.push(key_of(p, "status"), match &out.error {
            None => "ok".to_string(),
            Some(e) => format!("error: {}", e.replace('\n', " ")),
        });
        self.push(key_of(p, "start_counter"), 0);
        self.push(key_of(p, "end_counter"), out.steps);
        self.push(key_of(p, "series"), series_path(p));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = Manifest::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line.split_once(" = ").ok_or_else(|| anyhow!("manifest line {}: expected `key = value`", i + 1))?;
            m.push(k.trim(), v);
        }
        if m.get("manifest_version").is_none() {
            bail!("not a manifest: no manifest_version");
        }
        Ok(m)
    }

    /// Configuration text rebuilt from the embedded `config.*` keys.
    pub fn config_text(&self) -> String {
        let mut sections: BTreeMap<&str, Vec<(&str, &str)>> = BTreeMap::new();
        for (k, v) in &self.entries {
            if let Some((section, key)) = k.strip_prefix("config.").and_then(|r| r.split_once('.')) {
                sections.entry(section).or_default().push((key, v));
            }
        }
        let mut out = String::new();
        for (section, keys) in sections {
            out.push_str(&format!("[{section}]\n"));
            for (k, v) in keys {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        out
    }

    /// Whether chain `(run, chain)` finished without error.
    pub fn chain_ok(&self, run: u32, chain: u32) -> bool {
        self.get(&format!("chain.{run:04}.{chain:04}.status")) == Some("ok")
    }
}

/// Accepts either configuration text or a manifest and returns configuration text.
pub fn config_source(text: &str) -> String {
    match Manifest::parse(text) {
        Ok(m) => m.config_text(),
        Err(_) => text.to_string(),
    }
}
