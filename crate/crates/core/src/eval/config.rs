use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bundle::SystemKind;
use crate::channel::SimulationConfig;
use crate::error::{Error, Result};
use crate::vsdl::TrainConfig;

/// A full comparison run: simulate, train every system, evaluate, per seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Systems to train, in report order.
    pub systems: Vec<SystemKind>,
    /// Each seed drives both dataset generation and training.
    pub seeds: Vec<u64>,
    pub simulation: SimulationConfig,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            systems: SystemKind::ALL.to_vec(),
            seeds: vec![1, 2, 3, 4, 5],
            simulation: SimulationConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parses `s` after applying `key=value` overrides to the TOML tree.
    pub fn from_toml_with_overrides(s: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: Self = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.systems.is_empty() {
            return Err(Error::Config("at least one system is required".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        self.simulation.topology.validate()?;
        self.simulation.channel.validate()?;
        self.train.validate()
    }

    /// Simulation and training settings for one seed.
    pub fn for_seed(&self, seed: u64) -> (SimulationConfig, TrainConfig) {
        let mut sim = self.simulation.clone();
        sim.seed = seed;
        let mut train = self.train.clone();
        train.seed = seed;
        (sim, train)
    }
}

/// Sets a dotted `key=value` path in a TOML tree. The value is parsed as a
/// TOML value when possible (`0.3`, `true`, `[1, 2]`, `"vsdl"`) and taken as
/// a bare string otherwise.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not of the form key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key `{key}`")));
    }
    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut cur = table;
    for p in parents {
        cur = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override key `{key}`: `{p}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// SHA-256 (hex) of the JSON encoding of a configuration.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let json = serde_json::to_vec(config)?;
    Ok(hex::encode(Sha256::digest(&json)))
}
