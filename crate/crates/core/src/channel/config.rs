use serde::{Deserialize, Serialize};

use super::{ChannelParams, Topology};
use crate::csi::Dataset;
use crate::error::{Error, Result};

/// Everything needed to regenerate a dataset; read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub packets_per_point: usize,
    pub seed: u64,
    pub topology: Topology,
    pub channel: ChannelParams,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            packets_per_point: 100,
            seed: 1,
            topology: Topology::two_corridor(),
            channel: ChannelParams::default(),
        }
    }
}

impl SimulationConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn generate(&self) -> Result<Dataset> {
        super::generate_dataset(&self.topology, &self.channel, self.packets_per_point, self.seed)
    }
}
