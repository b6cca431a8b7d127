//! Optional TOML config file. Each table mirrors the flags of one
//! subcommand; a flag given on the command line wins over the file.
//!
//! ```toml
//! log_level = "info"
//!
//! [run]
//! scenario = "ran_input_power_failure"
//! seed = 42
//! auto_approve = true
//! out = "out/ran"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub log_level: Option<String>,
    #[serde(default)]
    pub index: IndexSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub score: ScoreSection,
    #[serde(default)]
    pub serve: ServeSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexSection {
    pub out: Option<PathBuf>,
    pub chunk_size: Option<usize>,
    pub overlap: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub scenario: Option<String>,
    pub seed: Option<u64>,
    pub auto_approve: Option<bool>,
    pub out: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub ground_truth: Option<bool>,
    pub hitl_timeout_ms: Option<u64>,
    pub sequential: Option<bool>,
    pub port: Option<u16>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreSection {
    pub corpus: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub intent: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeSection {
    pub host: Option<String>,
    pub port: Option<u16>,
    pub scenario: Option<String>,
    pub seed: Option<u64>,
    pub auto_approve: Option<bool>,
    pub corpus: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub start: Option<bool>,
    pub hitl_timeout_ms: Option<u64>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(toml::from_str(&text)?)
    }
}
