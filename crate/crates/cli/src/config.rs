//! TOML configuration shared by every subcommand.
//!
//! ```toml
//! [qpu]
//! device_id = "qpu0"
//! port = 8100
//!
//! [scheduler]
//! cpu_slots = 8
//! gpu_slots = 2
//! qpu_endpoints = ["http://127.0.0.1:8100", "http://127.0.0.1:8101"]
//!
//! [client]
//! scheduler_url = "http://127.0.0.1:8200"
//! ```
//!
//! `QPU_ENDPOINTS` (comma separated) overrides both endpoint lists.

use std::path::Path;

use photonic_hpc::scheduler::SchedulerConfig;
use photonic_hpc::service::DeviceConfig;
use serde::Deserialize;

use crate::error::CliError;

pub const ENDPOINTS_ENV: &str = "QPU_ENDPOINTS";

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub qpu: DeviceConfig,
    pub scheduler: SchedulerConfig,
    pub client: ClientSection,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClientSection {
    pub scheduler_url: String,
    pub endpoints: Vec<String>,
}

impl Default for ClientSection {
    fn default() -> Self {
        ClientSection { scheduler_url: "http://127.0.0.1:8200".into(), endpoints: Vec::new() }
    }
}

fn parse_endpoints(raw: &str) -> Vec<String> {
    raw.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Reads `path` when given, then applies the environment override.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => FileConfig::default(),
        };
        if let Ok(raw) = std::env::var(ENDPOINTS_ENV) {
            let eps = parse_endpoints(&raw);
            if !eps.is_empty() {
                cfg.scheduler.qpu_endpoints = eps.clone();
                cfg.client.endpoints = eps;
            }
        }
        Ok(cfg)
    }
}

/// Command-line endpoints win over the configured list.
pub fn resolve_endpoints(flag: &Option<String>, cfg: &FileConfig) -> Vec<String> {
    match flag {
        Some(raw) => parse_endpoints(raw),
        None => cfg.client.endpoints.clone(),
    }
}
