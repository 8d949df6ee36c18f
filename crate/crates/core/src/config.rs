//! Experiment configuration: one TOML document covering every block of
//! the pipeline, schema-validated up front, with a stable fingerprint
//! for report provenance.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dram::{DramTimingParams, Scheduler};
use crate::engine::EngineConfig;
use crate::error::{Result, SimError};
use crate::hashgrid::HashGridConfig;
use crate::mapping::{BankAssignPolicy, DramGeometry, MappingPolicy};
use crate::nerf::MlpConfig;
use crate::parallelism::Strategy;
use crate::workload::StreamOrder;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorkloadConfig {
    pub batch_points: u64,
    pub rays: u32,
    pub samples_per_ray: u32,
    pub order: StreamOrder,
    pub seed: u64,
    pub register_model: bool,
    pub register_capacity: u32,
    pub scene: String,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            batch_points: 32 * 1024,
            rays: 256,
            samples_per_ray: 128,
            order: StreamOrder::RayFirst,
            seed: 1,
            register_model: true,
            register_capacity: 1,
            scene: "forward".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MappingConfig {
    pub policy: MappingPolicy,
    pub bank_assignment: BankAssignPolicy,
    pub scheduler: Scheduler,
}

impl Default for MappingConfig {
    fn default() -> Self {
        MappingConfig {
            policy: MappingPolicy::IntraLevel,
            bank_assignment: BankAssignPolicy::GroupedBalanced,
            scheduler: Scheduler::FrFcfs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParallelismConfig {
    pub strategies: [Strategy; 4],
    pub link_bytes_per_cycle: f64,
}

impl Default for ParallelismConfig {
    fn default() -> Self {
        ParallelismConfig {
            strategies: crate::parallelism::default_strategies(),
            link_bytes_per_cycle: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub report_path: Option<PathBuf>,
    pub trace_path: Option<PathBuf>,
    pub csv_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub grid: HashGridConfig,
    pub mlp: MlpConfig,
    pub workload: WorkloadConfig,
    pub geometry: DramGeometry,
    pub timing: DramTimingParams,
    pub engine: EngineConfig,
    pub mapping: MappingConfig,
    pub parallelism: ParallelismConfig,
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(s).map_err(|e| SimError::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        Self::from_toml_str(&s)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.geometry.validate()?;
        self.timing.validate()?;
        self.engine.validate(self.geometry.row_bytes)?;
        if self.workload.register_capacity == 0 {
            return Err(SimError::Config("register_capacity must be > 0".into()));
        }
        if self.parallelism.link_bytes_per_cycle <= 0.0 {
            return Err(SimError::Config("link_bytes_per_cycle must be positive".into()));
        }
        Ok(())
    }

    /// Stable content hash of the full configuration (hex SHA-256 of its
    /// canonical JSON form).
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(json.as_bytes());
        format!("{:x}", h.finalize())
    }
}
