//! `manifest.json`: what a run or session directory contains and how it was made.

use std::fs;
use std::path::Path;

use onwheel_core::driver_sim::SubjectTraits;
use onwheel_core::metrics::MetricsConfig;
use onwheel_core::runlog::Condition;
use serde::{Deserialize, Serialize};

use crate::docs::{parse_json, to_pretty_json, DocError};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Manifest {
    Study(StudyManifest),
    Session(SessionManifest),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadEntry {
    pub road_id: u32,
    pub name: String,
    pub scenario_file: String,
    pub scenario_hash: String,
}

/// One simulated drive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub subject: u32,
    pub condition: Condition,
    pub road_id: u32,
    pub seed: u64,
    pub traits: SubjectTraits,
    pub log: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub seed: u64,
    pub n_subjects: u32,
    pub conditions: Vec<Condition>,
    pub roads: Vec<RoadEntry>,
    pub params_file: String,
    /// SHA-256 of the compact JSON encoding of the parameters.
    pub params_hash: String,
    pub metrics_config: MetricsConfig,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores_file: Option<String>,
    pub metrics_file: String,
    pub runs: Vec<RunEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub protocol_version: u32,
    pub road_id: u32,
    pub scenario_file: String,
    pub scenario_hash: String,
    pub layout_file: String,
    pub layout_hash: String,
    pub key_map_file: String,
    pub key_map_hash: String,
    pub dwell_frames: u32,
    pub heartbeat_ms: f64,
    pub log: String,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Manifest, DocError> {
        let path = dir.join(MANIFEST_FILE);
        let shown = path.display().to_string();
        let text = fs::read_to_string(&path).map_err(|source| DocError::Io { path: shown.clone(), source })?;
        parse_json(&text, &shown)
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        fs::write(dir.join(MANIFEST_FILE), to_pretty_json(self))
    }
}
