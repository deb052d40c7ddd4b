//! JSON documents: scenarios, menu layouts, simulator parameters and key maps.

use std::fs;
use std::path::Path;

use onwheel_core::driver_sim::DriverParams;
use onwheel_core::gesture_input::KeyMap;
use onwheel_core::menu::{load_layout, LayoutDocument, MenuLayout};
use onwheel_core::scenario::{builtin_scenario, load_scenario, Scenario, ScenarioDocument};
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DocError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: line {line}, column {column}: {msg}")]
    Syntax { path: String, line: usize, column: usize, msg: String },
    #[error("{path}: {msg}")]
    Invalid { path: String, msg: String },
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, DocError> {
    let shown = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| DocError::Io { path: shown.clone(), source })?;
    parse_json(&text, &shown)
}

/// Parses a document, reporting syntax and shape errors by line and column.
pub fn parse_json<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T, DocError> {
    serde_json::from_str(text).map_err(|e| DocError::Syntax {
        path: origin.to_string(),
        line: e.line(),
        column: e.column(),
        msg: e.to_string().split(" at line ").next().unwrap_or_default().to_string(),
    })
}

pub fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents serialize");
    s.push('\n');
    s
}

pub fn read_scenario(path: &Path) -> Result<Scenario, DocError> {
    let doc: ScenarioDocument = read_json(path)?;
    load_scenario(&doc).map_err(|e| DocError::Invalid { path: path.display().to_string(), msg: e.to_string() })
}

/// A built-in road by number, or a scenario document.
pub fn resolve_scenario(road: u32, file: Option<&Path>) -> Result<Scenario, DocError> {
    match file {
        Some(path) => read_scenario(path),
        None => {
            builtin_scenario(road).map_err(|e| DocError::Invalid { path: format!("road {road}"), msg: e.to_string() })
        }
    }
}

pub fn read_layout(path: &Path) -> Result<MenuLayout, DocError> {
    let doc: LayoutDocument = read_json(path)?;
    load_layout(&doc).map_err(|e| DocError::Invalid { path: path.display().to_string(), msg: e.to_string() })
}

pub fn read_params(path: &Path) -> Result<DriverParams, DocError> {
    let params: DriverParams = read_json(path)?;
    params.validate().map_err(|e| DocError::Invalid { path: path.display().to_string(), msg: e.to_string() })?;
    Ok(params)
}

pub fn read_key_map(path: &Path) -> Result<KeyMap, DocError> {
    let map: KeyMap = read_json(path)?;
    map.validate().map_err(|e| DocError::Invalid { path: path.display().to_string(), msg: e.to_string() })?;
    Ok(map)
}

/// SHA-256 of the compact JSON encoding, as lowercase hex.
pub fn content_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("documents serialize");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Task table as CSV: one row per scheduled task.
pub fn scenario_csv(scenario: &Scenario) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "location_m", "condition", "device", "feature", "control", "levels", "prompt"])
        .expect("in-memory write");
    for t in scenario.tasks() {
        w.write_record([
            t.index.to_string(),
            t.location_m.to_string(),
            t.condition.name().to_string(),
            t.device.name().to_string(),
            t.feature.to_string().to_lowercase(),
            t.control.name().to_lowercase(),
            t.levels.to_string(),
            t.prompt(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV output is UTF-8")
}
