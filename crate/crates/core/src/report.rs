//! Report assembly and atomic file output.

use crate::conditions::PickVerdict;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    std::fs::write(&tmp, bytes).map_err(|e| Error::Io(format!("{}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Per-command verdicts; `None` when a command does not judge the item.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition_a: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition_b: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pick: Option<PickVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dbar: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub config: RunConfig,
}

/// Everything a command reports. Serialization is deterministic: a fixed
/// field order and named constants in a sorted map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub exit_code: i32,
    pub verdicts: Verdicts,
    pub constants: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub provenance: Provenance,
}

impl Report {
    pub fn new(command: &str, cfg: &RunConfig) -> Self {
        Report {
            command: command.into(),
            exit_code: 0,
            verdicts: Verdicts::default(),
            constants: BTreeMap::new(),
            witness: None,
            message: None,
            provenance: Provenance {
                config_hash: cfg.hash(),
                seed: cfg.seed,
                config: cfg.clone(),
            },
        }
    }

    pub fn constant(&mut self, name: &str, v: f64) -> &mut Self {
        self.constants.insert(name.into(), v);
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}
