//! Run manifests and `--config` overlays.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{config_err, Failure};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to rerun a command: `roughvol <command> --config <manifest>`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Fully resolved command arguments.
    pub config: Value,
    pub seed: Option<u64>,
    pub library_version: String,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<PathBuf>,
    pub wall_time_seconds: f64,
}

impl RunManifest {
    pub fn new<A: Serialize>(command: &str, args: &A, seed: Option<u64>, inputs: &[PathBuf]) -> Result<Self, Failure> {
        Ok(Self {
            command: command.into(),
            config: serde_json::to_value(args)?,
            seed,
            library_version: roughvol::VERSION.into(),
            inputs: inputs.iter().map(|p| digest(p)).collect::<Result<_, _>>()?,
            outputs: Vec::new(),
            wall_time_seconds: 0.0,
        })
    }

    /// Writes the manifest beside `primary` as `<stem>.manifest.json`.
    pub fn write_beside(mut self, primary: &Path, outputs: Vec<PathBuf>, wall: Duration) -> Result<PathBuf, Failure> {
        self.outputs = outputs;
        self.wall_time_seconds = wall.as_secs_f64();
        let path = manifest_path(primary);
        std::fs::write(&path, serde_json::to_string_pretty(&self)? + "\n")?;
        Ok(path)
    }
}

pub fn manifest_path(primary: &Path) -> PathBuf {
    primary.with_extension("manifest.json")
}

pub fn digest(path: &Path) -> Result<InputDigest, Failure> {
    let bytes = std::fs::read(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let hash = Sha256::digest(&bytes);
    Ok(InputDigest {
        path: path.to_path_buf(),
        sha256: hash.iter().map(|b| format!("{b:02x}")).collect(),
    })
}

/// Applies a `--config` file on top of the parsed flags.
///
/// The file is either a plain object of argument names or a manifest, in which
/// case its `config` is used and its input digests are checked.
pub fn overlay<A: Serialize + DeserializeOwned>(args: A, command: &str, path: &Path) -> Result<A, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let file: Value = serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let overrides = match serde_json::from_value::<RunManifest>(file.clone()) {
        Ok(m) => {
            if m.command != command {
                return Err(config_err(format!(
                    "{} is a manifest for `{}`, not `{command}`",
                    path.display(),
                    m.command
                )));
            }
            for input in &m.inputs {
                if digest(&input.path)? != *input {
                    return Err(config_err(format!("{} changed since the manifest was written", input.path.display())));
                }
            }
            m.config
        }
        Err(_) => file,
    };
    let Value::Object(overrides) = overrides else {
        return Err(config_err(format!("{}: expected a JSON object", path.display())));
    };
    let mut merged = serde_json::to_value(args)?;
    let fields = merged.as_object_mut().expect("arguments serialize to an object");
    for (k, v) in overrides {
        if !fields.contains_key(&k) {
            return Err(config_err(format!("{}: unknown option `{k}` for `{command}`", path.display())));
        }
        fields.insert(k, v);
    }
    serde_json::from_value(merged).map_err(|e| config_err(format!("{}: {e}", path.display())))
}
