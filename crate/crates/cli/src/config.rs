//! Flat `key = value` settings layered onto the model and training configs.
//!
//! Sources apply in order: preset, config files, `--set` pairs, then
//! dedicated flags. A `preset` key anywhere picks the starting model config.

use std::path::PathBuf;

use anyhow::Context;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use stpotr::follow::parse_key_values;
use stpotr::model::ModelConfig;
use stpotr::training::TrainConfig;

use crate::Usage;

pub fn preset(name: &str) -> anyhow::Result<ModelConfig> {
    match name {
        "desk" => Ok(ModelConfig::desk()),
        "paper" => Ok(ModelConfig::paper()),
        "tiny" => Ok(ModelConfig::tiny()),
        _ => Err(Usage(format!("unknown preset '{name}' (desk, paper, tiny)")).into()),
    }
}

/// Sets `key` on a serde struct from its text form. `None` when the struct
/// has no such field.
fn set_field<T: Serialize + DeserializeOwned>(target: &mut T, key: &str, raw: &str) -> Option<anyhow::Result<()>> {
    let mut value = serde_json::to_value(&*target).expect("config serializes");
    let fields = value.as_object_mut().expect("config is a struct");
    if !fields.contains_key(key) {
        return None;
    }
    let parsed = serde_json::from_str::<Value>(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    fields.insert(key.to_string(), parsed);
    Some(match serde_json::from_value(value) {
        Ok(t) => {
            *target = t;
            Ok(())
        }
        Err(e) => Err(Usage(format!("{key} = {raw}: {e}")).into()),
    })
}

/// Collected `key = value` pairs from files and `--set` arguments.
pub fn gather(files: &[PathBuf], sets: &[String]) -> anyhow::Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for path in files {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        pairs.extend(parse_key_values(&text).map_err(|e| Usage(format!("{}: {e}", path.display())))?);
    }
    for s in sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Usage(format!("--set expects key=value, got '{s}'")))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Settings {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl Settings {
    /// Applies pairs to the model config, then the training config. Keys
    /// known to neither are usage errors, unless `train` is off, in which
    /// case training keys are rejected too.
    pub fn build(pairs: &[(String, String)], with_train: bool) -> anyhow::Result<Settings> {
        let start = pairs
            .iter()
            .rev()
            .find(|(k, _)| k == "preset")
            .map_or(Ok(ModelConfig::desk()), |(_, v)| preset(v))?;
        let mut s = Settings {
            model: start,
            train: TrainConfig::default(),
        };
        for (k, v) in pairs.iter().filter(|(k, _)| k != "preset") {
            if let Some(r) = set_field(&mut s.model, k, v) {
                r?;
            } else if let Some(r) = with_train.then(|| set_field(&mut s.train, k, v)).flatten() {
                r?;
            } else {
                return Err(Usage(format!("unknown config key '{k}'")).into());
            }
        }
        Ok(s)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.model.validate().map_err(|e| Usage(e.to_string()))?;
        self.train.validate().map_err(|e| Usage(e.to_string()))?;
        Ok(())
    }
}
