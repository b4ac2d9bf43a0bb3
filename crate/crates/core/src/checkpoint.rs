//! Versioned JSON parameter checkpoints.
//!
//! Layout: `{"format": "tknet-ckpt-v1", "params": {name: {shape, values}},
//! "feature_eps": [...], "meta": {...}}`. Spectral parameters live under
//! the `spectral/` name prefix; `feature_eps` stores the frozen auxiliary
//! draws so a reloaded model reproduces its feature map exactly; `meta` is
//! an opaque blob the caller uses to rebuild the model architecture.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::ParamStore;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "tknet-ckpt-v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointEntry {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub params: BTreeMap<String, CheckpointEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_eps: Option<Vec<f64>>,
    #[serde(default)]
    pub meta: serde_json::Value,
}

impl Checkpoint {
    pub fn from_store(
        store: &ParamStore,
        feature_eps: Option<Vec<f64>>,
        meta: serde_json::Value,
    ) -> Self {
        let params = store
            .iter()
            .map(|(name, entry)| {
                (
                    name.clone(),
                    CheckpointEntry {
                        shape: entry.shape.clone(),
                        values: entry.values.clone(),
                    },
                )
            })
            .collect();
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            params,
            feature_eps,
            meta,
        }
    }

    pub fn to_store(&self) -> ParamStore {
        let mut store = ParamStore::new();
        for (name, entry) in &self.params {
            store.insert(name, entry.shape.clone(), entry.values.clone());
        }
        store
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let json = serde_json::to_string(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let raw = std::fs::read_to_string(path)?;
        let ckpt: Checkpoint = serde_json::from_str(&raw)?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(Error::CheckpointFormat(format!(
                "expected header `{CHECKPOINT_FORMAT}`, found `{}`",
                ckpt.format
            )));
        }
        for (name, entry) in &ckpt.params {
            let n: usize = entry.shape.iter().product();
            if n != entry.values.len() {
                return Err(Error::CheckpointFormat(format!(
                    "parameter `{name}`: {} values for shape {:?}",
                    entry.values.len(),
                    entry.shape
                )));
            }
        }
        Ok(ckpt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_params_and_eps() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt.json");
        let mut store = ParamStore::new();
        store.insert("net/w1", vec![2, 2], vec![1.0, -0.5, 0.25, 2.0]);
        store.insert("spectral/mu", vec![2], vec![0.1, 0.2]);
        let ckpt = Checkpoint::from_store(
            &store,
            Some(vec![0.3, -0.7]),
            serde_json::json!({"model": "t-rnn"}),
        );
        ckpt.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded.format, CHECKPOINT_FORMAT);
        assert_eq!(loaded.feature_eps, Some(vec![0.3, -0.7]));
        assert_eq!(loaded.meta["model"], "t-rnn");
        let restored = loaded.to_store();
        assert_eq!(restored.get("net/w1").unwrap().values, vec![1.0, -0.5, 0.25, 2.0]);
        assert_eq!(restored.get("spectral/mu").unwrap().shape, vec![2]);
    }

    #[test]
    fn wrong_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt.json");
        std::fs::write(&path, r#"{"format":"other-v9","params":{}}"#).unwrap();
        assert!(matches!(
            Checkpoint::load(&path),
            Err(Error::CheckpointFormat(_))
        ));
    }
}
