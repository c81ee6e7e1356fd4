use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, MolSetsModel};
use crate::chem::FEATURE_SCHEMA_VERSION;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_FORMAT: &str = "molsets-checkpoint/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredTensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// On-disk model: architecture, seed and every parameter array keyed by its
/// layer path.
///
/// Floats are written in shortest round-trip form and parsed with correct
/// rounding, so save/load is bit-exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub feature_schema_version: u32,
    pub seed: u64,
    pub config: ModelConfig,
    pub params: BTreeMap<String, StoredTensor>,
}

impl Checkpoint {
    pub fn from_model(model: &MolSetsModel) -> Self {
        let params = model
            .store
            .iter()
            .map(|(name, t)| {
                (
                    name.to_string(),
                    StoredTensor {
                        shape: t.shape().to_vec(),
                        data: t.data().to_vec(),
                    },
                )
            })
            .collect();
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            feature_schema_version: FEATURE_SCHEMA_VERSION,
            seed: model.seed,
            config: model.config.clone(),
            params,
        }
    }

    pub fn into_model(self) -> Result<MolSetsModel> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Model(format!("unknown checkpoint format {:?}", self.format)));
        }
        if self.feature_schema_version != FEATURE_SCHEMA_VERSION {
            return Err(Error::Model(format!(
                "checkpoint feature schema {} does not match {}",
                self.feature_schema_version, FEATURE_SCHEMA_VERSION
            )));
        }
        let mut model = MolSetsModel::new(self.config, self.seed)?;
        if self.params.len() != model.store.len() {
            return Err(Error::Model(format!(
                "checkpoint holds {} tensors, architecture needs {}",
                self.params.len(),
                model.store.len()
            )));
        }
        for (name, stored) in self.params {
            let id = model
                .store
                .id(&name)
                .ok_or_else(|| Error::Model(format!("unexpected parameter {name}")))?;
            if model.store.get(id).shape() != stored.shape.as_slice() {
                return Err(Error::Model(format!(
                    "parameter {name} has shape {:?}, expected {:?}",
                    stored.shape,
                    model.store.get(id).shape()
                )));
            }
            *model.store.get_mut(id) = Tensor::new(stored.shape, stored.data)?;
        }
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl MolSetsModel {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, Checkpoint::from_model(self).to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Checkpoint::from_json(&std::fs::read_to_string(path)?)?.into_model()
    }
}
