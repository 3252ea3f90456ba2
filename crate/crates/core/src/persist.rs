//! Versioned JSON persistence for fitted models.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classify::Classifier;
use crate::decode::{CcbrModel, WienerModel};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StoredModel {
    Classifier { model: Classifier },
    Ccbr { models: Vec<CcbrModel> },
    Wiener { model: WienerModel },
}

#[derive(Serialize, Deserialize)]
struct Document {
    schema_version: u32,
    #[serde(flatten)]
    model: StoredModel,
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: Option<u32>,
}

pub fn to_json(model: &StoredModel) -> Result<String> {
    let doc = Document {
        schema_version: SCHEMA_VERSION,
        model: model.clone(),
    };
    Ok(serde_json::to_string(&doc)?)
}

pub fn from_json(text: &str) -> Result<StoredModel> {
    let probe: VersionProbe = serde_json::from_str(text)?;
    match probe.schema_version {
        Some(SCHEMA_VERSION) => {}
        Some(v) => {
            return Err(Error::UnsupportedInput(format!(
                "model schema version {v}, expected {SCHEMA_VERSION}"
            )))
        }
        None => return Err(Error::UnsupportedInput("model document has no schema_version".into())),
    }
    let doc: Document = serde_json::from_str(text)?;
    Ok(doc.model)
}

pub fn save_model(path: &Path, model: &StoredModel) -> Result<()> {
    fs::write(path, to_json(model)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<StoredModel> {
    let text = fs::read_to_string(path).map_err(|source| Error::Load {
        path: path.to_path_buf(),
        source,
    })?;
    from_json(&text)
}
