use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::arch::MsnArch;
use super::net::{LayerParams, MsnModel};
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "masktrack-msn";
pub const MODEL_VERSION: u32 = 1;

/// On-disk JSON container: an architecture descriptor plus every tensor.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub arch: MsnArch,
    pub layers: Vec<LayerParams>,
}

impl From<&MsnModel> for ModelFile {
    fn from(model: &MsnModel) -> Self {
        ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            arch: model.arch().clone(),
            layers: model.layers().to_vec(),
        }
    }
}

impl TryFrom<ModelFile> for MsnModel {
    type Error = Error;

    fn try_from(file: ModelFile) -> Result<Self> {
        if file.format != MODEL_FORMAT {
            return Err(Error::Config(format!(
                "not a model file: format {:?}",
                file.format
            )));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::Config(format!(
                "unsupported model version {}",
                file.version
            )));
        }
        MsnModel::from_parts(file.arch, file.layers)
    }
}

pub fn save_model(model: &MsnModel, path: &Path) -> Result<()> {
    let json = serde_json::to_string(&ModelFile::from(model))?;
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<MsnModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ModelFile = serde_json::from_str(&text)?;
    MsnModel::try_from(file)
}
