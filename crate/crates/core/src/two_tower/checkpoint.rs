//! JSON checkpoint container.
//!
//! Layout: `{"format", "version", "embedder": {"dimension", "seed"},
//! "hidden", "output", "init_seed", "question": Tower, "information": Tower}`
//! where each tower holds `input`, `hidden`, `output` and the flat arrays
//! `w1` (hidden × input, row-major), `b1`, `w2` (output × hidden), `b2`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Tower, TwoTowerModel};
use crate::embedding::HashEmbedderConfig;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "scenerag-two-tower";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    embedder: HashEmbedderConfig,
    hidden: usize,
    output: usize,
    init_seed: u64,
    question: Tower,
    information: Tower,
}

impl TwoTowerModel {
    pub fn to_checkpoint_json(&self) -> Result<String> {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            embedder: self.embedder_config(),
            hidden: self.question_tower.hidden,
            output: self.question_tower.output,
            init_seed: self.init_seed,
            question: self.question_tower.clone(),
            information: self.information_tower.clone(),
        };
        Ok(serde_json::to_string(&ck)?)
    }

    pub fn from_checkpoint_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::CheckpointMismatch(format!(
                "unexpected format `{}`",
                ck.format
            )));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::CheckpointMismatch(format!(
                "unsupported version {} (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        for t in [&ck.question, &ck.information] {
            if t.hidden != ck.hidden || t.output != ck.output {
                return Err(Error::CheckpointMismatch(format!(
                    "tower dimensions ({}, {}) disagree with header ({}, {})",
                    t.hidden, t.output, ck.hidden, ck.output
                )));
            }
        }
        TwoTowerModel::from_parts(ck.embedder, ck.init_seed, ck.question, ck.information)
    }
}

pub fn save_model(model: &TwoTowerModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model.to_checkpoint_json()?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TwoTowerModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    TwoTowerModel::from_checkpoint_json(&text)
}
