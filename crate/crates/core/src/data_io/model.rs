//! JSON model files.
//!
//! A file is an envelope `{version, checksum, model}`. The checksum is the
//! SHA-256 of the compact JSON serialization of `model`, so it survives
//! reformatting but not edits to any value.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::booster::Ensemble;
use crate::cascade::CascadeThresholds;
use crate::cost_model::CostMatrix;
use crate::weak_learner::{CostTree, TreeRecord};
use crate::{Error, Result};

pub const MODEL_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MemberRecord {
    beta: f64,
    tree: TreeRecord,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelRecord {
    k: usize,
    cost: Vec<Vec<f64>>,
    shrinkage: f64,
    n_features: usize,
    depth_limit: usize,
    members: Vec<MemberRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    thresholds: Option<CascadeThresholds>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Envelope {
    version: u64,
    checksum: String,
    model: ModelRecord,
}

/// An ensemble and, once calibrated, its cascade thresholds.
#[derive(Clone, Debug, PartialEq)]
pub struct SavedModel {
    pub ensemble: Ensemble,
    pub thresholds: Option<CascadeThresholds>,
}

fn checksum(model: &ModelRecord) -> Result<String> {
    let compact = serde_json::to_string(model).map_err(|e| Error::Model(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(compact.as_bytes())))
}

/// Serializes a model to its canonical text form.
pub fn model_to_string(e: &Ensemble, thresholds: Option<&CascadeThresholds>) -> Result<String> {
    if e.is_empty() {
        return Err(Error::Model("refusing to save a model with no members".into()));
    }
    if let Some(t) = thresholds {
        t.check(e)?;
    }
    let model = ModelRecord {
        k: e.k(),
        cost: e.cost().rows().map(<[f64]>::to_vec).collect(),
        shrinkage: e.shrinkage(),
        n_features: e.n_features(),
        depth_limit: e.members().iter().map(|m| m.tree.depth_limit()).max().unwrap_or(1),
        members: e
            .members()
            .iter()
            .map(|m| MemberRecord {
                beta: m.beta,
                tree: m.tree.to_record(),
            })
            .collect(),
        thresholds: thresholds.cloned(),
    };
    let envelope = Envelope {
        version: MODEL_VERSION,
        checksum: checksum(&model)?,
        model,
    };
    let mut text =
        serde_json::to_string_pretty(&envelope).map_err(|e| Error::Model(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

fn json_error(e: serde_json::Error) -> Error {
    if e.is_eof() {
        Error::Truncated
    } else {
        Error::Model(e.to_string())
    }
}

/// Parses a model from text produced by [`model_to_string`].
pub fn model_from_str(text: &str) -> Result<SavedModel> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(json_error)?;
    match value.get("version").and_then(serde_json::Value::as_u64) {
        Some(MODEL_VERSION) => {}
        Some(found) => {
            return Err(Error::VersionMismatch {
                found,
                expected: MODEL_VERSION,
            })
        }
        None => return Err(Error::Model("missing or invalid \"version\" field".into())),
    }
    let envelope: Envelope = serde_json::from_value(value).map_err(json_error)?;
    let computed = checksum(&envelope.model)?;
    if computed != envelope.checksum {
        return Err(Error::Checksum {
            recorded: envelope.checksum,
            computed,
        });
    }

    let m = envelope.model;
    let cost = CostMatrix::from_rows(&m.cost)?;
    if cost.k() != m.k {
        return Err(Error::Model(format!(
            "cost matrix is {}x{} but k = {}",
            cost.k(),
            cost.k(),
            m.k
        )));
    }
    if m.members.is_empty() {
        return Err(Error::Model("model has no members".into()));
    }
    let mut ensemble = Ensemble::new(cost, m.shrinkage, m.n_features)?;
    for member in &m.members {
        let tree = CostTree::from_record(&member.tree, m.n_features, m.k, m.depth_limit)?;
        ensemble.push(member.beta, tree)?;
    }
    if let Some(t) = &m.thresholds {
        t.check(&ensemble)?;
    }
    Ok(SavedModel {
        ensemble,
        thresholds: m.thresholds,
    })
}

pub fn save_model(
    e: &Ensemble,
    thresholds: Option<&CascadeThresholds>,
    path: impl AsRef<Path>,
) -> Result<()> {
    std::fs::write(path, model_to_string(e, thresholds)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SavedModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    model_from_str(&text).map_err(|e| match e {
        Error::Model(message) => Error::Format {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}
