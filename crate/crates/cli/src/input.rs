//! Input documents and their loaders.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Deserialize;
use stakeweigh_core::{AttributeId, PriorityVector, StakeholderId};

/// A failed load, already phrased for the user.
#[derive(Debug)]
pub struct InputError(pub String);

/// Reads and parses a JSON file. Parse errors name the field path, line
/// and column.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, InputError> {
    let text = fs::read_to_string(path)
        .map_err(|e| InputError(format!("{}: cannot read: {e}", path.display())))?;
    parse(&text).map_err(|msg| InputError(format!("{}: {msg}", path.display())))
}

pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T, String> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            inner.to_string()
        } else {
            format!("field `{path}`: {inner}")
        }
    })?;
    de.end().map_err(|e| e.to_string())?;
    Ok(value)
}

/// One entry of a rankings file. The label names the stakeholder in
/// conflict listings; unlabeled entries are numbered from 1.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankingEntry {
    #[serde(default)]
    pub stakeholder: Option<String>,
    pub attribute_ids: Vec<AttributeId>,
    pub ranks: Vec<u32>,
}

/// One entry of an aggregation vectors file.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorEntry {
    pub stakeholder_id: StakeholderId,
    pub priorities: PriorityVector,
    #[serde(default)]
    pub abstentions: Vec<AttributeId>,
}
