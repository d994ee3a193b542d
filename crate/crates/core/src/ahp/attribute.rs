use serde::{Deserialize, Serialize};

use crate::AttributeId;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    HigherIsBetter,
    LowerIsBetter,
}

/// A quality attribute stakeholders compare, e.g. safety measured in
/// expected collisions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityAttribute {
    pub id: AttributeId,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub metric_unit: String,
    #[serde(default)]
    pub direction: Direction,
}

impl QualityAttribute {
    pub fn new(id: impl Into<AttributeId>, name: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            description: String::new(),
            metric_unit: String::new(),
            direction: Direction::HigherIsBetter,
        }
    }

    pub fn with_metric(mut self, unit: impl Into<String>, direction: Direction) -> Self {
        self.metric_unit = unit.into();
        self.direction = direction;
        self
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }
}
