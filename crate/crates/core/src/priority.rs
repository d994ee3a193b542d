use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::AttributeId;

/// Accepted deviation of `sum(values)` from 1 for vectors supplied from
/// outside. Vectors computed by this crate sum to 1 within 1e-9.
pub const SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PriorityError {
    #[error("priority vector is empty")]
    Empty,
    #[error("{ids} attribute ids but {values} values")]
    LengthMismatch { ids: usize, values: usize },
    #[error("duplicate attribute `{0}` in priority vector")]
    DuplicateAttribute(AttributeId),
    #[error("priority of `{0}` must be positive and finite")]
    NonPositive(AttributeId),
    #[error("priorities sum to {0}, expected 1")]
    BadSum(f64),
}

/// Relative importances of a set of attributes, summing to 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPriorities")]
pub struct PriorityVector {
    attribute_ids: Vec<AttributeId>,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawPriorities {
    attribute_ids: Vec<AttributeId>,
    values: Vec<f64>,
}

impl TryFrom<RawPriorities> for PriorityVector {
    type Error = PriorityError;

    fn try_from(raw: RawPriorities) -> Result<Self, PriorityError> {
        Self::new(raw.attribute_ids, raw.values)
    }
}

impl PriorityVector {
    pub fn new(attribute_ids: Vec<AttributeId>, values: Vec<f64>) -> Result<Self, PriorityError> {
        if attribute_ids.is_empty() {
            return Err(PriorityError::Empty);
        }
        if attribute_ids.len() != values.len() {
            return Err(PriorityError::LengthMismatch {
                ids: attribute_ids.len(),
                values: values.len(),
            });
        }
        let mut seen = HashSet::new();
        for (id, &v) in attribute_ids.iter().zip(&values) {
            if !seen.insert(id) {
                return Err(PriorityError::DuplicateAttribute(id.clone()));
            }
            if !(v.is_finite() && v > 0.0) {
                return Err(PriorityError::NonPositive(id.clone()));
            }
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(PriorityError::BadSum(sum));
        }
        Ok(Self {
            attribute_ids,
            values,
        })
    }

    /// Equal priority `1/n` for every attribute.
    pub fn uniform(attribute_ids: Vec<AttributeId>) -> Result<Self, PriorityError> {
        let n = attribute_ids.len();
        Self::new(attribute_ids, vec![1.0 / n.max(1) as f64; n])
    }

    pub(crate) fn from_parts_unchecked(attribute_ids: Vec<AttributeId>, values: Vec<f64>) -> Self {
        debug_assert_eq!(attribute_ids.len(), values.len());
        Self {
            attribute_ids,
            values,
        }
    }

    pub fn attribute_ids(&self) -> &[AttributeId] {
        &self.attribute_ids
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: &AttributeId) -> Option<f64> {
        self.attribute_ids
            .iter()
            .position(|a| a == id)
            .map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&AttributeId, f64)> + '_ {
        self.attribute_ids.iter().zip(self.values.iter().copied())
    }
}
