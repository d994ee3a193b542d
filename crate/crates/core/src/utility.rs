//! Weighted-sum utility functions.
//!
//! A [`UtilityFunction`] pairs each attribute's aggregate weight with a
//! [`PreferenceFunction`] mapping raw metric values onto a preference.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ahp::Direction;
use crate::priority::SUM_TOLERANCE;
use crate::{canonical, AttributeId, PriorityVector};

pub const UTILITY_SCHEMA: &str = "stakeweigh.utility/1";

/// Preference at the good-enough threshold; the insufficient threshold maps
/// to `1 - GOOD_ENOUGH_PREFERENCE`.
pub const GOOD_ENOUGH_PREFERENCE: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UtilityError {
    #[error("no preference function for `{0}`")]
    MissingPreference(AttributeId),
    #[error("raw_linear utility cannot use a sigmoid for `{0}`")]
    SigmoidInRawLinear(AttributeId),
    #[error("invalid sigmoid: {0}")]
    InvalidSigmoid(String),
    #[error("sample has no value for `{0}`")]
    MissingMetric(AttributeId),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("attribute `{0}` appears twice")]
    DuplicateAttribute(AttributeId),
    #[error("malformed utility document: {0}")]
    Document(String),
}

/// Maps a raw metric value to a preference.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PreferenceFunction {
    /// Returns the raw value; the caller is responsible for scaling.
    IdentityLinear,
    /// Logistic curve through 0.05 at `insufficient` and 0.95 at
    /// `good_enough`. The curve rises when `good_enough > insufficient`
    /// (higher is better) and falls otherwise.
    Sigmoid { insufficient: f64, good_enough: f64 },
}

impl PreferenceFunction {
    /// A sigmoid whose orientation must agree with `direction`.
    pub fn sigmoid(
        insufficient: f64,
        good_enough: f64,
        direction: Direction,
    ) -> Result<Self, UtilityError> {
        let pf = PreferenceFunction::Sigmoid {
            insufficient,
            good_enough,
        };
        pf.validate()?;
        if pf.direction() != Some(direction) {
            return Err(UtilityError::InvalidSigmoid(format!(
                "thresholds insufficient={insufficient}, good_enough={good_enough} contradict {direction:?}"
            )));
        }
        Ok(pf)
    }

    /// The same thresholds with the opposite orientation.
    pub fn mirrored(self) -> Self {
        match self {
            PreferenceFunction::IdentityLinear => self,
            PreferenceFunction::Sigmoid {
                insufficient,
                good_enough,
            } => PreferenceFunction::Sigmoid {
                insufficient: good_enough,
                good_enough: insufficient,
            },
        }
    }

    pub fn direction(&self) -> Option<Direction> {
        match *self {
            PreferenceFunction::IdentityLinear => None,
            PreferenceFunction::Sigmoid {
                insufficient,
                good_enough,
            } => Some(if good_enough > insufficient {
                Direction::HigherIsBetter
            } else {
                Direction::LowerIsBetter
            }),
        }
    }

    /// Steepness `s` and centre `c` of `1 / (1 + exp(-s (x - c)))`.
    pub fn sigmoid_parameters(&self) -> Option<(f64, f64)> {
        match *self {
            PreferenceFunction::IdentityLinear => None,
            PreferenceFunction::Sigmoid {
                insufficient,
                good_enough,
            } => {
                let odds = GOOD_ENOUGH_PREFERENCE / (1.0 - GOOD_ENOUGH_PREFERENCE);
                let slope = 2.0 * odds.ln() / (good_enough - insufficient);
                Some((slope, (insufficient + good_enough) / 2.0))
            }
        }
    }

    pub fn value(&self, raw: f64) -> f64 {
        match self.sigmoid_parameters() {
            None => raw,
            Some((slope, centre)) => 1.0 / (1.0 + (-slope * (raw - centre)).exp()),
        }
    }

    fn validate(&self) -> Result<(), UtilityError> {
        if let PreferenceFunction::Sigmoid {
            insufficient,
            good_enough,
        } = *self
        {
            if !insufficient.is_finite() || !good_enough.is_finite() {
                return Err(UtilityError::InvalidSigmoid(
                    "thresholds must be finite".into(),
                ));
            }
            if insufficient == good_enough {
                return Err(UtilityError::InvalidSigmoid(
                    "thresholds must differ".into(),
                ));
            }
        }
        Ok(())
    }
}

pub fn preference_value(pf: &PreferenceFunction, raw: f64) -> f64 {
    pf.value(raw)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityMode {
    /// Weighted sum of preferences in [0, 1].
    #[default]
    PreferenceNormalized,
    /// Weighted sum of raw metric values; identity preferences only.
    RawLinear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilityTerm {
    pub attribute: AttributeId,
    pub weight: f64,
    pub preference: PreferenceFunction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "UtilityDocument", into = "UtilityDocument")]
pub struct UtilityFunction {
    mode: UtilityMode,
    terms: Vec<UtilityTerm>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UtilityDocument {
    schema: String,
    mode: UtilityMode,
    terms: Vec<UtilityTerm>,
}

impl TryFrom<UtilityDocument> for UtilityFunction {
    type Error = UtilityError;

    fn try_from(doc: UtilityDocument) -> Result<Self, UtilityError> {
        if doc.schema != UTILITY_SCHEMA {
            return Err(UtilityError::Document(format!(
                "unsupported schema `{}`",
                doc.schema
            )));
        }
        Self::new(doc.mode, doc.terms)
    }
}

impl From<UtilityFunction> for UtilityDocument {
    fn from(u: UtilityFunction) -> Self {
        UtilityDocument {
            schema: UTILITY_SCHEMA.to_owned(),
            mode: u.mode,
            terms: u.terms,
        }
    }
}

/// Raw metric values of one candidate (e.g. one mission), keyed by
/// attribute.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MetricSample(pub BTreeMap<AttributeId, f64>);

impl MetricSample {
    pub fn get(&self, id: &AttributeId) -> Option<f64> {
        self.0.get(id).copied()
    }
}

impl<K: Into<AttributeId>> FromIterator<(K, f64)> for MetricSample {
    fn from_iter<I: IntoIterator<Item = (K, f64)>>(iter: I) -> Self {
        Self(iter.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    CanonicalJson,
    HumanReadableExpression,
}

impl UtilityFunction {
    pub fn new(mode: UtilityMode, terms: Vec<UtilityTerm>) -> Result<Self, UtilityError> {
        if terms.is_empty() {
            return Err(UtilityError::InvalidWeights("no terms".into()));
        }
        let mut seen = HashSet::new();
        for t in &terms {
            if !seen.insert(&t.attribute) {
                return Err(UtilityError::DuplicateAttribute(t.attribute.clone()));
            }
            if !(t.weight.is_finite() && t.weight >= 0.0) {
                return Err(UtilityError::InvalidWeights(format!(
                    "weight of `{}` is {}",
                    t.attribute, t.weight
                )));
            }
            t.preference.validate()?;
            if mode == UtilityMode::RawLinear
                && !matches!(t.preference, PreferenceFunction::IdentityLinear)
            {
                return Err(UtilityError::SigmoidInRawLinear(t.attribute.clone()));
            }
        }
        let sum: f64 = terms.iter().map(|t| t.weight).sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(UtilityError::InvalidWeights(format!(
                "weights sum to {sum}"
            )));
        }
        Ok(Self { mode, terms })
    }

    pub fn mode(&self) -> UtilityMode {
        self.mode
    }

    pub fn terms(&self) -> &[UtilityTerm] {
        &self.terms
    }

    /// `sum_i w_i * pref_i(sample[i])`.
    pub fn evaluate(&self, sample: &MetricSample) -> Result<f64, UtilityError> {
        self.terms.iter().try_fold(0.0, |acc, t| {
            let raw = sample
                .get(&t.attribute)
                .ok_or_else(|| UtilityError::MissingMetric(t.attribute.clone()))?;
            Ok(acc + t.weight * t.preference.value(raw))
        })
    }

    pub fn export(&self, format: ExportFormat) -> String {
        match format {
            ExportFormat::CanonicalJson => self.to_canonical_json(),
            ExportFormat::HumanReadableExpression => self.to_expression(),
        }
    }

    pub fn to_canonical_json(&self) -> String {
        canonical::to_string(self).expect("utility function serializes")
    }

    pub fn from_canonical_json(text: &str) -> Result<Self, UtilityError> {
        serde_json::from_str(text).map_err(|e| UtilityError::Document(e.to_string()))
    }

    /// `U(m) = 0.800·safety(m) + …`; preference-normalized terms render as
    /// `pref_<attribute>(m)`.
    pub fn to_expression(&self) -> String {
        let terms: Vec<String> = self
            .terms
            .iter()
            .map(|t| match self.mode {
                UtilityMode::RawLinear => format!("{:.3}·{}(m)", t.weight, t.attribute),
                UtilityMode::PreferenceNormalized => {
                    format!("{:.3}·pref_{}(m)", t.weight, t.attribute)
                }
            })
            .collect();
        format!("U(m) = {}", terms.join(" + "))
    }
}

/// Pairs aggregate priorities with per-attribute preference functions. The
/// weights are taken verbatim.
pub fn build_utility(
    priorities: &PriorityVector,
    preferences: &BTreeMap<AttributeId, PreferenceFunction>,
    mode: UtilityMode,
) -> Result<UtilityFunction, UtilityError> {
    let terms = priorities
        .iter()
        .map(|(id, weight)| {
            let preference = *preferences
                .get(id)
                .ok_or_else(|| UtilityError::MissingPreference(id.clone()))?;
            Ok(UtilityTerm {
                attribute: id.clone(),
                weight,
                preference,
            })
        })
        .collect::<Result<Vec<_>, UtilityError>>()?;
    UtilityFunction::new(mode, terms)
}
