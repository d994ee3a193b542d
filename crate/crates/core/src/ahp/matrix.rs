use std::collections::HashSet;

use num_traits::One;
use serde::{Deserialize, Serialize};

use super::judgment::is_legal_value;
use super::{AhpError, Judgment, PositiveMatrix, Rational};
use crate::AttributeId;

/// Largest supported matrix order. Random indices are tabulated up to here.
pub const MAX_ORDER: usize = 15;

/// One stakeholder's positive reciprocal judgment matrix.
///
/// Entries are stored row-major as exact rationals. Every off-diagonal entry
/// is a value of the judgment scale and `a_ji` is always the exact
/// reciprocal of `a_ij`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MatrixDocument", into = "MatrixDocument")]
pub struct ComparisonMatrix {
    attributes: Vec<AttributeId>,
    entries: Vec<Rational>,
}

/// Interchange form: attribute ids plus row-major `[numerator, denominator]`
/// pairs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixDocument {
    pub attributes: Vec<AttributeId>,
    pub entries: Vec<[u64; 2]>,
}

impl ComparisonMatrix {
    /// All-ones matrix: every pair equally preferred.
    pub fn new(attributes: Vec<AttributeId>) -> Result<Self, AhpError> {
        check_attributes(&attributes)?;
        let n = attributes.len();
        Ok(Self {
            attributes,
            entries: vec![Rational::one(); n * n],
        })
    }

    /// Builds a matrix from full rows, validating every invariant.
    pub fn from_rows(
        attributes: Vec<AttributeId>,
        rows: Vec<Vec<Rational>>,
    ) -> Result<Self, AhpError> {
        check_attributes(&attributes)?;
        let n = attributes.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(AhpError::WrongEntryCount {
                expected: n * n,
                actual: rows.iter().map(Vec::len).sum(),
            });
        }
        let entries = rows.into_iter().flatten().collect();
        let m = Self {
            attributes,
            entries,
        };
        m.validate()?;
        Ok(m)
    }

    /// Builds a matrix from its upper triangle, given row by row as
    /// `(i, j, judgment)` with `i < j`. Unlisted pairs stay at 1.
    pub fn from_upper(
        attributes: Vec<AttributeId>,
        judgments: &[(usize, usize, Judgment)],
    ) -> Result<Self, AhpError> {
        let mut m = Self::new(attributes)?;
        for &(i, j, judgment) in judgments {
            m.set_judgment_in_place(i, j, judgment)?;
        }
        Ok(m)
    }

    pub fn order(&self) -> usize {
        self.attributes.len()
    }

    pub fn attributes(&self) -> &[AttributeId] {
        &self.attributes
    }

    pub fn index_of(&self, id: &AttributeId) -> Option<usize> {
        self.attributes.iter().position(|a| a == id)
    }

    pub fn get(&self, i: usize, j: usize) -> Rational {
        self.entries[i * self.order() + j]
    }

    /// Returns a copy with `a_ij` set to the judgment value and `a_ji` to its
    /// reciprocal.
    pub fn set_judgment(&self, i: usize, j: usize, judgment: Judgment) -> Result<Self, AhpError> {
        let mut m = self.clone();
        m.set_judgment_in_place(i, j, judgment)?;
        Ok(m)
    }

    pub fn set_judgment_in_place(
        &mut self,
        i: usize,
        j: usize,
        judgment: Judgment,
    ) -> Result<(), AhpError> {
        let n = self.order();
        if i >= n || j >= n {
            return Err(AhpError::IndexOutOfBounds { i, j, n });
        }
        if i == j {
            return Err(AhpError::DiagonalImmutable(i));
        }
        let value = judgment.value();
        self.entries[i * n + j] = value;
        self.entries[j * n + i] = value.recip();
        Ok(())
    }

    /// Floating-point view for eigen computations.
    pub fn to_dense(&self) -> PositiveMatrix {
        let n = self.order();
        let data = self
            .entries
            .iter()
            .map(|r| *r.numer() as f64 / *r.denom() as f64)
            .collect();
        PositiveMatrix::from_raw(n, data)
    }

    /// The principal submatrix that drops the listed attributes.
    pub fn without(&self, excluded: &[AttributeId]) -> Result<Self, AhpError> {
        let keep: Vec<usize> = (0..self.order())
            .filter(|&i| !excluded.contains(&self.attributes[i]))
            .collect();
        let attributes: Vec<AttributeId> =
            keep.iter().map(|&i| self.attributes[i].clone()).collect();
        check_attributes(&attributes)?;
        let entries = keep
            .iter()
            .flat_map(|&i| keep.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect();
        Ok(Self {
            attributes,
            entries,
        })
    }

    pub fn to_document(&self) -> MatrixDocument {
        MatrixDocument {
            attributes: self.attributes.clone(),
            entries: self
                .entries
                .iter()
                .map(|r| [*r.numer(), *r.denom()])
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, AhpError> {
        let doc: MatrixDocument =
            serde_json::from_str(text).map_err(|e| AhpError::Document(e.to_string()))?;
        Self::try_from(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_document()).expect("matrix document serializes")
    }

    fn validate(&self) -> Result<(), AhpError> {
        let n = self.order();
        if self.entries.len() != n * n {
            return Err(AhpError::WrongEntryCount {
                expected: n * n,
                actual: self.entries.len(),
            });
        }
        for i in 0..n {
            if !self.get(i, i).is_one() {
                return Err(AhpError::DiagonalImmutable(i));
            }
            for j in 0..n {
                if i == j {
                    continue;
                }
                let v = self.get(i, j);
                if !is_legal_value(&v) {
                    return Err(AhpError::IllegalJudgment {
                        i,
                        j,
                        value: format!("{}/{}", v.numer(), v.denom()),
                    });
                }
            }
        }
        // Legal values are at most 9/1, so these products cannot overflow.
        for i in 0..n {
            for j in i + 1..n {
                if !(self.get(i, j) * self.get(j, i)).is_one() {
                    return Err(AhpError::NotReciprocal { i, j });
                }
            }
        }
        Ok(())
    }
}

impl TryFrom<MatrixDocument> for ComparisonMatrix {
    type Error = AhpError;

    fn try_from(doc: MatrixDocument) -> Result<Self, AhpError> {
        check_attributes(&doc.attributes)?;
        let n = doc.attributes.len();
        if doc.entries.len() != n * n {
            return Err(AhpError::WrongEntryCount {
                expected: n * n,
                actual: doc.entries.len(),
            });
        }
        let mut entries = Vec::with_capacity(n * n);
        for (idx, [num, den]) in doc.entries.into_iter().enumerate() {
            if num == 0 || den == 0 {
                return Err(AhpError::NonPositiveEntry {
                    i: idx / n,
                    j: idx % n,
                });
            }
            entries.push(Rational::new(num, den));
        }
        let m = Self {
            attributes: doc.attributes,
            entries,
        };
        m.validate()?;
        Ok(m)
    }
}

impl From<ComparisonMatrix> for MatrixDocument {
    fn from(m: ComparisonMatrix) -> Self {
        m.to_document()
    }
}

fn check_attributes(attributes: &[AttributeId]) -> Result<(), AhpError> {
    if attributes.len() < 2 {
        return Err(AhpError::TooFewAttributes(attributes.len()));
    }
    if attributes.len() > MAX_ORDER {
        return Err(AhpError::OrderTooLarge(attributes.len()));
    }
    let mut seen = HashSet::new();
    for a in attributes {
        if !seen.insert(a) {
            return Err(AhpError::DuplicateAttribute(a.to_string()));
        }
    }
    Ok(())
}
