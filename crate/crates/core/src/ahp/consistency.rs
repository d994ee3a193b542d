use num_traits::One;
use serde::{Deserialize, Serialize};

use super::{
    cached_random_index, AhpError, ComparisonMatrix, Judgment, JudgmentLevel, PositiveMatrix,
    Rational,
};

pub const DEFAULT_CR_LIMIT: f64 = 0.10;
pub const DEFAULT_TRIPLE_THRESHOLD: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyOptions {
    /// Report triples whose judgments are off by at least this factor.
    pub triple_threshold: f64,
    /// Largest acceptable consistency ratio.
    pub cr_limit: f64,
    /// Overrides the cached random index for the matrix order.
    pub random_index: Option<f64>,
}

impl Default for ConsistencyOptions {
    fn default() -> Self {
        Self {
            triple_threshold: DEFAULT_TRIPLE_THRESHOLD,
            cr_limit: DEFAULT_CR_LIMIT,
            random_index: None,
        }
    }
}

impl ConsistencyOptions {
    pub fn with_triple_threshold(mut self, threshold: f64) -> Self {
        self.triple_threshold = threshold;
        self
    }

    pub fn with_random_index(mut self, ri: f64) -> Self {
        self.random_index = Some(ri);
        self
    }

    fn validate(&self) -> Result<(), AhpError> {
        if !(self.triple_threshold >= 1.0 && self.triple_threshold.is_finite()) {
            return Err(AhpError::InvalidThreshold(format!(
                "triple threshold {} must be >= 1",
                self.triple_threshold
            )));
        }
        if !(self.cr_limit > 0.0 && self.cr_limit.is_finite()) {
            return Err(AhpError::InvalidThreshold(format!(
                "CR limit {} must be positive",
                self.cr_limit
            )));
        }
        if let Some(ri) = self.random_index {
            if !(ri >= 0.0 && ri.is_finite()) {
                return Err(AhpError::InvalidThreshold(format!(
                    "random index {ri} must be non-negative"
                )));
            }
        }
        Ok(())
    }
}

/// Attributes `i < j < k` whose judgments disagree: `a_jk` is far from the
/// transitive value `a_ik / a_ij`. Indices are zero-based positions in the
/// matrix's attribute order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffendingTriple {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    /// `max(p, 1/p)` with `p = a_ij * a_jk / a_ik`; 1 means transitive.
    pub deviation_factor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub lambda_max: f64,
    pub ci: f64,
    pub ri: f64,
    pub cr: f64,
    pub consistent: bool,
    pub offending_triples: Vec<OffendingTriple>,
}

/// Consistency analysis of a judgment matrix. Triple deviations are computed
/// exactly on the rational entries.
pub fn consistency(
    matrix: &ComparisonMatrix,
    options: &ConsistencyOptions,
) -> Result<ConsistencyReport, AhpError> {
    options.validate()?;
    let n = matrix.order();
    let mut triples = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let p: Rational = matrix.get(i, j) * matrix.get(j, k) / matrix.get(i, k);
                let worst = if p >= Rational::one() { p } else { p.recip() };
                let factor = *worst.numer() as f64 / *worst.denom() as f64;
                if factor >= options.triple_threshold {
                    triples.push(OffendingTriple {
                        i,
                        j,
                        k,
                        deviation_factor: factor,
                    });
                }
            }
        }
    }
    report(&matrix.to_dense(), options, triples)
}

/// Same analysis for an arbitrary positive matrix, in floating point.
pub fn consistency_dense(
    matrix: &PositiveMatrix,
    options: &ConsistencyOptions,
) -> Result<ConsistencyReport, AhpError> {
    options.validate()?;
    let n = matrix.order();
    let mut triples = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let p = matrix.get(i, j) * matrix.get(j, k) / matrix.get(i, k);
                let factor = p.max(1.0 / p);
                if factor >= options.triple_threshold {
                    triples.push(OffendingTriple {
                        i,
                        j,
                        k,
                        deviation_factor: factor,
                    });
                }
            }
        }
    }
    report(matrix, options, triples)
}

/// Replaces `a_jk` of an offending triple with the legal judgment closest (on
/// a log scale) to the transitive value `a_ik / a_ij`.
pub fn repair_triple(
    matrix: &ComparisonMatrix,
    triple: &OffendingTriple,
) -> Result<ComparisonMatrix, AhpError> {
    let n = matrix.order();
    let OffendingTriple { i, j, k, .. } = *triple;
    if !(i < j && j < k && k < n) {
        return Err(AhpError::IndexOutOfBounds { i, j: k, n });
    }
    let target = matrix.get(i, k) / matrix.get(i, j);
    let target = (*target.numer() as f64 / *target.denom() as f64).ln();
    let nearest = JudgmentLevel::ALL
        .iter()
        .flat_map(|&level| {
            [
                Judgment::favoring_row(level),
                Judgment::favoring_column(level),
            ]
        })
        .min_by(|a, b| {
            let distance = |x: &Judgment| {
                let v = x.value();
                ((*v.numer() as f64 / *v.denom() as f64).ln() - target).abs()
            };
            distance(a).total_cmp(&distance(b))
        })
        .expect("scale is non-empty");
    matrix.set_judgment(j, k, nearest)
}

fn report(
    matrix: &PositiveMatrix,
    options: &ConsistencyOptions,
    mut triples: Vec<OffendingTriple>,
) -> Result<ConsistencyReport, AhpError> {
    let n = matrix.order();
    let pair = matrix.principal_eigen()?;
    let (ci, ri) = if n <= 2 {
        (0.0, 0.0)
    } else {
        let ri = match options.random_index {
            Some(ri) => ri,
            None => cached_random_index(n).ok_or(AhpError::OrderTooLarge(n))?,
        };
        let ci = ((pair.lambda_max - n as f64) / (n as f64 - 1.0)).max(0.0);
        (ci, ri)
    };
    let cr = if ri > 0.0 { ci / ri } else { 0.0 };
    triples.sort_by(|a, b| {
        b.deviation_factor
            .total_cmp(&a.deviation_factor)
            .then((a.i, a.j, a.k).cmp(&(b.i, b.j, b.k)))
    });
    Ok(ConsistencyReport {
        lambda_max: pair.lambda_max,
        ci,
        ri,
        cr,
        consistent: cr <= options.cr_limit,
        offending_triples: triples,
    })
}
