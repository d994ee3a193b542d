use super::{AhpError, ComparisonMatrix};
use crate::PriorityVector;

/// Stop once successive sum-normalized iterates differ by less than this in
/// the max norm.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 10_000;

/// Dense square matrix with strictly positive, finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct PositiveMatrix {
    n: usize,
    data: Vec<f64>,
}

/// Dominant eigenvalue and its eigenvector scaled to sum 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Eigenpair {
    pub lambda_max: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
}

impl PositiveMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, AhpError> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(AhpError::NotSquare);
        }
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if !(v.is_finite() && v > 0.0) {
                    return Err(AhpError::NonPositiveEntry { i, j });
                }
            }
        }
        Ok(Self {
            n,
            data: rows.concat(),
        })
    }

    /// The perfectly consistent matrix `a_ij = w_i / w_j`.
    pub fn from_generator(weights: &[f64]) -> Result<Self, AhpError> {
        let rows: Vec<Vec<f64>> = weights
            .iter()
            .map(|wi| weights.iter().map(|wj| wi / wj).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub(crate) fn from_raw(n: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        Self { n, data }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn principal_eigen(&self) -> Result<Eigenpair, AhpError> {
        let mut vector = Vec::new();
        let mut scratch = Vec::new();
        let (lambda_max, iterations) =
            power_iteration(&self.data, self.n, &mut vector, &mut scratch)?;
        Ok(Eigenpair {
            lambda_max,
            vector,
            iterations,
        })
    }
}

/// Power iteration on a row-major positive `n x n` matrix.
///
/// On success `x` holds the Perron vector scaled to sum 1 and the returned
/// pair is `(lambda_max, iterations)`. `y` is scratch space. Both buffers are
/// resized as needed so callers can reuse them across many matrices.
pub fn power_iteration(
    a: &[f64],
    n: usize,
    x: &mut Vec<f64>,
    y: &mut Vec<f64>,
) -> Result<(f64, usize), AhpError> {
    x.clear();
    x.resize(n, 1.0 / n as f64);
    y.clear();
    y.resize(n, 0.0);
    for iteration in 1..=MAX_ITERATIONS {
        let sum = mat_vec(a, n, x, y);
        let mut delta = 0.0f64;
        for (xi, yi) in x.iter_mut().zip(y.iter()) {
            let next = yi / sum;
            delta = delta.max((next - *xi).abs());
            *xi = next;
        }
        if delta < CONVERGENCE_TOLERANCE {
            // With x summing to 1, sum(Ax) is the eigenvalue estimate.
            let lambda = mat_vec(a, n, x, y);
            return Ok((lambda, iteration));
        }
    }
    Err(AhpError::NoConvergence(MAX_ITERATIONS))
}

fn mat_vec(a: &[f64], n: usize, x: &[f64], y: &mut [f64]) -> f64 {
    let mut total = 0.0;
    for (i, yi) in y.iter_mut().enumerate() {
        let row = &a[i * n..(i + 1) * n];
        *yi = row.iter().zip(x).map(|(aij, xj)| aij * xj).sum();
        total += *yi;
    }
    total
}

/// `lambda_max` and normalized priorities of a judgment matrix.
pub fn principal_eigen(matrix: &ComparisonMatrix) -> Result<(f64, PriorityVector), AhpError> {
    let pair = matrix.to_dense().principal_eigen()?;
    let priorities =
        PriorityVector::from_parts_unchecked(matrix.attributes().to_vec(), pair.vector);
    Ok((pair.lambda_max, priorities))
}
