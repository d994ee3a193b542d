//! Reference computations that share no code with the library under test.

use nalgebra::DMatrix;
use num_rational::Ratio;
use rand::Rng;
use stakeweigh_core::ahp::Judgment;
use stakeweigh_core::{AttributeId, ComparisonMatrix};

/// The judgment scale: 1/9 … 1/2, 1, 2 … 9.
pub fn scale() -> Vec<(u64, u64)> {
    let mut v: Vec<(u64, u64)> = (2..=9).rev().map(|d| (1, d)).collect();
    v.push((1, 1));
    v.extend((2..=9).map(|n| (n, 1)));
    v
}

pub fn attribute_ids(n: usize) -> Vec<AttributeId> {
    (0..n).map(|i| AttributeId::new(format!("qa{i}"))).collect()
}

/// Upper-triangle entries drawn uniformly from the scale. Returns the
/// matrix and its dense row-major form built from the drawn pairs directly.
pub fn random_reciprocal<R: Rng>(rng: &mut R, n: usize) -> (ComparisonMatrix, Vec<f64>) {
    let values = scale();
    let mut dense = vec![1.0; n * n];
    let mut m = ComparisonMatrix::new(attribute_ids(n)).unwrap();
    for i in 0..n {
        for j in i + 1..n {
            let (p, q) = values[rng.gen_range(0..values.len())];
            dense[i * n + j] = p as f64 / q as f64;
            dense[j * n + i] = q as f64 / p as f64;
            let judgment = Judgment::from_value(Ratio::new(p, q)).unwrap();
            m.set_judgment_in_place(i, j, judgment).unwrap();
        }
    }
    (m, dense)
}

/// Principal eigenpair from a full dense decomposition: the Perron root is
/// the largest real eigenvalue, and its eigenvector spans the null space of
/// `A - λI`, taken from the SVD. The vector is scaled to sum 1.
pub fn dense_principal(rows: &[f64], n: usize) -> (f64, Vec<f64>) {
    let a = DMatrix::from_row_slice(n, n, rows);
    let lambda = a
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() < 1e-9)
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let svd = (&a - DMatrix::identity(n, n) * lambda).svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let smallest = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .map(|(i, _)| i)
        .unwrap();
    let v: Vec<f64> = v_t.row(smallest).iter().copied().collect();
    let sum: f64 = v.iter().sum();
    (lambda, v.into_iter().map(|x| x / sum).collect())
}

/// Kendall's S by direct summation over rank sums.
pub fn kendall_s(rankings: &[Vec<u32>]) -> f64 {
    let n = rankings[0].len();
    let sums: Vec<f64> = (0..n)
        .map(|i| rankings.iter().map(|r| r[i] as f64).sum())
        .collect();
    let mean = sums.iter().sum::<f64>() / n as f64;
    sums.iter().map(|r| (r - mean).powi(2)).sum()
}
