#![allow(dead_code)]

use num_rational::Ratio;
use rand::Rng;
use stakeweigh_core::ahp::{Judgment, Rational};
use stakeweigh_core::{AttributeId, ComparisonMatrix};

/// The 17 legal judgment values, smallest first.
pub fn scale_value(index: usize) -> Rational {
    match index {
        0..=7 => Ratio::new(1, 9 - index as u64),
        8 => Ratio::from_integer(1),
        9..=16 => Ratio::from_integer(index as u64 - 7),
        _ => panic!("scale index {index} out of range"),
    }
}

pub fn attribute_ids(n: usize) -> Vec<AttributeId> {
    (0..n).map(|i| AttributeId::new(format!("a{i}"))).collect()
}

/// Every upper-triangle entry drawn uniformly from the judgment scale.
pub fn random_reciprocal<R: Rng>(rng: &mut R, n: usize) -> ComparisonMatrix {
    let mut m = ComparisonMatrix::new(attribute_ids(n)).unwrap();
    for i in 0..n {
        for j in i + 1..n {
            let value = scale_value(rng.gen_range(0..17));
            m.set_judgment_in_place(i, j, Judgment::from_value(value).unwrap())
                .unwrap();
        }
    }
    m
}

/// Dense principal eigenpair by way of a general eigen-decomposition: the
/// Perron root is the real eigenvalue of largest modulus, and its vector is
/// the null direction of `A - λI` found by SVD.
pub fn dense_oracle(rows: &[f64], n: usize) -> (f64, Vec<f64>) {
    use nalgebra::DMatrix;

    let a = DMatrix::from_row_slice(n, n, rows);
    let lambda = dense_lambda(rows, n);
    let shifted = &a - DMatrix::identity(n, n) * lambda;
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.unwrap();
    let (smallest, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .unwrap();
    let v: Vec<f64> = v_t.row(smallest).iter().copied().collect();
    let sum: f64 = v.iter().sum();
    (lambda, v.iter().map(|x| x / sum).collect())
}

/// Largest real eigenvalue from a dense decomposition.
pub fn dense_lambda(rows: &[f64], n: usize) -> f64 {
    nalgebra::DMatrix::from_row_slice(n, n, rows)
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() < 1e-9)
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}
