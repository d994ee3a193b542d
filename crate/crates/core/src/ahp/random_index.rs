use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{power_iteration, AhpError, JUDGMENT_SCALE, MAX_ORDER};

/// Samples per order behind [`CACHED_RI_TABLE`].
pub const CACHED_RI_SAMPLES: usize = 500_000;
/// Seed behind [`CACHED_RI_TABLE`].
pub const CACHED_RI_SEED: u64 = 0x0A4B_5EED;

/// Mean consistency index of random reciprocal matrices, indexed by order.
/// Produced by `random_index(n, CACHED_RI_SAMPLES, CACHED_RI_SEED)`; the
/// `cached_table_is_reproducible` test regenerates it.
pub const CACHED_RI_TABLE: [f64; MAX_ORDER + 1] = [
    0.0,
    0.0,
    0.0,
    0.5231744091612852,
    0.8846828903859942,
    1.1087665826080406,
    1.2480540235215956,
    1.3403051235841972,
    1.4039350545736857,
    1.4500699819145266,
    1.4859042422838418,
    1.5138847325523574,
    1.536460034115717,
    1.5549631121226466,
    1.5706338726989175,
    1.583717197763876,
];

const CHUNK: usize = 8192;

/// Monte-Carlo random index for matrices of order `n`.
///
/// Each upper-triangle entry is drawn uniformly from the 17 judgment-scale
/// values and mirrored reciprocally; the result is the mean CI over
/// `samples` matrices. Sampling runs in fixed-size chunks, each on its own
/// ChaCha stream, and chunk sums are added in order, so the value depends
/// only on `(n, samples, seed)` and not on the thread count.
pub fn random_index(n: usize, samples: usize, seed: u64) -> Result<f64, AhpError> {
    if n == 0 {
        return Err(AhpError::TooFewAttributes(0));
    }
    if samples == 0 {
        return Err(AhpError::NoSamples);
    }
    if n <= 2 {
        return Ok(0.0);
    }
    let chunks = samples.div_ceil(CHUNK);
    let sums = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = CHUNK.min(samples - c * CHUNK);
            chunk_ci_sum(n, count, seed, c as u64)
        })
        .collect::<Result<Vec<f64>, AhpError>>()?;
    Ok(sums.iter().sum::<f64>() / samples as f64)
}

fn chunk_ci_sum(n: usize, count: usize, seed: u64, stream: u64) -> Result<f64, AhpError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut a = vec![1.0; n * n];
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut sum = 0.0;
    for _ in 0..count {
        for i in 0..n {
            for j in i + 1..n {
                let v = JUDGMENT_SCALE[rng.gen_range(0..JUDGMENT_SCALE.len())];
                a[i * n + j] = v;
                a[j * n + i] = 1.0 / v;
            }
        }
        let (lambda, _) = power_iteration(&a, n, &mut x, &mut y)?;
        sum += (lambda - n as f64) / (n as f64 - 1.0);
    }
    Ok(sum)
}

/// Tabulated random index, for `n <= MAX_ORDER`.
pub fn cached_random_index(n: usize) -> Option<f64> {
    CACHED_RI_TABLE.get(n).copied()
}

/// The cached value when neither `samples` nor `seed` is given, otherwise a
/// fresh Monte-Carlo run (defaults: cached sample count and seed).
pub fn random_index_cached_or_sampled(
    n: usize,
    samples: Option<usize>,
    seed: Option<u64>,
) -> Result<f64, AhpError> {
    match (samples, seed) {
        (None, None) if n >= 1 => cached_random_index(n).ok_or(AhpError::OrderTooLarge(n)),
        _ => random_index(
            n,
            samples.unwrap_or(CACHED_RI_SAMPLES),
            seed.unwrap_or(CACHED_RI_SEED),
        ),
    }
}
