#![no_main]

use libfuzzer_sys::fuzz_target;
use stakeweigh_core::ahp::{consistency, principal_eigen, ConsistencyOptions};
use stakeweigh_core::ComparisonMatrix;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(m) = ComparisonMatrix::from_json(text) else {
        return;
    };
    let again = ComparisonMatrix::from_json(&m.to_json()).expect("own output parses");
    assert_eq!(again, m);
    if let Ok((lambda, w)) = principal_eigen(&m) {
        assert!(lambda.is_finite());
        assert!((w.values().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    let _ = consistency(&m, &ConsistencyOptions::default());
});
