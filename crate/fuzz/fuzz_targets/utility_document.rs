#![no_main]

use libfuzzer_sys::fuzz_target;
use stakeweigh_core::utility::{ExportFormat, UtilityFunction};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(u) = UtilityFunction::from_canonical_json(text) else {
        return;
    };
    let canonical = u.to_canonical_json();
    let again = UtilityFunction::from_canonical_json(&canonical).expect("own output parses");
    assert_eq!(again.to_canonical_json(), canonical);
    let _ = u.export(ExportFormat::HumanReadableExpression);
});
