#![no_main]

use libfuzzer_sys::fuzz_target;
use stakeweigh_core::session::{replay_from, SessionSnapshot};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(snapshot) = SessionSnapshot::from_json(text) else {
        return;
    };
    let again = SessionSnapshot::from_json(&snapshot.to_json()).expect("own output parses");
    assert_eq!(again, snapshot);
    let _ = replay_from(&snapshot, &[]);
});
