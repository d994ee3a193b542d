#![no_main]

use libfuzzer_sys::fuzz_target;
use stakeweigh_core::session::{decode_log, encode_record, replay};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let decoded = decode_log(text);
    if let Some(c) = &decoded.corruption {
        assert!(c.offset <= text.len());
        assert!(text.is_char_boundary(c.offset));
    }
    let Ok(session) = replay(&decoded.records) else {
        return;
    };
    // A log that replays must survive a re-encode unchanged.
    let encoded: String = decoded.records.iter().map(encode_record).collect();
    let again = decode_log(&encoded);
    assert!(again.corruption.is_none());
    assert_eq!(
        replay(&again.records).expect("re-encoded log replays"),
        session
    );
});
