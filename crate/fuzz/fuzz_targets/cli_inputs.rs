#![no_main]

use std::collections::BTreeMap;

use libfuzzer_sys::fuzz_target;
use stakeweigh_cli::input::{parse, RankingEntry, VectorEntry};
use stakeweigh_core::consensus::StakeholderWeight;
use stakeweigh_core::utility::{MetricSample, PreferenceFunction};
use stakeweigh_core::{AttributeId, PriorityVector};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = parse::<Vec<RankingEntry>>(text);
    let _ = parse::<Vec<VectorEntry>>(text);
    let _ = parse::<Vec<StakeholderWeight>>(text);
    let _ = parse::<PriorityVector>(text);
    let _ = parse::<BTreeMap<AttributeId, PreferenceFunction>>(text);
    let _ = parse::<MetricSample>(text);
});
