//! The CLI input parsers over the fuzz seeds and truncations of them.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use stakeweigh_cli::input::{parse, RankingEntry, VectorEntry};
use stakeweigh_core::consensus::StakeholderWeight;
use stakeweigh_core::utility::{MetricSample, PreferenceFunction};
use stakeweigh_core::{AttributeId, PriorityVector};

fn all_parsers(text: &str) -> usize {
    [
        parse::<Vec<RankingEntry>>(text).is_ok(),
        parse::<Vec<VectorEntry>>(text).is_ok(),
        parse::<Vec<StakeholderWeight>>(text).is_ok(),
        parse::<PriorityVector>(text).is_ok(),
        parse::<BTreeMap<AttributeId, PreferenceFunction>>(text).is_ok(),
        parse::<MetricSample>(text).is_ok(),
    ]
    .into_iter()
    .filter(|&ok| ok)
    .count()
}

#[test]
fn seeds_and_truncations() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus/cli_inputs");
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        assert!(
            all_parsers(&text) >= 1,
            "{} parses as nothing",
            path.display()
        );
        for cut in 0..text.len() {
            let _ = all_parsers(&text[..cut]);
        }
        assert_eq!(all_parsers(&format!("{text} trailing")), 0);
    }
}
