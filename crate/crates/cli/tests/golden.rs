//! Every subcommand against checked-in expected output. Set
//! `STAKEWEIGH_BLESS=1` to rewrite the expected files.

use std::fs;
use std::path::Path;

use stakeweigh_cli::run;

const CASES: &[(&str, &str)] = &[
    ("priorities_json", "priorities tests/data/robot_matrix.json"),
    ("priorities_table", "--format table priorities tests/data/robot_matrix.json"),
    ("priorities_four", "priorities tests/data/four_attributes.json"),
    (
        "priorities_require_consistent_ok",
        "priorities --require-consistent tests/data/robot_matrix.json",
    ),
    (
        "priorities_require_consistent_fails",
        "priorities --require-consistent tests/data/circular.json",
    ),
    ("priorities_malformed", "priorities tests/data/malformed.json"),
    ("priorities_not_reciprocal", "priorities tests/data/not_reciprocal.json"),
    ("priorities_missing_file", "priorities tests/data/missing.json"),
    ("consistency_json", "consistency tests/data/robot_matrix.json"),
    ("consistency_ri", "consistency tests/data/robot_matrix.json --ri 0.58"),
    ("consistency_table", "--format table consistency tests/data/circular.json"),
    (
        "consistency_triple_threshold",
        "consistency tests/data/four_attributes.json --triple-threshold 1.5",
    ),
    ("consistency_bad_threshold", "consistency tests/data/robot_matrix.json --triple-threshold 0.5"),
    ("ri_json", "ri 3 --samples 100000 --seed 42"),
    ("ri_table", "--format table ri 4 --samples 20000 --seed 7"),
    ("ri_order_two", "ri 2"),
    ("concordance_identical", "concordance tests/data/identical3.json"),
    ("concordance_partial", "concordance tests/data/partial_agreement.json"),
    ("concordance_strict", "concordance tests/data/partial_agreement.json --threshold 0.8"),
    ("concordance_opposed_table", "--format table concordance tests/data/opposed.json"),
    ("conflicts_identical", "conflicts tests/data/identical3.json"),
    ("conflicts_opposed", "conflicts tests/data/opposed.json"),
    ("conflicts_partial_table", "--format table conflicts tests/data/partial_agreement.json"),
    ("aggregate_equal", "aggregate tests/data/vectors.json tests/data/weights_equal.json"),
    ("aggregate_skewed", "aggregate tests/data/vectors.json tests/data/weights_skewed.json"),
    (
        "aggregate_abstain_table",
        "--format table aggregate tests/data/vectors_abstain.json tests/data/weights_equal.json",
    ),
    (
        "utility_build_raw",
        "utility build tests/data/priorities.json tests/data/preferences_identity.json --mode raw-linear",
    ),
    (
        "utility_build_sigmoid_table",
        "--format table utility build tests/data/priorities.json tests/data/preferences_sigmoid.json",
    ),
    (
        "utility_build_raw_rejects_sigmoid",
        "utility build tests/data/priorities.json tests/data/preferences_sigmoid.json --mode raw-linear",
    ),
    ("utility_evaluate_raw", "utility evaluate tests/data/utility_raw.json tests/data/sample.json"),
    (
        "utility_evaluate_sigmoid",
        "utility evaluate tests/data/utility_sigmoid.json tests/data/sample.json",
    ),
    (
        "utility_evaluate_incomplete",
        "utility evaluate tests/data/utility_raw.json tests/data/sample_incomplete.json",
    ),
    ("utility_export_json", "utility export tests/data/utility_sigmoid.json"),
    ("utility_export_expression", "utility export tests/data/utility_raw.json --to expression"),
    ("usage_unknown_subcommand", "frobnicate"),
    ("usage_missing_argument", "ri"),
    ("usage_bad_number", "ri three"),
];

fn render(args: &str) -> String {
    let argv = std::iter::once("stakeweigh").chain(args.split_whitespace());
    let out = run(argv);
    format!(
        "exit: {}\n--- stdout\n{}--- stderr\n{}",
        out.code, out.stdout, out.stderr
    )
}

#[test]
fn golden_outputs() {
    let bless = std::env::var_os("STAKEWEIGH_BLESS").is_some();
    let dir = Path::new("tests/golden");
    let mut mismatches = Vec::new();
    for (name, args) in CASES {
        let got = render(args);
        let path = dir.join(format!("{name}.out"));
        if bless {
            fs::write(&path, &got).unwrap();
            continue;
        }
        let want = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        if got != want {
            mismatches.push(format!("{name}:\n--- want\n{want}--- got\n{got}"));
        }
    }
    assert!(mismatches.is_empty(), "{}", mismatches.join("\n"));
}

#[test]
fn every_golden_file_has_a_case() {
    for entry in fs::read_dir("tests/golden").unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        let stem = name.trim_end_matches(".out");
        assert!(
            CASES.iter().any(|(n, _)| *n == stem),
            "stale golden file {name}"
        );
    }
}

#[test]
fn subcommands_are_pure() {
    for (_, args) in CASES {
        assert_eq!(render(args), render(args), "{args}");
    }
}

#[test]
fn every_subcommand_has_a_case() {
    for sub in [
        "priorities",
        "consistency",
        "ri",
        "concordance",
        "conflicts",
        "aggregate",
    ] {
        assert!(CASES
            .iter()
            .any(|(_, a)| a.split_whitespace().any(|w| w == sub)));
    }
    for sub in ["build", "evaluate", "export"] {
        assert!(CASES
            .iter()
            .any(|(_, a)| a.contains(&format!("utility {sub}"))));
    }
}
