//! Golden-fixture suite for every reply parser: each corpus input must parse
//! to exactly the value or the error named in its manifest, and canonical
//! renderings must round-trip to the identical value.

mod common;

use common::goldens;

#[test]
fn every_golden_fixture_parses_to_its_specified_outcome() {
    let report = goldens::run_all();
    assert!(report.cases >= 40, "expected a substantial suite, found {}", report.cases);
    report.assert_clean();
}

/// Every golden family must have a manifest, every manifest entry a corpus
/// file, and — so the fuzz seeds stay meaningful — every corpus file of the
/// four reply families a manifest entry.
#[test]
fn manifests_and_corpus_files_are_in_sync() {
    for family in ["prover_reply", "verifier_reply", "self_deliberation", "direct_answer"] {
        let manifest_path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("tests/goldens")
            .join(format!("{family}.json"));
        let manifest: Vec<serde_json::Value> =
            serde_json::from_str(&std::fs::read_to_string(&manifest_path).unwrap()).unwrap();
        let covered: std::collections::BTreeSet<String> = manifest
            .iter()
            .map(|case| case["file"].as_str().unwrap().to_string())
            .collect();
        let corpus_dir = goldens::corpus_root().join(family);
        let mut on_disk = std::collections::BTreeSet::new();
        for entry in std::fs::read_dir(&corpus_dir).unwrap() {
            on_disk.insert(entry.unwrap().file_name().to_string_lossy().into_owned());
        }
        assert_eq!(
            covered, on_disk,
            "{family}: manifest entries and corpus files diverge"
        );
    }
}
