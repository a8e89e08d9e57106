//! Golden-fixture runner for the reply parsers.
//!
//! Inputs live in `fuzz/corpus/<family>/` (they double as fuzz seeds);
//! expectations live in `tests/goldens/<family>.json`. Each manifest entry is
//! `{"file": <corpus file>, "expect": {"ok": <value>} | {"err": <error kind>}}`.
//! For valid prover/verifier fixtures the runner also checks that the
//! canonical rendering re-parses to the same value (round-trip identity).

use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::Value;

use pvd::agents::{
    parse_direct_answer, parse_prover_reply, parse_self_deliberation, parse_verifier_reply,
    serialize_proof, serialize_verifier_reply, ParseError, SelfVerdict,
};

#[derive(Debug, Deserialize)]
struct GoldenCase {
    file: String,
    expect: Expectation,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Expectation {
    Ok(Value),
    Err(String),
}

#[derive(Debug, Default)]
pub struct GoldenReport {
    pub cases: usize,
    pub failures: Vec<String>,
}

impl GoldenReport {
    pub fn assert_clean(&self) {
        assert!(
            self.failures.is_empty(),
            "{} of {} golden cases failed:\n{}",
            self.failures.len(),
            self.cases,
            self.failures.join("\n")
        );
    }
}

fn manifest_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/goldens")
}

pub fn corpus_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus")
}

/// Stable short name for a parse error, used in the manifests.
pub fn error_kind(error: &ParseError) -> String {
    match error {
        ParseError::NoJsonObject { .. } => "no-json-object".into(),
        ParseError::Json { .. } => "json".into(),
        ParseError::MissingField { field, .. } => format!("missing-field:{field}"),
        ParseError::InvalidField { field, .. } => format!("invalid-field:{field}"),
        ParseError::UnknownVerdict { .. } => "unknown-verdict".into(),
        ParseError::ChallengeWithoutText { .. } => "challenge-without-text".into(),
        ParseError::NoRounds { .. } => "no-rounds".into(),
        ParseError::MissingFinalLine { line, .. } => format!("missing-final-line:{line}"),
        ParseError::UnknownFinalVerdict { .. } => "unknown-final-verdict".into(),
    }
}

fn load_manifest(family: &str) -> Vec<GoldenCase> {
    let path = manifest_dir().join(format!("{family}.json"));
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("cannot read golden manifest {}: {e}", path.display()));
    serde_json::from_str(&text)
        .unwrap_or_else(|e| panic!("golden manifest {} is malformed: {e}", path.display()))
}

fn read_input(family: &str, file: &str) -> String {
    let path = corpus_root().join(family).join(file);
    std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("cannot read golden input {}: {e}", path.display()))
}

/// Runs one family: `parse` maps raw input to either a comparable JSON value
/// or an error kind string.
fn run_family<F>(family: &str, report: &mut GoldenReport, parse: F)
where
    F: Fn(&str) -> Result<Value, String>,
{
    for case in load_manifest(family) {
        report.cases += 1;
        let raw = read_input(family, &case.file);
        let label = format!("{family}/{}", case.file);
        match (parse(&raw), &case.expect) {
            (Ok(actual), Expectation::Ok(expected)) => {
                if &actual != expected {
                    report.failures.push(format!(
                        "{label}: parsed value differs\n  expected: {expected}\n  actual:   {actual}"
                    ));
                }
            }
            (Err(kind), Expectation::Err(expected)) => {
                if &kind != expected {
                    report.failures.push(format!(
                        "{label}: error kind differs (expected {expected}, got {kind})"
                    ));
                }
            }
            (Ok(actual), Expectation::Err(expected)) => report.failures.push(format!(
                "{label}: expected error {expected}, but it parsed to {actual}"
            )),
            (Err(kind), Expectation::Ok(_)) => report
                .failures
                .push(format!("{label}: expected a successful parse, got error {kind}")),
        }
    }
}

/// Runs every golden family and returns the aggregate report.
pub fn run_all() -> GoldenReport {
    let mut report = GoldenReport::default();

    run_family("prover_reply", &mut report, |raw| match parse_prover_reply(raw) {
        Ok(proof) => {
            let reparsed = parse_prover_reply(&serialize_proof(&proof))
                .map_err(|e| format!("round-trip failed: {}", error_kind(&e)))?;
            if reparsed != proof {
                return Err("round-trip is not the identity".into());
            }
            Ok(serde_json::to_value(&proof).expect("proof serializes"))
        }
        Err(e) => Err(error_kind(&e)),
    });

    run_family("verifier_reply", &mut report, |raw| match parse_verifier_reply(raw) {
        Ok(reply) => {
            let reparsed = parse_verifier_reply(&serialize_verifier_reply(&reply))
                .map_err(|e| format!("round-trip failed: {}", error_kind(&e)))?;
            if reparsed != reply {
                return Err("round-trip is not the identity".into());
            }
            Ok(serde_json::to_value(&reply).expect("reply serializes"))
        }
        Err(e) => Err(error_kind(&e)),
    });

    run_family("self_deliberation", &mut report, |raw| {
        match parse_self_deliberation(raw) {
            Ok(t) => Ok(serde_json::json!({
                "final_answer": t.final_answer,
                "final_verdict": match t.final_verdict {
                    SelfVerdict::Accept => "accept",
                    SelfVerdict::Reject => "reject",
                    SelfVerdict::Fatigue => "fatigue",
                },
                "rounds": t.rounds.len(),
                "delta": t.delta(),
                "anc": t.is_anc(),
                "warnings": t.warnings.len(),
            })),
            Err(e) => Err(error_kind(&e)),
        }
    });

    run_family("direct_answer", &mut report, |raw| match parse_direct_answer(raw) {
        Ok(answer) => Ok(Value::String(answer)),
        Err(e) => Err(error_kind(&e)),
    });

    report
}
