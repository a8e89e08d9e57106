//! Property-based suites for the protocol's structural invariants: canonical
//! renderings round-trip, accounting identities hold on every simulated run,
//! the metric decomposition is exact, interval bounds behave, and the
//! majority-vote machinery matches an in-test oracle.

mod common;

use proptest::prelude::*;

use pvd::agents::{
    parse_prover_reply, parse_verifier_reply, serialize_proof, serialize_verifier_reply,
    ScriptedAgent, SimProver, SimProverParams, SimVerifier, SimVerifierParams,
};
use pvd::baselines::{recompute_hc, run_self_consistency};
use pvd::metrics::{compute_selective_metrics, ScoredRecord};
use pvd::protocol::types::{Proof, Verdict, VerifierReply};
use pvd::protocol::{
    classify_outcome, run_deliberation, Participants, Resolution, RunConfig, Terminal,
    VerifierVariant,
};
use pvd::simlab::synthetic_questions;
use pvd::stats::wilson_interval;

/// Any printable-ish text, including braces, quotes, escapes, and multibyte
/// characters — the things reply parsers must survive.
fn text() -> impl Strategy<Value = String> {
    proptest::string::string_regex("[ -~\\n{}\"\\\\éλ℃]{0,40}").unwrap()
}

/// Text with at least one non-whitespace character, stable under trimming
/// checks used by the parsers' optional-field rules.
fn solid_text() -> impl Strategy<Value = String> {
    text().prop_filter("needs non-whitespace", |s| !s.trim().is_empty())
}

fn label() -> impl Strategy<Value = String> {
    proptest::string::string_regex("[A-Z][0-9]?").unwrap()
}

fn proof_strategy() -> impl Strategy<Value = Proof> {
    (label(), text(), proptest::collection::vec(text(), 1..6), text()).prop_map(
        |(answer, statement, subclaims, reasoning)| Proof {
            answer,
            statement,
            subclaims,
            reasoning,
        },
    )
}

fn verifier_reply_strategy() -> impl Strategy<Value = VerifierReply> {
    prop_oneof![
        text().prop_map(|reasoning| VerifierReply {
            verdict: Verdict::Accept,
            reasoning,
            challenge: None,
            challenged_claim: None,
        }),
        text().prop_map(|reasoning| VerifierReply {
            verdict: Verdict::Reject,
            reasoning,
            challenge: None,
            challenged_claim: None,
        }),
        (text(), solid_text(), proptest::option::of(solid_text())).prop_map(
            |(reasoning, challenge, challenged_claim)| VerifierReply {
                verdict: Verdict::Challenge,
                reasoning,
                challenge: Some(challenge),
                challenged_claim,
            }
        ),
    ]
}

proptest! {
    /// The canonical proof rendering parses back to the identical value, for
    /// arbitrary content including braces and quotes inside strings.
    #[test]
    fn proof_serialization_round_trips(proof in proof_strategy()) {
        let reparsed = parse_prover_reply(&serialize_proof(&proof)).unwrap();
        prop_assert_eq!(reparsed, proof);
    }

    /// Same for verifier replies, across all verdicts and optional fields.
    #[test]
    fn verifier_reply_serialization_round_trips(reply in verifier_reply_strategy()) {
        let reparsed = parse_verifier_reply(&serialize_verifier_reply(&reply)).unwrap();
        prop_assert_eq!(reparsed, reply);
    }

    /// Overall accuracy decomposes exactly over the confidence split:
    /// overall = cov·prec + (1−cov)·non-HC accuracy.
    #[test]
    fn accuracy_decomposes_over_the_confidence_split(
        flags in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..300)
    ) {
        let records: Vec<ScoredRecord> = flags
            .iter()
            .enumerate()
            .map(|(i, &(hc, correct))| ScoredRecord::new(
                format!("q{i}"),
                Some(if correct { "A" } else { "B" }.to_string()),
                "A".to_string(),
                hc,
                2,
                None,
                None,
            ))
            .collect();
        let report = compute_selective_metrics(&records).unwrap();
        let cov = report.hc_cov;
        let reconstructed = cov * report.hc_prec.unwrap_or(0.0)
            + (1.0 - cov) * report.non_hc_acc.unwrap_or(0.0);
        prop_assert!((report.overall_acc - reconstructed).abs() < 1e-12,
            "overall {} != decomposition {}", report.overall_acc, reconstructed);
        // The gap exists exactly when both sides of the split do.
        prop_assert_eq!(
            report.gap.is_some(),
            report.hc_prec.is_some() && report.non_hc_acc.is_some()
        );
    }

    /// Wilson intervals are ordered, bounded, hit the exact boundary cases,
    /// and shrink when the same proportion is observed over more trials.
    #[test]
    fn wilson_intervals_are_sane_and_tighten_with_n(
        successes in 0u64..500,
        extra in 1u64..500,
        scale in 2u64..6,
    ) {
        let trials = successes + extra;
        let ci = wilson_interval(successes, trials, 0.95).unwrap();
        prop_assert!(0.0 <= ci.lower && ci.lower <= ci.point);
        prop_assert!(ci.point <= ci.upper && ci.upper <= 1.0);
        if successes == 0 {
            prop_assert_eq!(ci.lower, 0.0);
        }
        let wider = ci.upper - ci.lower;
        let tighter_ci = wilson_interval(successes * scale, trials * scale, 0.95).unwrap();
        let tighter = tighter_ci.upper - tighter_ci.lower;
        prop_assert!(tighter < wider,
            "width should shrink: {} at n={} vs {} at n={}", tighter, trials * scale, wider, trials);
        prop_assert!((ci.point - tighter_ci.point).abs() < 1e-12, "same proportion, same point");
    }

    /// Full protocol runs over seeded simulated agents uphold the accounting
    /// identities on every attempt: stored terminals re-classify to
    /// themselves, two-agent attempts cost exactly two calls per round, the
    /// totals add up, answer-change counts match the proof sequence, and the
    /// verifier saw every proof only in its canonical rendering.
    #[test]
    fn simulated_runs_uphold_accounting_invariants(
        seed in any::<u64>(),
        correct_prior in 0.0f64..=1.0,
        revise_prob in 0.0f64..=1.0,
        challenge_prob in 0.0f64..=0.9,
        slip_prob in 0.0f64..=1.0,
        fr_scale in 0.0f64..=1.0,
        detect in 0.0f64..=1.0,
        fatigue_limit in 1u32..=6,
        max_attempts in 1u32..=3,
    ) {
        let false_reject_prob = (1.0 - challenge_prob) * fr_scale * 0.5;
        let prover = SimProver::new(
            SimProverParams { correct_prior, revise_prob, revise_toward_correct: 0.5 },
            seed,
        ).unwrap();
        let verifier = SimVerifier::new(
            SimVerifierParams { challenge_prob, slip_prob, false_reject_prob },
            seed ^ 0x9e37_79b9_7f4a_7c15,
        ).unwrap().with_detect_prob(detect).unwrap();
        let config = RunConfig {
            variant: VerifierVariant::Standard,
            fatigue_limit,
            max_attempts,
            ..RunConfig::default()
        };
        let question = synthetic_questions(1, seed).pop().unwrap();
        let result = run_deliberation(
            Participants::Pair { prover: &prover, verifier: &verifier },
            &question,
            &config,
        ).unwrap();

        let mut total_calls = 0;
        for attempt in &result.attempts {
            prop_assert_eq!(classify_outcome(attempt), attempt.terminal, "stored terminal must re-classify to itself");
            prop_assert_eq!(attempt.calls, 2 * attempt.rounds, "two calls per round, exactly");
            prop_assert_eq!(attempt.rounds as usize, attempt.replies.len());
            let recounted = attempt
                .proofs
                .windows(2)
                .filter(|w| w[0].answer != w[1].answer)
                .count() as u32;
            prop_assert_eq!(attempt.delta, recounted, "answer-change count matches the proof sequence");
            if attempt.terminal != Terminal::ProtocolError {
                for proof in &attempt.proofs {
                    let canonical = serialize_proof(proof);
                    prop_assert!(
                        attempt.verifier_messages.iter().any(|m| m.content.contains(&canonical)),
                        "the verifier must see every proof in canonical form"
                    );
                }
            }
            total_calls += attempt.calls;
        }
        prop_assert_eq!(result.total_calls, total_calls, "run total is the sum of attempt calls");
        prop_assert!(result.attempts.len() as u32 <= max_attempts);

        // High confidence is exactly the ANC resolution, and it short-circuits
        // further attempts.
        match result.resolution {
            Resolution::AcceptNoChange => {
                prop_assert!(result.high_confidence);
                prop_assert_eq!(
                    result.attempts.last().unwrap().terminal,
                    Terminal::AcceptNoChange
                );
            }
            Resolution::MajorityVote | Resolution::NoAnswer => {
                prop_assert!(!result.high_confidence);
            }
        }
        if let Some(answer) = &result.final_answer {
            prop_assert!(question.has_label(answer), "final answers come from the choice set");
        }
    }

    /// Self-consistency matches an in-test plurality oracle: the winner is the
    /// most frequent parsed answer with ties broken toward the earliest first
    /// occurrence, consensus is flagged only on unanimity, and the method
    /// costs exactly k calls.
    #[test]
    fn self_consistency_matches_a_plurality_oracle(
        answers in proptest::collection::vec(0usize..4, 1..12)
    ) {
        let labels = ["A", "B", "C", "D"];
        let replies: Vec<String> =
            answers.iter().map(|&i| format!("ANSWER: {}", labels[i])).collect();
        let k = replies.len() as u32;
        let agent = ScriptedAgent::new(replies);
        let question = synthetic_questions(1, 7).pop().unwrap();
        let result = run_self_consistency(&question, &agent, k).unwrap();

        // Independent plurality count with earliest-first-occurrence ties.
        let mut counts: Vec<(usize, usize, usize)> = Vec::new(); // (label, count, first_seen)
        for (pos, &i) in answers.iter().enumerate() {
            match counts.iter_mut().find(|(l, _, _)| *l == i) {
                Some(entry) => entry.1 += 1,
                None => counts.push((i, 1, pos)),
            }
        }
        let best = counts
            .iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.2.cmp(&a.2)))
            .unwrap();
        prop_assert_eq!(&result.final_answer, labels[best.0]);
        prop_assert_eq!(result.calls, k);
        let unanimous = answers.iter().all(|&i| i == answers[0]);
        prop_assert_eq!(result.hc_flag, unanimous, "consensus only on unanimity");
        prop_assert_eq!(recompute_hc(&result), result.hc_flag);
    }
}
