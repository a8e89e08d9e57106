//! Seeded simulated agents.
//!
//! Both simulators are pure functions of `(handle seed, question id, stream,
//! dialogue length)`: the per-call RNG is re-derived from those values, so
//! handles hold no dialogue state, calls are reorderable across threads, and
//! transcripts are bit-reproducible.
//!
//! The verifier realizes the stylized acceptance model: on a true claim each
//! round accepts with probability `1 - challenge_prob - false_reject_prob`,
//! challenges with `challenge_prob`, rejects with the remaining false-reject
//! mass — surviving challenges to the fatigue limit gives the `1 - p^T`
//! completeness channel when false rejects are off. On a false claim each
//! round rejects with probability `1 - slip_prob` and otherwise challenges,
//! except on the final round where the residual slip mass becomes an Accept,
//! which realizes the `q^T` soundness channel exactly. `detect_wrong_prob`
//! gates, per round, whether a wrong answer's claims are seen as false at all;
//! at 0 the verifier cannot distinguish wrong answers from correct ones.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::protocol::types::{Proof, Question, Verdict, VerifierReply};

use super::parse::{parse_prover_reply, serialize_proof, serialize_verifier_reply};
use super::{Agent, AgentError, AgentMessage, CallCtx, Completion, Role, UsageRecord};

#[derive(Debug, Error, PartialEq)]
pub enum SimParamError {
    #[error("{name} = {value} is outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("challenge_prob + false_reject_prob = {sum} exceeds 1")]
    MassExceedsOne { sum: f64 },
}

fn check_unit(name: &'static str, value: f64) -> Result<(), SimParamError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(SimParamError::OutOfRange { name, value })
    }
}

/// Per-call RNG: seed bytes are a SHA-256 digest of the handle seed, a role
/// tag, the question id, the stream discriminator, and the dialogue length.
fn derive_rng(seed: u64, role: &str, question_id: &str, stream: u64, dialogue_len: usize) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(role.as_bytes());
    hasher.update([0u8]);
    hasher.update(question_id.as_bytes());
    hasher.update([0u8]);
    hasher.update(stream.to_le_bytes());
    hasher.update((dialogue_len as u64).to_le_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

/// Simulated prover behavior knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimProverParams {
    /// Probability the initial answer is the gold label.
    pub correct_prior: f64,
    /// Probability a challenge triggers an answer revision.
    pub revise_prob: f64,
    /// Probability a revision lands on the gold label.
    pub revise_toward_correct: f64,
}

impl SimProverParams {
    /// An honest, always-correct prover that never revises.
    pub fn honest() -> Self {
        Self { correct_prior: 1.0, revise_prob: 0.0, revise_toward_correct: 0.0 }
    }

    pub fn validate(&self) -> Result<(), SimParamError> {
        check_unit("correct_prior", self.correct_prior)?;
        check_unit("revise_prob", self.revise_prob)?;
        check_unit("revise_toward_correct", self.revise_toward_correct)
    }
}

/// Seeded prover simulator. Emits canonical proof JSON with truth-neutral
/// templated sub-claims; the claim text never reveals whether the answer is
/// correct.
pub struct SimProver {
    params: SimProverParams,
    seed: u64,
}

impl SimProver {
    pub fn new(params: SimProverParams, seed: u64) -> Result<Self, SimParamError> {
        params.validate()?;
        Ok(Self { params, seed })
    }

    fn pick_initial_answer(&self, rng: &mut ChaCha8Rng, question: &Question) -> String {
        let labels = question.labels();
        match question.gold_label() {
            Some(gold) if rng.random::<f64>() < self.params.correct_prior => gold,
            Some(gold) => {
                let wrong: Vec<&String> = labels.iter().filter(|l| **l != gold).collect();
                if wrong.is_empty() {
                    gold
                } else {
                    wrong[rng.random_range(0..wrong.len())].clone()
                }
            }
            None => labels[rng.random_range(0..labels.len())].clone(),
        }
    }

    fn pick_revision(&self, rng: &mut ChaCha8Rng, question: &Question, current: &str) -> String {
        if rng.random::<f64>() >= self.params.revise_prob {
            return current.to_string();
        }
        let labels = question.labels();
        let gold = question.gold_label();
        if let Some(gold) = &gold {
            if rng.random::<f64>() < self.params.revise_toward_correct {
                return gold.clone();
            }
        }
        let candidates: Vec<&String> = labels
            .iter()
            .filter(|l| l.as_str() != current && Some(l.as_str()) != gold.as_deref())
            .collect();
        if candidates.is_empty() {
            current.to_string()
        } else {
            candidates[rng.random_range(0..candidates.len())].clone()
        }
    }

    /// Last answer this handle asserted in the dialogue, read back from its
    /// own assistant messages.
    fn current_answer(messages: &[AgentMessage]) -> Option<String> {
        messages
            .iter()
            .rev()
            .filter(|m| m.role == Role::Assistant)
            .find_map(|m| parse_prover_reply(&m.content).ok())
            .map(|p| p.answer)
    }

    fn proof_for(rng: &mut ChaCha8Rng, question: &Question, answer: &str, round_hint: usize) -> Proof {
        let n_claims = rng.random_range(3..=5usize);
        let subclaims = (1..=n_claims)
            .map(|i| {
                format!(
                    "Sub-claim {i}: option {answer} is consistent with constraint {i} of question {id}.",
                    id = question.id
                )
            })
            .collect();
        Proof {
            answer: answer.to_string(),
            statement: format!("Option {answer} best satisfies the stated constraints."),
            subclaims,
            reasoning: format!(
                "Pass {round_hint}: eliminated the alternatives against each constraint and option {answer} remained."
            ),
        }
    }
}

impl Agent for SimProver {
    fn complete(
        &self,
        ctx: &CallCtx<'_>,
        messages: &[AgentMessage],
    ) -> Result<Completion, AgentError> {
        let mut rng =
            derive_rng(self.seed, "prover", &ctx.question.id, ctx.stream, messages.len());
        let own_turns = messages.iter().filter(|m| m.role == Role::Assistant).count();
        let answer = match Self::current_answer(messages) {
            None => self.pick_initial_answer(&mut rng, ctx.question),
            Some(current) => self.pick_revision(&mut rng, ctx.question, &current),
        };
        let proof = Self::proof_for(&mut rng, ctx.question, &answer, own_turns + 1);
        Ok(Completion { text: serialize_proof(&proof), usage: UsageRecord::default() })
    }

    fn name(&self) -> &str {
        "sim-prover"
    }
}

/// Simulated verifier behavior knobs (the stylized model's `p`, `q`, and the
/// false-reject mass carved out of acceptance on true claims).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimVerifierParams {
    /// Per-round probability of challenging a true claim (`p`).
    pub challenge_prob: f64,
    /// Per-round probability a false claim slips past rejection (`q`).
    pub slip_prob: f64,
    /// Per-round probability of wrongly rejecting a true claim.
    pub false_reject_prob: f64,
}

impl SimVerifierParams {
    pub fn validate(&self) -> Result<(), SimParamError> {
        check_unit("challenge_prob", self.challenge_prob)?;
        check_unit("slip_prob", self.slip_prob)?;
        check_unit("false_reject_prob", self.false_reject_prob)?;
        let sum = self.challenge_prob + self.false_reject_prob;
        if sum > 1.0 {
            return Err(SimParamError::MassExceedsOne { sum });
        }
        Ok(())
    }
}

/// Seeded verifier simulator. Reads the latest structured proof from its own
/// history, derives the claim's hidden truth by comparing the asserted answer
/// against the question's evaluation-only gold label, and rolls the stylized
/// per-round model. The truth derivation never leaves the handle: rendered
/// replies are truth-neutral.
pub struct SimVerifier {
    params: SimVerifierParams,
    seed: u64,
    detect_wrong_prob: f64,
}

impl SimVerifier {
    pub fn new(params: SimVerifierParams, seed: u64) -> Result<Self, SimParamError> {
        params.validate()?;
        Ok(Self { params, seed, detect_wrong_prob: 1.0 })
    }

    /// Sets the per-round probability of detecting a wrong answer (verifier
    /// competence). Defaults to 1.0: every wrong answer is seen as false.
    pub fn with_detect_prob(mut self, detect_wrong_prob: f64) -> Result<Self, SimParamError> {
        check_unit("detect_wrong_prob", detect_wrong_prob)?;
        self.detect_wrong_prob = detect_wrong_prob;
        Ok(self)
    }

    fn latest_proof(messages: &[AgentMessage]) -> Option<Proof> {
        messages
            .iter()
            .rev()
            .filter(|m| m.role == Role::User)
            .find_map(|m| parse_prover_reply(&m.content).ok())
    }

    fn verdict_for(&self, rng: &mut ChaCha8Rng, claim_true: bool, round: u32, fatigue_limit: u32) -> Verdict {
        let p = self.params.challenge_prob;
        let fr = self.params.false_reject_prob;
        let q = self.params.slip_prob;
        let treat_as_false = !claim_true && rng.random::<f64>() < self.detect_wrong_prob;
        if treat_as_false {
            if rng.random::<f64>() < 1.0 - q {
                Verdict::Reject
            } else if round >= fatigue_limit {
                // Residual slip mass on the final round: the false claim
                // survives the whole budget and is mistakenly accepted.
                Verdict::Accept
            } else {
                Verdict::Challenge
            }
        } else {
            let u: f64 = rng.random();
            if u < 1.0 - p - fr {
                Verdict::Accept
            } else if u < 1.0 - fr {
                Verdict::Challenge
            } else {
                Verdict::Reject
            }
        }
    }
}

impl Agent for SimVerifier {
    fn complete(
        &self,
        ctx: &CallCtx<'_>,
        messages: &[AgentMessage],
    ) -> Result<Completion, AgentError> {
        let mut rng =
            derive_rng(self.seed, "verifier", &ctx.question.id, ctx.stream, messages.len());
        let round = messages.iter().filter(|m| m.role == Role::Assistant).count() as u32 + 1;
        let proof = Self::latest_proof(messages);
        let claim_true = match (&proof, ctx.question.gold_label()) {
            (Some(p), Some(gold)) => p.answer == gold,
            _ => true,
        };
        let verdict = self.verdict_for(&mut rng, claim_true, round, ctx.fatigue_limit);
        let answer = proof.as_ref().map(|p| p.answer.as_str()).unwrap_or("?").to_string();
        let reply = match verdict {
            Verdict::Challenge => {
                let claims = proof.as_ref().map(|p| p.subclaims.as_slice()).unwrap_or(&[]);
                let (claim_ref, claim_text) = if claims.is_empty() {
                    (1, None)
                } else {
                    let idx = rng.random_range(0..claims.len());
                    (idx + 1, Some(claims[idx].clone()))
                };
                VerifierReply {
                    verdict,
                    reasoning: format!(
                        "Round {round}: sub-claim {claim_ref} is asserted without enough support to close the argument."
                    ),
                    challenge: Some(format!(
                        "Justify sub-claim {claim_ref}: state the evidence that makes it hold for option {answer}."
                    )),
                    challenged_claim: claim_text,
                }
            }
            Verdict::Accept => VerifierReply {
                verdict,
                reasoning: format!("Round {round}: the proof for option {answer} held up under scrutiny."),
                challenge: None,
                challenged_claim: None,
            },
            Verdict::Reject => VerifierReply {
                verdict,
                reasoning: format!("Round {round}: the proof for option {answer} contains an unsupported step."),
                challenge: None,
                challenged_claim: None,
            },
        };
        Ok(Completion { text: serialize_verifier_reply(&reply), usage: UsageRecord::default() })
    }

    fn name(&self) -> &str {
        "sim-verifier"
    }
}
