//! The prover–verifier deliberation engine.
//!
//! One *attempt* is a dialogue: the prover states a structured proof, the
//! verifier answers each round with Accept, Reject, or Challenge, and a
//! Challenge goes back to the prover for a revised proof. The dialogue ends on
//! Accept, Reject, or when the round budget (`fatigue_limit`) is spent while
//! still challenging. An attempt where the verifier accepts a proof whose
//! answer never changed is the high-confidence terminal
//! ([`Terminal::AcceptNoChange`]): the answer survived adversarial scrutiny
//! without wavering.
//!
//! A *deliberation* runs up to `max_attempts` attempts, feeding each new
//! attempt a summary of the earlier failures as adversarial context, and stops
//! early on the first [`Terminal::AcceptNoChange`]. If no attempt reaches it,
//! the answer falls back to a majority vote over the attempts' final answers
//! (earliest attempt wins ties).
//!
//! Histories are separated: the verifier sees the question and the canonical
//! JSON rendering of each proof — never the prover's raw reply text or
//! reasoning outside the proof schema.
//!
//! Call accounting: an attempt that ends on verifier turn `t` costs exactly
//! `2t` calls — one opening prover call, `t` verifier calls, and `t − 1`
//! challenge replies (a Challenge on the final turn is not answered). A
//! self-deliberation attempt costs exactly 1 call. Repair retries after
//! malformed replies are tracked separately.

pub mod types;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::prompts::{self, PromptSet};
use crate::agents::{
    parse_prover_reply, parse_self_deliberation, parse_verifier_reply, repair_parse, Agent,
    AgentError, AgentMessage, CallCtx, ParseError, SelfVerdict, UsageRecord,
};

pub use types::{
    normalize_label, Choice, Proof, ProofError, Question, QuestionError, Verdict, VerifierReply,
    SUBCLAIM_RANGE,
};

pub const DEFAULT_FATIGUE_LIMIT: u32 = 12;
pub const DEFAULT_MAX_ATTEMPTS: u32 = 1;

/// Which verifier sits across from the prover.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerifierVariant {
    /// Two agents; the verifier judges reasoning quality neutrally.
    Standard,
    /// Two agents; the verifier is instructed to challenge by default.
    ChallengeFirst,
    /// One agent plays both roles in a single call.
    SelfDeliberation,
}

impl std::fmt::Display for VerifierVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VerifierVariant::Standard => write!(f, "standard"),
            VerifierVariant::ChallengeFirst => write!(f, "challenge-first"),
            VerifierVariant::SelfDeliberation => write!(f, "self"),
        }
    }
}

/// Knobs for one deliberation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub variant: VerifierVariant,
    /// Maximum verifier rounds per attempt.
    pub fatigue_limit: u32,
    /// Maximum attempts per question.
    pub max_attempts: u32,
    /// Wall-clock budget per attempt, checked between calls.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attempt_timeout_s: Option<u64>,
    #[serde(default)]
    pub prompts: PromptSet,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            variant: VerifierVariant::Standard,
            fatigue_limit: DEFAULT_FATIGUE_LIMIT,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            attempt_timeout_s: None,
            prompts: PromptSet::default(),
        }
    }
}

/// How one attempt ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Terminal {
    /// Accepted and the answer never changed — the high-confidence signal.
    AcceptNoChange,
    /// Accepted, but the answer changed under challenge along the way.
    AcceptWithChange,
    Reject,
    /// Still challenging when the round budget ran out.
    FatigueReject,
    /// The dialogue broke down: malformed replies, an answer outside the
    /// choices, or a blown time budget.
    ProtocolError,
}

impl std::fmt::Display for Terminal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Terminal::AcceptNoChange => write!(f, "accept-no-change"),
            Terminal::AcceptWithChange => write!(f, "accept-with-change"),
            Terminal::Reject => write!(f, "reject"),
            Terminal::FatigueReject => write!(f, "fatigue-reject"),
            Terminal::ProtocolError => write!(f, "protocol-error"),
        }
    }
}

/// Full record of one attempt: both dialogue transcripts, every parsed
/// protocol state, and the accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    /// 1-based.
    pub attempt_index: u32,
    pub variant: VerifierVariant,
    pub fatigue_limit: u32,
    /// The prover-side dialogue (for self-deliberation, the single dialogue).
    pub prover_messages: Vec<AgentMessage>,
    /// The verifier-side dialogue (empty for self-deliberation).
    pub verifier_messages: Vec<AgentMessage>,
    /// Parsed proofs in protocol order; revisions append.
    pub proofs: Vec<Proof>,
    /// Parsed verifier replies, one per round.
    pub replies: Vec<VerifierReply>,
    /// Final verdict line of a self-deliberation transcript.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub self_verdict: Option<SelfVerdict>,
    /// Verifier rounds taken (= `replies.len()`).
    pub rounds: u32,
    /// Answer changes across consecutive proofs.
    pub delta: u32,
    pub terminal: Terminal,
    /// The attempt's declared answer: the last proof's answer, or the
    /// `FINAL_ANSWER` line for self-deliberation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_answer: Option<String>,
    /// Protocol-structure calls (`2t` for two-agent attempts, 1 for
    /// self-deliberation). Repair retries are counted in `repairs` and their
    /// usage in `usage`, not here.
    pub calls: u32,
    pub repairs: u32,
    pub usage: UsageRecord,
    /// Tolerated deviations (self-deliberation schema slips, a challenge-first
    /// verifier accepting on round 1).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    /// Failure detail when `terminal` is [`Terminal::ProtocolError`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl AttemptRecord {
    fn new(attempt_index: u32, variant: VerifierVariant, fatigue_limit: u32) -> Self {
        Self {
            attempt_index,
            variant,
            fatigue_limit,
            prover_messages: Vec::new(),
            verifier_messages: Vec::new(),
            proofs: Vec::new(),
            replies: Vec::new(),
            self_verdict: None,
            rounds: 0,
            delta: 0,
            terminal: Terminal::ProtocolError,
            final_answer: None,
            calls: 0,
            repairs: 0,
            usage: UsageRecord::default(),
            warnings: Vec::new(),
            error: None,
        }
    }

    /// Verdict sequence, one per round.
    pub fn verdicts(&self) -> Vec<Verdict> {
        self.replies.iter().map(|r| r.verdict).collect()
    }
}

/// Classifies an attempt from its recorded protocol states. Total and pure:
/// any error ends in [`Terminal::ProtocolError`]; otherwise the last verdict
/// decides — Accept splits on whether the answer ever changed, Reject stands,
/// and a trailing Challenge is fatigue exactly when the round budget was
/// spent. [`run_attempt`] and [`run_self_attempt`] store precisely this
/// classification, so re-deriving it from a persisted record is idempotent.
pub fn classify_outcome(record: &AttemptRecord) -> Terminal {
    if record.error.is_some() {
        return Terminal::ProtocolError;
    }
    if let Some(self_verdict) = record.self_verdict {
        return match self_verdict {
            SelfVerdict::Accept if record.delta == 0 => Terminal::AcceptNoChange,
            SelfVerdict::Accept => Terminal::AcceptWithChange,
            SelfVerdict::Reject => Terminal::Reject,
            SelfVerdict::Fatigue => Terminal::FatigueReject,
        };
    }
    match record.replies.last().map(|r| r.verdict) {
        None => Terminal::ProtocolError,
        Some(Verdict::Accept) if record.delta == 0 => Terminal::AcceptNoChange,
        Some(Verdict::Accept) => Terminal::AcceptWithChange,
        Some(Verdict::Reject) => Terminal::Reject,
        Some(Verdict::Challenge) if record.replies.len() as u32 == record.fatigue_limit => {
            Terminal::FatigueReject
        }
        Some(Verdict::Challenge) => Terminal::ProtocolError,
    }
}

fn seal(mut record: AttemptRecord) -> AttemptRecord {
    record.rounds = record.replies.len() as u32;
    record.delta = record
        .proofs
        .windows(2)
        .filter(|w| w[0].answer != w[1].answer)
        .count() as u32;
    record.terminal = classify_outcome(&record);
    record
}

struct Budget {
    deadline: Option<Instant>,
    limit_s: u64,
}

impl Budget {
    fn new(timeout_s: Option<u64>) -> Self {
        Self {
            deadline: timeout_s.map(|s| Instant::now() + Duration::from_secs(s)),
            limit_s: timeout_s.unwrap_or(0),
        }
    }

    fn exhausted(&self) -> Option<String> {
        match self.deadline {
            Some(deadline) if Instant::now() >= deadline => {
                Some(format!("attempt wall-clock budget of {}s exhausted", self.limit_s))
            }
            _ => None,
        }
    }
}

/// One agent call plus parsing, with a single repair retry on a malformed
/// reply. The raw reply, any repair exchange, and the final reply are all
/// appended to `history`; the repair call is charged to `repairs`/`usage`
/// but not to `calls`.
fn exchange<T>(
    agent: &dyn Agent,
    ctx: &CallCtx<'_>,
    history: &mut Vec<AgentMessage>,
    usage: &mut UsageRecord,
    calls: &mut u32,
    repairs: &mut u32,
    parse: impl Fn(&str) -> Result<T, ParseError>,
) -> Result<Result<T, ParseError>, AgentError> {
    let completion = agent.complete(ctx, history)?;
    usage.absorb(&completion.usage);
    *calls += 1;
    match parse(&completion.text) {
        Ok(value) => {
            history.push(AgentMessage::assistant(completion.text));
            Ok(Ok(value))
        }
        Err(first) => {
            log::warn!("{} reply failed to parse ({first}); repairing once", agent.name());
            *repairs += 1;
            let repaired = repair_parse(&completion.text, agent, ctx, history, &parse)?;
            history.push(AgentMessage::assistant(completion.text));
            history.push(repaired.prompt);
            history.push(AgentMessage::assistant(repaired.completion.text.clone()));
            usage.absorb(&repaired.completion.usage);
            Ok(repaired.value)
        }
    }
}

/// Runs one two-agent attempt. Transport failures abort with `Err`; dialogue
/// breakdowns (unparseable replies, invalid answers, a blown time budget) end
/// the attempt as [`Terminal::ProtocolError`] inside an `Ok` record.
pub fn run_attempt(
    prover: &dyn Agent,
    verifier: &dyn Agent,
    question: &Question,
    config: &RunConfig,
    attempt_index: u32,
    adversarial_context: &str,
) -> Result<AttemptRecord, AgentError> {
    let ctx = CallCtx::new(question, attempt_index, attempt_index as u64, config.fatigue_limit);
    let budget = Budget::new(config.attempt_timeout_s);
    let challenge_first = config.variant == VerifierVariant::ChallengeFirst;
    let mut rec = AttemptRecord::new(attempt_index, config.variant, config.fatigue_limit);

    rec.prover_messages
        .push(AgentMessage::system(prompts::prover_system(&config.prompts, question)));
    rec.prover_messages
        .push(AgentMessage::user(prompts::prover_task(question, adversarial_context)));
    rec.verifier_messages
        .push(AgentMessage::system(prompts::verifier_system(&config.prompts, challenge_first)));

    macro_rules! fail {
        ($detail:expr) => {{
            rec.error = Some($detail);
            return Ok(seal(rec));
        }};
    }
    macro_rules! check_budget {
        () => {
            if let Some(detail) = budget.exhausted() {
                fail!(detail);
            }
        };
    }

    check_budget!();
    let proof = match exchange(
        prover,
        &ctx,
        &mut rec.prover_messages,
        &mut rec.usage,
        &mut rec.calls,
        &mut rec.repairs,
        parse_prover_reply,
    )? {
        Ok(proof) => proof,
        Err(e) => fail!(format!("prover proof unparseable: {e}")),
    };
    if let Err(e) = proof.check_against(question) {
        fail!(format!("prover proof invalid: {e}"));
    }
    rec.final_answer = Some(proof.answer.clone());
    rec.proofs.push(proof);

    for round in 1..=config.fatigue_limit {
        check_budget!();
        let latest = rec.proofs.last().expect("at least the opening proof");
        let request = if round == 1 {
            prompts::verifier_initial(question, latest, round, config.fatigue_limit)
        } else {
            prompts::verifier_followup(latest, round, config.fatigue_limit)
        };
        rec.verifier_messages.push(AgentMessage::user(request));
        let reply = match exchange(
            verifier,
            &ctx,
            &mut rec.verifier_messages,
            &mut rec.usage,
            &mut rec.calls,
            &mut rec.repairs,
            parse_verifier_reply,
        )? {
            Ok(reply) => reply,
            Err(e) => fail!(format!("verifier reply unparseable on round {round}: {e}")),
        };
        let verdict = reply.verdict;
        if challenge_first && round == 1 && verdict == Verdict::Accept {
            rec.warnings.push("challenge-first verifier accepted on round 1".into());
        }
        rec.replies.push(reply);
        match verdict {
            Verdict::Accept | Verdict::Reject => break,
            Verdict::Challenge => {
                if round == config.fatigue_limit {
                    break;
                }
                let relay = prompts::challenge_message(rec.replies.last().expect("just pushed"));
                rec.prover_messages.push(AgentMessage::user(relay));
                check_budget!();
                let revised = match exchange(
                    prover,
                    &ctx,
                    &mut rec.prover_messages,
                    &mut rec.usage,
                    &mut rec.calls,
                    &mut rec.repairs,
                    parse_prover_reply,
                )? {
                    Ok(proof) => proof,
                    Err(e) => fail!(format!("prover reply unparseable after round {round}: {e}")),
                };
                if let Err(e) = revised.check_against(question) {
                    fail!(format!("prover revision invalid after round {round}: {e}"));
                }
                rec.final_answer = Some(revised.answer.clone());
                rec.proofs.push(revised);
            }
        }
    }

    Ok(seal(rec))
}

/// Runs one single-call self-deliberation attempt: the agent plays both roles
/// in one reply, which is parsed into rounds plus a final answer/verdict.
pub fn run_self_attempt(
    agent: &dyn Agent,
    question: &Question,
    config: &RunConfig,
    attempt_index: u32,
    adversarial_context: &str,
) -> Result<AttemptRecord, AgentError> {
    let ctx = CallCtx::new(question, attempt_index, attempt_index as u64, config.fatigue_limit);
    let budget = Budget::new(config.attempt_timeout_s);
    let mut rec = AttemptRecord::new(attempt_index, config.variant, config.fatigue_limit);

    rec.prover_messages.push(AgentMessage::system(prompts::self_deliberation_system(
        &config.prompts,
        config.fatigue_limit,
        question,
    )));
    rec.prover_messages
        .push(AgentMessage::user(prompts::self_deliberation_task(question, adversarial_context)));

    if let Some(detail) = budget.exhausted() {
        rec.error = Some(detail);
        return Ok(seal(rec));
    }
    let transcript = match exchange(
        agent,
        &ctx,
        &mut rec.prover_messages,
        &mut rec.usage,
        &mut rec.calls,
        &mut rec.repairs,
        parse_self_deliberation,
    )? {
        Ok(t) => t,
        Err(e) => {
            rec.error = Some(format!("self-deliberation transcript unparseable: {e}"));
            return Ok(seal(rec));
        }
    };

    rec.warnings = transcript.warnings.clone();
    if let Some((last_proof, _)) = transcript.rounds.last() {
        if last_proof.answer != transcript.final_answer {
            rec.warnings.push(format!(
                "final answer {} disagrees with last prover block {}",
                transcript.final_answer, last_proof.answer
            ));
        }
    }
    for (proof, reply) in transcript.rounds {
        rec.proofs.push(proof);
        rec.replies.push(reply);
    }
    rec.self_verdict = Some(transcript.final_verdict);
    if question.has_label(&transcript.final_answer) {
        rec.final_answer = Some(transcript.final_answer);
    } else {
        rec.error = Some(format!(
            "final answer {:?} is not among the choice labels",
            transcript.final_answer
        ));
    }
    Ok(seal(rec))
}

/// The agents taking part in a deliberation.
#[derive(Clone, Copy)]
pub enum Participants<'a> {
    /// Separate prover and verifier (standard and challenge-first variants).
    Pair { prover: &'a dyn Agent, verifier: &'a dyn Agent },
    /// One agent playing both roles (self-deliberation).
    Solo { agent: &'a dyn Agent },
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("variant {variant} requires {needs}")]
    ParticipantMismatch { variant: VerifierVariant, needs: &'static str },
}

/// How the deliberation's final answer was settled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Resolution {
    /// An attempt ended in [`Terminal::AcceptNoChange`]; its answer stands.
    AcceptNoChange,
    /// No attempt reached high confidence; majority vote over attempt answers.
    MajorityVote,
    /// Every attempt was a protocol error — nothing to answer with.
    NoAnswer,
}

/// Outcome of a full deliberation over one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliberationResult {
    pub question_id: String,
    pub attempts: Vec<AttemptRecord>,
    pub resolution: Resolution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_answer: Option<String>,
    /// Derived: `resolution == AcceptNoChange`.
    pub high_confidence: bool,
    /// Sum of the attempts' protocol-structure calls.
    pub total_calls: u32,
    /// Total usage including repair retries.
    pub usage: UsageRecord,
}

/// Majority vote over the final answers of non-error attempts. Ties go to the
/// answer that appeared in the earliest attempt. `None` when no attempt
/// produced a usable answer.
pub fn majority_vote(attempts: &[AttemptRecord]) -> Option<String> {
    let mut counts: Vec<(String, usize, usize)> = Vec::new();
    for (index, rec) in attempts.iter().enumerate() {
        if rec.terminal == Terminal::ProtocolError {
            continue;
        }
        let Some(answer) = &rec.final_answer else { continue };
        match counts.iter_mut().find(|(a, _, _)| a == answer) {
            Some(entry) => entry.1 += 1,
            None => counts.push((answer.clone(), 1, index)),
        }
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.2.cmp(&a.2)))
        .map(|(answer, _, _)| answer)
}

fn clip(text: &str, max_chars: usize) -> String {
    let mut out: String = text.trim().chars().take(max_chars).collect();
    if text.trim().chars().count() > max_chars {
        out.push('…');
    }
    out
}

/// Renders earlier failed attempts as adversarial context for the next one.
pub fn failure_summary(attempts: &[AttemptRecord]) -> String {
    let mut out = String::from("Earlier attempts at this question did not pass verification:\n");
    for rec in attempts {
        let answer = rec.final_answer.as_deref().unwrap_or("nothing");
        let line = match rec.terminal {
            Terminal::AcceptNoChange => format!("answered {answer}; accepted with high confidence"),
            Terminal::AcceptWithChange => format!(
                "answered {answer}; accepted only after the answer changed under challenge"
            ),
            Terminal::Reject => {
                let why = rec
                    .replies
                    .last()
                    .map(|r| clip(&r.reasoning, 240))
                    .unwrap_or_default();
                format!(
                    "answered {answer}; the verifier rejected the proof after {} round(s): {why}",
                    rec.rounds
                )
            }
            Terminal::FatigueReject => {
                let open = rec
                    .replies
                    .last()
                    .and_then(|r| r.challenge.as_deref())
                    .map(|c| clip(c, 240))
                    .unwrap_or_default();
                format!(
                    "answered {answer}; the proof was still under challenge when the {}-round budget ran out. Open challenge: {open}",
                    rec.fatigue_limit
                )
            }
            Terminal::ProtocolError => format!(
                "produced no verifiable proof ({})",
                clip(rec.error.as_deref().unwrap_or("dialogue broke down"), 240)
            ),
        };
        out.push_str(&format!("- Attempt {}: {line}\n", rec.attempt_index));
    }
    out.push_str(
        "Do not repeat a failed line of argument; if you keep an earlier answer, support it with a stronger proof.",
    );
    out
}

/// Runs a full deliberation: up to `max_attempts` attempts with failure
/// summaries threaded forward, early exit on the first high-confidence accept,
/// majority-vote fallback otherwise.
pub fn run_deliberation(
    participants: Participants<'_>,
    question: &Question,
    config: &RunConfig,
) -> Result<DeliberationResult, RunError> {
    let mut attempts: Vec<AttemptRecord> = Vec::new();
    let mut context = String::new();
    for attempt_index in 1..=config.max_attempts.max(1) {
        let rec = match (config.variant, participants) {
            (VerifierVariant::SelfDeliberation, Participants::Solo { agent }) => {
                run_self_attempt(agent, question, config, attempt_index, &context)?
            }
            (VerifierVariant::SelfDeliberation, Participants::Pair { .. }) => {
                return Err(RunError::ParticipantMismatch {
                    variant: config.variant,
                    needs: "a single agent playing both roles",
                })
            }
            (_, Participants::Pair { prover, verifier }) => {
                run_attempt(prover, verifier, question, config, attempt_index, &context)?
            }
            (_, Participants::Solo { .. }) => {
                return Err(RunError::ParticipantMismatch {
                    variant: config.variant,
                    needs: "separate prover and verifier agents",
                })
            }
        };
        let high_confidence = rec.terminal == Terminal::AcceptNoChange;
        attempts.push(rec);
        if high_confidence {
            break;
        }
        if attempt_index < config.max_attempts {
            context = failure_summary(&attempts);
        }
    }

    let last_is_anc = attempts
        .last()
        .is_some_and(|rec| rec.terminal == Terminal::AcceptNoChange);
    let (resolution, final_answer) = if last_is_anc {
        let answer = attempts.last().and_then(|rec| rec.final_answer.clone());
        (Resolution::AcceptNoChange, answer)
    } else {
        match majority_vote(&attempts) {
            Some(answer) => (Resolution::MajorityVote, Some(answer)),
            None => (Resolution::NoAnswer, None),
        }
    };

    let mut usage = UsageRecord::default();
    let mut total_calls = 0;
    for rec in &attempts {
        usage.absorb(&rec.usage);
        total_calls += rec.calls;
    }

    Ok(DeliberationResult {
        question_id: question.id.clone(),
        attempts,
        resolution,
        high_confidence: resolution == Resolution::AcceptNoChange,
        final_answer,
        total_calls,
        usage,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::ScriptedAgent;

    fn question() -> Question {
        Question {
            id: "q-test".into(),
            text: "Which option is correct?".into(),
            choices: ["A", "B", "C", "D"]
                .iter()
                .map(|l| Choice { label: (*l).into(), text: format!("option {l}") })
                .collect(),
            gold: Some("B".into()),
            domain: None,
        }
    }

    fn proof_json(answer: &str) -> String {
        format!(
            r#"{{"answer":"{answer}","statement":"s","subclaims":["c1","c2","c3"],"reasoning":"r"}}"#
        )
    }

    const ACCEPT: &str = r#"{"verdict":"Accept","reasoning":"sound"}"#;
    const REJECT: &str = r#"{"verdict":"Reject","reasoning":"flawed"}"#;
    const CHALLENGE: &str =
        r#"{"verdict":"Challenge","reasoning":"weak","challenge":"justify c2","challenged_claim":"c2"}"#;

    fn config(fatigue_limit: u32, max_attempts: u32) -> RunConfig {
        RunConfig { fatigue_limit, max_attempts, ..RunConfig::default() }
    }

    #[test]
    fn accept_on_round_one_is_high_confidence_and_two_calls() {
        let prover = ScriptedAgent::new([proof_json("B")]);
        let verifier = ScriptedAgent::new([ACCEPT]);
        let rec = run_attempt(&prover, &verifier, &question(), &config(12, 1), 1, "").unwrap();
        assert_eq!(rec.terminal, Terminal::AcceptNoChange);
        assert_eq!(rec.rounds, 1);
        assert_eq!(rec.delta, 0);
        assert_eq!(rec.calls, 2);
        assert_eq!(rec.repairs, 0);
        assert_eq!(rec.final_answer.as_deref(), Some("B"));
        assert_eq!(classify_outcome(&rec), rec.terminal);
    }

    #[test]
    fn accept_on_round_three_costs_six_calls() {
        let prover = ScriptedAgent::new([proof_json("B"), proof_json("B"), proof_json("B")]);
        let verifier = ScriptedAgent::new([CHALLENGE, CHALLENGE, ACCEPT]);
        let rec = run_attempt(&prover, &verifier, &question(), &config(12, 1), 1, "").unwrap();
        assert_eq!(rec.terminal, Terminal::AcceptNoChange);
        assert_eq!(rec.rounds, 3);
        assert_eq!(rec.calls, 6);
        assert_eq!(rec.verdicts(), vec![Verdict::Challenge, Verdict::Challenge, Verdict::Accept]);
    }

    #[test]
    fn challenge_at_the_limit_is_fatigue_and_the_prover_is_not_asked_again() {
        // Prover script holds exactly the opening proof and one revision: a
        // third request would error the test.
        let prover = ScriptedAgent::new([proof_json("B"), proof_json("B")]);
        let verifier = ScriptedAgent::new([CHALLENGE, CHALLENGE]);
        let rec = run_attempt(&prover, &verifier, &question(), &config(2, 1), 1, "").unwrap();
        assert_eq!(rec.terminal, Terminal::FatigueReject);
        assert_eq!(rec.rounds, 2);
        assert_eq!(rec.calls, 4);
        assert_eq!(prover.remaining(), 0);
        assert_eq!(classify_outcome(&rec), rec.terminal);
    }

    #[test]
    fn answer_change_under_challenge_downgrades_accept() {
        let prover = ScriptedAgent::new([proof_json("A"), proof_json("B")]);
        let verifier = ScriptedAgent::new([CHALLENGE, ACCEPT]);
        let rec = run_attempt(&prover, &verifier, &question(), &config(12, 1), 1, "").unwrap();
        assert_eq!(rec.terminal, Terminal::AcceptWithChange);
        assert_eq!(rec.delta, 1);
        assert_eq!(rec.calls, 4);
        assert_eq!(rec.final_answer.as_deref(), Some("B"));
    }

    #[test]
    fn reject_ends_the_attempt_immediately() {
        let prover = ScriptedAgent::new([proof_json("C")]);
        let verifier = ScriptedAgent::new([REJECT]);
        let rec = run_attempt(&prover, &verifier, &question(), &config(12, 1), 1, "").unwrap();
        assert_eq!(rec.terminal, Terminal::Reject);
        assert_eq!(rec.calls, 2);
        assert_eq!(rec.rounds, 1);
    }

    #[test]
    fn verifier_sees_only_the_canonical_proof_rendering() {
        let noisy = format!("PROVER PREAMBLE NOISE\n{}\ntrailing chatter", proof_json("B"));
        let prover = ScriptedAgent::new([noisy, proof_json("B")]);
        let verifier = ScriptedAgent::new([CHALLENGE, ACCEPT]);
        let rec = run_attempt(&prover, &verifier, &question(), &config(12, 1), 1, "").unwrap();
        assert_eq!(rec.terminal, Terminal::AcceptNoChange);
        let verifier_text: String = rec
            .verifier_messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        assert!(!verifier_text.contains("PREAMBLE NOISE"));
        assert!(!verifier_text.contains("trailing chatter"));
        assert!(verifier_text.contains("\"answer\": \"B\""));
        // And the prover got the challenge text relayed.
        let prover_text: String = rec
            .prover_messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        assert!(prover_text.contains("justify c2"));
    }

    #[test]
    fn unparseable_proof_after_repair_is_a_protocol_error() {
        let prover = ScriptedAgent::new(["not json", "still not json"]);
        let verifier = ScriptedAgent::new([ACCEPT]);
        let rec = run_attempt(&prover, &verifier, &question(), &config(12, 1), 1, "").unwrap();
        assert_eq!(rec.terminal, Terminal::ProtocolError);
        assert_eq!(rec.calls, 1);
        assert_eq!(rec.repairs, 1);
        assert!(rec.error.as_deref().unwrap().contains("unparseable"));
        assert_eq!(rec.final_answer, None);
        assert_eq!(verifier.remaining(), 1, "the verifier was never consulted");
        assert_eq!(classify_outcome(&rec), rec.terminal);
    }

    #[test]
    fn repair_recovers_a_malformed_opening_proof() {
        let prover = ScriptedAgent::new(["garbled".to_string(), proof_json("B")]);
        let verifier = ScriptedAgent::new([ACCEPT]);
        let rec = run_attempt(&prover, &verifier, &question(), &config(12, 1), 1, "").unwrap();
        assert_eq!(rec.terminal, Terminal::AcceptNoChange);
        assert_eq!(rec.calls, 2);
        assert_eq!(rec.repairs, 1);
        let prover_text: String =
            rec.prover_messages.iter().map(|m| m.content.as_str()).collect::<Vec<_>>().join("\n");
        assert!(prover_text.contains("could not be parsed"));
    }

    #[test]
    fn answer_outside_the_choices_is_a_protocol_error() {
        let prover = ScriptedAgent::new([proof_json("E")]);
        let verifier = ScriptedAgent::new([ACCEPT]);
        let rec = run_attempt(&prover, &verifier, &question(), &config(12, 1), 1, "").unwrap();
        assert_eq!(rec.terminal, Terminal::ProtocolError);
        assert!(rec.error.as_deref().unwrap().contains("not among the choice labels"));
        assert!(rec.proofs.is_empty());
    }

    #[test]
    fn zero_second_budget_times_out_before_any_call() {
        let prover = ScriptedAgent::new([proof_json("B")]);
        let verifier = ScriptedAgent::new([ACCEPT]);
        let cfg = RunConfig { attempt_timeout_s: Some(0), ..RunConfig::default() };
        let rec = run_attempt(&prover, &verifier, &question(), &cfg, 1, "").unwrap();
        assert_eq!(rec.terminal, Terminal::ProtocolError);
        assert_eq!(rec.calls, 0);
        assert!(rec.error.as_deref().unwrap().contains("wall-clock budget"));
    }

    #[test]
    fn challenge_first_variant_uses_the_strict_prompt_and_warns_on_round_one_accept() {
        let prover = ScriptedAgent::new([proof_json("B")]);
        let verifier = ScriptedAgent::new([ACCEPT]);
        let cfg = RunConfig { variant: VerifierVariant::ChallengeFirst, ..RunConfig::default() };
        let rec = run_attempt(&prover, &verifier, &question(), &cfg, 1, "").unwrap();
        assert!(rec.verifier_messages[0].content.contains("Default to CHALLENGE"));
        assert!(rec.warnings.iter().any(|w| w.contains("accepted on round 1")));
        assert_eq!(rec.terminal, Terminal::AcceptNoChange);
        // The four-call floor: a challenge-first dialogue that honors its
        // prompt cannot end before round 2.
        let prover = ScriptedAgent::new([proof_json("B"), proof_json("B")]);
        let verifier = ScriptedAgent::new([CHALLENGE, ACCEPT]);
        let rec = run_attempt(&prover, &verifier, &question(), &cfg, 1, "").unwrap();
        assert_eq!(rec.calls, 4);
        assert!(rec.warnings.is_empty());
    }

    #[test]
    fn deliberation_stops_early_on_high_confidence() {
        let prover = ScriptedAgent::new([proof_json("C"), proof_json("B")]);
        let verifier = ScriptedAgent::new([REJECT, ACCEPT]);
        let cfg = config(12, 6);
        let result = run_deliberation(
            Participants::Pair { prover: &prover, verifier: &verifier },
            &question(),
            &cfg,
        )
        .unwrap();
        assert_eq!(result.attempts.len(), 2);
        assert_eq!(result.resolution, Resolution::AcceptNoChange);
        assert!(result.high_confidence);
        assert_eq!(result.final_answer.as_deref(), Some("B"));
        assert_eq!(result.total_calls, 4);
        // The second attempt's prover saw the first failure as context.
        let seen = prover.last_request().unwrap();
        assert!(seen[1].content.contains("did not pass verification"));
        assert!(seen[1].content.contains("Attempt 1"));
        assert!(seen[1].content.contains("answered C"));
    }

    #[test]
    fn majority_vote_falls_back_and_breaks_ties_toward_the_earliest_attempt() {
        let prover = ScriptedAgent::new([proof_json("A"), proof_json("B"), proof_json("A")]);
        let verifier = ScriptedAgent::new([REJECT, REJECT, REJECT]);
        let cfg = config(12, 3);
        let result = run_deliberation(
            Participants::Pair { prover: &prover, verifier: &verifier },
            &question(),
            &cfg,
        )
        .unwrap();
        assert_eq!(result.resolution, Resolution::MajorityVote);
        assert!(!result.high_confidence);
        assert_eq!(result.final_answer.as_deref(), Some("A"));
        assert_eq!(result.total_calls, 6);

        let prover = ScriptedAgent::new([proof_json("D"), proof_json("B")]);
        let verifier = ScriptedAgent::new([REJECT, REJECT]);
        let result = run_deliberation(
            Participants::Pair { prover: &prover, verifier: &verifier },
            &question(),
            &config(12, 2),
        )
        .unwrap();
        assert_eq!(result.final_answer.as_deref(), Some("D"), "1-1 tie goes to attempt 1");
    }

    #[test]
    fn protocol_error_attempts_are_excluded_from_the_vote() {
        let mut a = AttemptRecord::new(1, VerifierVariant::Standard, 12);
        a.final_answer = Some("A".into());
        a.error = Some("broke".into());
        let a = seal(a);
        assert_eq!(a.terminal, Terminal::ProtocolError);

        let mut b = AttemptRecord::new(2, VerifierVariant::Standard, 12);
        b.proofs.push(Proof {
            answer: "B".into(),
            statement: "s".into(),
            subclaims: vec!["c1".into(), "c2".into(), "c3".into()],
            reasoning: "r".into(),
        });
        b.replies.push(VerifierReply {
            verdict: Verdict::Reject,
            reasoning: "no".into(),
            challenge: None,
            challenged_claim: None,
        });
        b.final_answer = Some("B".into());
        let b = seal(b);
        assert_eq!(majority_vote(&[a.clone(), b.clone()]), Some("B".into()));
        assert_eq!(majority_vote(&[a]), None);
    }

    #[test]
    fn all_error_deliberation_resolves_to_no_answer() {
        let prover = ScriptedAgent::new(["junk", "junk", "junk", "junk"]);
        let verifier = ScriptedAgent::new([ACCEPT]);
        let result = run_deliberation(
            Participants::Pair { prover: &prover, verifier: &verifier },
            &question(),
            &config(12, 2),
        )
        .unwrap();
        assert_eq!(result.resolution, Resolution::NoAnswer);
        assert_eq!(result.final_answer, None);
        assert!(!result.high_confidence);
        assert!(result.attempts.iter().all(|a| a.terminal == Terminal::ProtocolError));
    }

    fn self_reply(final_lines: &str) -> String {
        format!(
            "[PROVER]\n{p1}\n[/PROVER]\n[VERIFIER]\n{v1}\n[/VERIFIER]\n\
             [PROVER]\n{p2}\n[/PROVER]\n[VERIFIER]\n{v2}\n[/VERIFIER]\n{final_lines}",
            p1 = proof_json("B"),
            v1 = CHALLENGE,
            p2 = proof_json("B"),
            v2 = ACCEPT,
        )
    }

    #[test]
    fn self_deliberation_costs_one_call_and_classifies_from_the_final_verdict() {
        let agent = ScriptedAgent::new([self_reply("FINAL_ANSWER: B\nFINAL_VERDICT: Accept")]);
        let cfg = RunConfig { variant: VerifierVariant::SelfDeliberation, ..RunConfig::default() };
        let result =
            run_deliberation(Participants::Solo { agent: &agent }, &question(), &cfg).unwrap();
        assert_eq!(result.total_calls, 1);
        assert!(result.high_confidence);
        assert_eq!(result.final_answer.as_deref(), Some("B"));
        let rec = &result.attempts[0];
        assert_eq!(rec.rounds, 2);
        assert_eq!(rec.self_verdict, Some(SelfVerdict::Accept));
        assert!(rec.verifier_messages.is_empty());
        assert_eq!(classify_outcome(rec), rec.terminal);
    }

    #[test]
    fn self_deliberation_fatigue_and_parse_failures() {
        let agent =
            ScriptedAgent::new([self_reply("FINAL_ANSWER: B\nFINAL_VERDICT: Reject(fatigue)")]);
        let cfg = RunConfig { variant: VerifierVariant::SelfDeliberation, ..RunConfig::default() };
        let rec = run_self_attempt(&agent, &question(), &cfg, 1, "").unwrap();
        assert_eq!(rec.terminal, Terminal::FatigueReject);
        assert_eq!(rec.calls, 1);

        let agent = ScriptedAgent::new(["no blocks here", "still no blocks"]);
        let rec = run_self_attempt(&agent, &question(), &cfg, 1, "").unwrap();
        assert_eq!(rec.terminal, Terminal::ProtocolError);
        assert_eq!(rec.repairs, 1);

        let agent = ScriptedAgent::new([self_reply("FINAL_ANSWER: Z\nFINAL_VERDICT: Accept")]);
        let rec = run_self_attempt(&agent, &question(), &cfg, 1, "").unwrap();
        assert_eq!(rec.terminal, Terminal::ProtocolError);
        assert!(rec.error.as_deref().unwrap().contains("not among the choice labels"));
    }

    #[test]
    fn variant_and_participants_must_match() {
        let agent = ScriptedAgent::new([proof_json("B")]);
        let cfg = RunConfig { variant: VerifierVariant::SelfDeliberation, ..RunConfig::default() };
        let err = run_deliberation(
            Participants::Pair { prover: &agent, verifier: &agent },
            &question(),
            &cfg,
        )
        .unwrap_err();
        assert!(matches!(err, RunError::ParticipantMismatch { .. }));

        let err = run_deliberation(
            Participants::Solo { agent: &agent },
            &question(),
            &RunConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, RunError::ParticipantMismatch { .. }));
    }
}
