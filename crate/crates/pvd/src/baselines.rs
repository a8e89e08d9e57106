//! Baseline comparison methods: self-consistency, universal self-consistency,
//! multi-agent debate, and Reflexion.
//!
//! Each method answers the same question the deliberation protocol does —
//! "what is your answer, and does your own machinery flag it high-confidence?"
//! — so downstream metrics treat all methods uniformly. The confidence signals
//! are the methods' native ones: full sample consensus for SC and USC, all
//! agents converging for debate, and a stable-and-unchanged answer for
//! Reflexion. `hc_flag` is always recomputable from the recorded samples via
//! [`recompute_hc`].
//!
//! Call costs are exact by construction: SC makes `k` calls, USC `k + 1`,
//! debate `agents × (rounds + 1)`, Reflexion 2 per trial (at most
//! `2 × max_trials`). Unparseable replies never abort a run or cost extra
//! calls; they are excluded from votes and counted.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::prompts::question_block;
use crate::agents::{
    parse::final_line_value, parse_direct_answer, parse_prover_reply, Agent, AgentError,
    AgentMessage, CallCtx, UsageRecord,
};
use crate::protocol::types::Question;

pub const DEFAULT_SAMPLES: u32 = 8;
pub const DEFAULT_DEBATE_AGENTS: usize = 3;
pub const DEFAULT_DEBATE_ROUNDS: u32 = 2;
pub const DEFAULT_REFLEXION_TRIALS: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMethod {
    SelfConsistency,
    Usc,
    Debate,
    Reflexion,
}

impl std::fmt::Display for BaselineMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BaselineMethod::SelfConsistency => write!(f, "sc"),
            BaselineMethod::Usc => write!(f, "usc"),
            BaselineMethod::Debate => write!(f, "debate"),
            BaselineMethod::Reflexion => write!(f, "reflexion"),
        }
    }
}

/// What debate agents show each other: bare answer letters, or answers plus
/// the one-sentence rationale (default — bare letters make revision vacuous).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DebateShare {
    Letters,
    #[default]
    Rationales,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrialPhase {
    Primary,
    Recheck,
}

/// Which call a recorded sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SampleSlot {
    /// SC/USC independent sample.
    Sample { index: u32 },
    /// USC aggregator call.
    Aggregator,
    /// Debate turn.
    Debate { agent: u32, round: u32 },
    /// Reflexion trial call (1-based trial index).
    Trial { index: u32, phase: TrialPhase },
}

/// One recorded call: where it sat in the method, the parsed answer if any,
/// and the raw reply text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSample {
    pub slot: SampleSlot,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    pub raw: String,
}

/// Method-specific summary fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "method")]
pub enum MethodDetail {
    SelfConsistency {
        /// Top answer count over requested samples.
        agreement: f64,
        unparseable: u32,
    },
    Usc {
        agreement: f64,
        unparseable: u32,
        /// 1-based candidate index the aggregator picked, when usable.
        selected_index: Option<u32>,
        /// True when the selection was unusable and majority vote stood in.
        fallback_used: bool,
    },
    Debate {
        share: DebateShare,
        /// Turns that failed to parse (the agent kept its previous answer).
        kept_previous: u32,
        /// Latest parsed answer per agent after the last round.
        final_answers: Vec<Option<String>>,
    },
    Reflexion {
        trials_run: u32,
        stable: bool,
        /// Trial 1's primary answer.
        initial_answer: Option<String>,
    },
}

/// Outcome of one baseline run over one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub question_id: String,
    pub method: BaselineMethod,
    pub final_answer: String,
    /// The method's native high-confidence signal; always equals
    /// [`recompute_hc`] over `samples`.
    pub hc_flag: bool,
    pub samples: Vec<BaselineSample>,
    pub calls: u32,
    pub usage: UsageRecord,
    pub detail: MethodDetail,
}

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("{method} requires {what}")]
    InvalidParam { method: BaselineMethod, what: &'static str },
    #[error("{method} produced no parseable answer for question {question_id}")]
    NoParseableAnswer { method: BaselineMethod, question_id: String },
}

pub const DIRECT_ANSWER_SYSTEM: &str = "You are answering a multiple-choice science question. \
Think the options through, then commit to exactly one letter. End your reply with a final line \
in this exact form:\nANSWER: <letter>";

const AGGREGATOR_SYSTEM: &str = "You are judging candidate answers to a multiple-choice \
question. Pick the candidate whose conclusion is most consistent with the candidate set as a \
whole. Reply with exactly one line in this form:\nSELECTION: <candidate number>";

fn direct_request(question: &Question) -> Vec<AgentMessage> {
    vec![
        AgentMessage::system(DIRECT_ANSWER_SYSTEM),
        AgentMessage::user(format!("{}\nAnswer now.", question_block(question))),
    ]
}

/// Parsed answer, kept only when it names one of the question's choices.
fn answer_in(question: &Question, raw: &str) -> Option<String> {
    parse_direct_answer(raw).ok().filter(|a| question.has_label(a))
}

/// Most frequent answer; `None` entries don't vote; ties go to the answer
/// seen earliest.
fn plurality(answers: &[Option<String>]) -> Option<String> {
    let mut counts: Vec<(&String, usize, usize)> = Vec::new();
    for (index, answer) in answers.iter().enumerate() {
        let Some(answer) = answer else { continue };
        match counts.iter_mut().find(|(a, _, _)| *a == answer) {
            Some(entry) => entry.1 += 1,
            None => counts.push((answer, 1, index)),
        }
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.2.cmp(&a.2)))
        .map(|(answer, _, _)| answer.clone())
}

fn sample_answers(samples: &[BaselineSample]) -> Vec<Option<String>> {
    samples
        .iter()
        .filter(|s| matches!(s.slot, SampleSlot::Sample { .. }))
        .map(|s| s.answer.clone())
        .collect()
}

fn full_consensus(answers: &[Option<String>]) -> bool {
    !answers.is_empty() && answers.iter().all(|a| a.is_some() && *a == answers[0])
}

/// Latest parsed answer per debate agent, in agent order (an unparseable turn
/// keeps the agent's previous answer).
fn debate_final_answers(samples: &[BaselineSample]) -> Vec<Option<String>> {
    let mut finals: BTreeMap<u32, Option<String>> = BTreeMap::new();
    for s in samples {
        if let SampleSlot::Debate { agent, .. } = s.slot {
            let entry = finals.entry(agent).or_insert(None);
            if s.answer.is_some() {
                *entry = s.answer.clone();
            }
        }
    }
    finals.into_values().collect()
}

fn reflexion_trials(samples: &[BaselineSample]) -> BTreeMap<u32, (Option<String>, Option<String>)> {
    let mut trials: BTreeMap<u32, (Option<String>, Option<String>)> = BTreeMap::new();
    for s in samples {
        if let SampleSlot::Trial { index, phase } = s.slot {
            let entry = trials.entry(index).or_insert((None, None));
            match phase {
                TrialPhase::Primary => entry.0 = s.answer.clone(),
                TrialPhase::Recheck => entry.1 = s.answer.clone(),
            }
        }
    }
    trials
}

/// Re-derives the high-confidence flag from the recorded samples alone. This
/// is the same rule the runners apply, so for every [`BaselineResult`] it
/// reproduces the stored `hc_flag` — including results re-read from disk.
pub fn recompute_hc(result: &BaselineResult) -> bool {
    match result.method {
        BaselineMethod::SelfConsistency | BaselineMethod::Usc => {
            full_consensus(&sample_answers(&result.samples))
        }
        BaselineMethod::Debate => {
            let finals = debate_final_answers(&result.samples);
            !finals.is_empty() && finals.iter().all(|a| a.is_some() && *a == finals[0])
        }
        BaselineMethod::Reflexion => {
            let trials = reflexion_trials(&result.samples);
            let Some((primary, recheck)) = trials.values().next_back() else { return false };
            let Some(initial) = trials.values().next().map(|(p, _)| p.clone()) else {
                return false;
            };
            primary.is_some() && primary == recheck && *primary == initial
        }
    }
}

fn sealed(mut result: BaselineResult) -> BaselineResult {
    result.hc_flag = recompute_hc(&result);
    result
}

/// `k` independent samples, majority vote; full consensus is the confidence
/// signal. Exactly `k` calls.
pub fn run_self_consistency(
    question: &Question,
    agent: &dyn Agent,
    k: u32,
) -> Result<BaselineResult, BaselineError> {
    if k == 0 {
        return Err(BaselineError::InvalidParam {
            method: BaselineMethod::SelfConsistency,
            what: "k ≥ 1",
        });
    }
    let (samples, usage) = draw_samples(question, agent, k)?;
    let answers = sample_answers(&samples);
    let final_answer = plurality(&answers).ok_or_else(|| BaselineError::NoParseableAnswer {
        method: BaselineMethod::SelfConsistency,
        question_id: question.id.clone(),
    })?;
    let (agreement, unparseable) = consensus_stats(&answers, k);
    Ok(sealed(BaselineResult {
        question_id: question.id.clone(),
        method: BaselineMethod::SelfConsistency,
        final_answer,
        hc_flag: false,
        samples,
        calls: k,
        usage,
        detail: MethodDetail::SelfConsistency { agreement, unparseable },
    }))
}

fn draw_samples(
    question: &Question,
    agent: &dyn Agent,
    k: u32,
) -> Result<(Vec<BaselineSample>, UsageRecord), BaselineError> {
    let request = direct_request(question);
    let mut samples = Vec::with_capacity(k as usize);
    let mut usage = UsageRecord::default();
    for index in 0..k {
        let ctx = CallCtx::new(question, 1, index as u64, 1);
        let completion = agent.complete(&ctx, &request)?;
        usage.absorb(&completion.usage);
        let answer = answer_in(question, &completion.text);
        samples.push(BaselineSample {
            slot: SampleSlot::Sample { index },
            answer,
            raw: completion.text,
        });
    }
    Ok((samples, usage))
}

fn consensus_stats(answers: &[Option<String>], k: u32) -> (f64, u32) {
    let unparseable = answers.iter().filter(|a| a.is_none()).count() as u32;
    let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
    for answer in answers.iter().flatten() {
        *counts.entry(answer.as_str()).or_insert(0) += 1;
    }
    let top = counts.values().copied().max().unwrap_or(0);
    (top as f64 / k as f64, unparseable)
}

fn parse_selection(raw: &str, k: u32) -> Option<u32> {
    let value = final_line_value(raw, "SELECTION:")?;
    let token = value
        .split_whitespace()
        .next()?
        .trim_matches(|c: char| matches!(c, '.' | ',' | ':' | ';' | '(' | ')' | '[' | ']' | '*' | '#'));
    let index: u32 = token.parse().ok()?;
    (1..=k).contains(&index).then_some(index)
}

/// `k` samples plus one aggregator call that selects the most internally
/// consistent candidate by number. Full consensus over the `k` samples is the
/// confidence signal; an unusable selection falls back to majority vote,
/// flagged. Exactly `k + 1` calls.
pub fn run_usc(
    question: &Question,
    agent: &dyn Agent,
    aggregator: &dyn Agent,
    k: u32,
) -> Result<BaselineResult, BaselineError> {
    if k == 0 {
        return Err(BaselineError::InvalidParam { method: BaselineMethod::Usc, what: "k ≥ 1" });
    }
    let (mut samples, mut usage) = draw_samples(question, agent, k)?;
    let answers = sample_answers(&samples);

    let listing: String = samples
        .iter()
        .enumerate()
        .map(|(i, s)| format!("Candidate {}:\n{}\n\n", i + 1, s.raw.trim()))
        .collect();
    let request = vec![
        AgentMessage::system(AGGREGATOR_SYSTEM),
        AgentMessage::user(format!(
            "{}\n{k} candidate responses follow.\n\n{listing}Select the single most internally \
             consistent candidate. Reply with exactly one line:\nSELECTION: <number 1-{k}>",
            question_block(question),
        )),
    ];
    let ctx = CallCtx::new(question, 1, k as u64, 1);
    let completion = aggregator.complete(&ctx, &request)?;
    usage.absorb(&completion.usage);

    let selected_index =
        parse_selection(&completion.text, k).filter(|i| answers[(*i - 1) as usize].is_some());
    samples.push(BaselineSample {
        slot: SampleSlot::Aggregator,
        answer: selected_index.and_then(|i| answers[(i - 1) as usize].clone()),
        raw: completion.text,
    });

    let (final_answer, fallback_used) = match selected_index {
        Some(i) => (answers[(i - 1) as usize].clone().expect("filtered above"), false),
        None => {
            log::warn!(
                "question {}: aggregator selection unusable, falling back to majority vote",
                question.id
            );
            let vote = plurality(&answers).ok_or_else(|| BaselineError::NoParseableAnswer {
                method: BaselineMethod::Usc,
                question_id: question.id.clone(),
            })?;
            (vote, true)
        }
    };
    let (agreement, unparseable) = consensus_stats(&answers, k);
    Ok(sealed(BaselineResult {
        question_id: question.id.clone(),
        method: BaselineMethod::Usc,
        final_answer,
        hc_flag: false,
        samples,
        calls: k + 1,
        usage,
        detail: MethodDetail::Usc { agreement, unparseable, selected_index, fallback_used },
    }))
}

/// Parsed debate position: the answer plus the one-sentence rationale when the
/// reply is a structured proof.
fn parse_position(question: &Question, raw: &str) -> Option<(String, Option<String>)> {
    if let Ok(proof) = parse_prover_reply(raw) {
        if question.has_label(&proof.answer) {
            return Some((proof.answer, Some(proof.statement)));
        }
    }
    answer_in(question, raw).map(|a| (a, None))
}

fn exchange_text(
    others: &[(usize, Option<(String, Option<String>)>)],
    share: DebateShare,
) -> String {
    let mut out = String::from("Other agents' current positions:\n");
    for (display_no, position) in others {
        match position {
            Some((answer, rationale)) => match (share, rationale) {
                (DebateShare::Rationales, Some(rationale)) => {
                    out.push_str(&format!("- Agent {display_no}: answer {answer} — {rationale}\n"))
                }
                _ => out.push_str(&format!("- Agent {display_no}: answer {answer}\n")),
            },
            None => out.push_str(&format!("- Agent {display_no}: no stated answer yet\n")),
        }
    }
    out.push_str(
        "\nWeigh these positions against your own reasoning, then restate your answer in the required format.",
    );
    out
}

/// Round 0: independent answers. Each later round, every agent sees all other
/// agents' previous-round positions and may revise. Confidence signal: all
/// agents' final answers agree. Exactly `agents × (rounds + 1)` calls.
pub fn run_debate(
    question: &Question,
    agents: &[&dyn Agent],
    rounds: u32,
    share: DebateShare,
) -> Result<BaselineResult, BaselineError> {
    if agents.len() < 2 {
        return Err(BaselineError::InvalidParam {
            method: BaselineMethod::Debate,
            what: "at least two agents",
        });
    }
    let mut histories: Vec<Vec<AgentMessage>> =
        agents.iter().map(|_| direct_request(question)).collect();
    let mut positions: Vec<Option<(String, Option<String>)>> = vec![None; agents.len()];
    let mut samples = Vec::new();
    let mut usage = UsageRecord::default();
    let mut calls = 0;
    let mut kept_previous = 0;

    for round in 0..=rounds {
        if round > 0 {
            let snapshot = positions.clone();
            for i in 0..agents.len() {
                let others: Vec<_> = snapshot
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(j, p)| (j + 1, p.clone()))
                    .collect();
                histories[i].push(AgentMessage::user(exchange_text(&others, share)));
            }
        }
        for (i, agent) in agents.iter().enumerate() {
            let ctx = CallCtx::new(question, 1, i as u64, 1);
            let completion = agent.complete(&ctx, &histories[i])?;
            usage.absorb(&completion.usage);
            calls += 1;
            let position = parse_position(question, &completion.text);
            let turn_answer = position.as_ref().map(|(a, _)| a.clone());
            match position {
                Some(p) => positions[i] = Some(p),
                None => kept_previous += 1,
            }
            samples.push(BaselineSample {
                slot: SampleSlot::Debate { agent: i as u32, round },
                answer: turn_answer,
                raw: completion.text.clone(),
            });
            histories[i].push(AgentMessage::assistant(completion.text));
        }
    }

    let finals = debate_final_answers(&samples);
    let final_answer = plurality(&finals).ok_or_else(|| BaselineError::NoParseableAnswer {
        method: BaselineMethod::Debate,
        question_id: question.id.clone(),
    })?;
    Ok(sealed(BaselineResult {
        question_id: question.id.clone(),
        method: BaselineMethod::Debate,
        final_answer,
        hc_flag: false,
        samples,
        calls,
        usage,
        detail: MethodDetail::Debate { share, kept_previous, final_answers: finals },
    }))
}

fn critique_text(primary: &Option<String>, recheck: &Option<String>) -> String {
    let own = match primary {
        Some(a) => format!("Your answer {a}"),
        None => "Your previous reply (which did not state a readable answer)".to_string(),
    };
    let disagreement = match recheck {
        Some(r) => format!("an independent recheck concluded {r} instead"),
        None => "an independent recheck did not confirm it".to_string(),
    };
    format!(
        "{own} did not hold up: {disagreement}. Identify the weakest step in your reasoning, \
         correct it if it is wrong, and answer again in the required format."
    )
}

/// Per trial: one primary answer plus one independent recheck sample at the
/// same settings. A trial is stable when both parse and agree. Instability
/// feeds a fixed-template critique (no extra call) into the next trial's
/// primary dialogue; rechecks never see critiques. Confidence signal: final
/// answer stable and unchanged from trial 1's primary answer. 2 calls per
/// trial.
pub fn run_reflexion(
    question: &Question,
    agent: &dyn Agent,
    max_trials: u32,
) -> Result<BaselineResult, BaselineError> {
    if max_trials == 0 {
        return Err(BaselineError::InvalidParam {
            method: BaselineMethod::Reflexion,
            what: "max_trials ≥ 1",
        });
    }
    let base = direct_request(question);
    let mut primary_history = base.clone();
    let mut samples = Vec::new();
    let mut usage = UsageRecord::default();
    let mut calls = 0;
    let mut counter: u64 = 0;
    let mut initial_answer: Option<String> = None;
    let mut latest_answer: Option<String> = None;
    let mut stable = false;
    let mut trials_run = 0;

    for trial in 1..=max_trials {
        trials_run = trial;
        let ctx = CallCtx::new(question, 1, counter, 1);
        counter += 1;
        let completion = agent.complete(&ctx, &primary_history)?;
        usage.absorb(&completion.usage);
        calls += 1;
        let primary = answer_in(question, &completion.text);
        samples.push(BaselineSample {
            slot: SampleSlot::Trial { index: trial, phase: TrialPhase::Primary },
            answer: primary.clone(),
            raw: completion.text.clone(),
        });
        primary_history.push(AgentMessage::assistant(completion.text));
        if trial == 1 {
            initial_answer = primary.clone();
        }
        if primary.is_some() {
            latest_answer = primary.clone();
        }

        let ctx = CallCtx::new(question, 1, counter, 1);
        counter += 1;
        let rc = agent.complete(&ctx, &base)?;
        usage.absorb(&rc.usage);
        calls += 1;
        let recheck = answer_in(question, &rc.text);
        samples.push(BaselineSample {
            slot: SampleSlot::Trial { index: trial, phase: TrialPhase::Recheck },
            answer: recheck.clone(),
            raw: rc.text,
        });

        if primary.is_some() && primary == recheck {
            stable = true;
            break;
        }
        if trial < max_trials {
            primary_history.push(AgentMessage::user(critique_text(&primary, &recheck)));
        }
    }

    let final_answer = latest_answer.ok_or_else(|| BaselineError::NoParseableAnswer {
        method: BaselineMethod::Reflexion,
        question_id: question.id.clone(),
    })?;
    Ok(sealed(BaselineResult {
        question_id: question.id.clone(),
        method: BaselineMethod::Reflexion,
        final_answer,
        hc_flag: false,
        samples,
        calls,
        usage,
        detail: MethodDetail::Reflexion { trials_run, stable, initial_answer },
    }))
}
