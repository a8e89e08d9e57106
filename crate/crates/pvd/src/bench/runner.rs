//! Run orchestration: a dataset and a config in, an append-only transcript
//! out.
//!
//! Each run has a stable identity — a hash of the full configuration and
//! seed — stamped on every envelope. Re-running the same config against an
//! existing transcript resumes it: questions already recorded are skipped,
//! and an output file belonging to a different run id is refused rather than
//! mixed into.
//!
//! Questions run in parallel. Simulated agents derive their randomness from
//! `(seed, role, question id, …)`, and simulated envelopes carry no
//! timestamps, so a simulated run's transcript is byte-identical however the
//! scheduler interleaves the work.
//!
//! Failure policy: transport and credential problems abort the run (nothing
//! useful can be recorded); per-question breakdowns — protocol errors,
//! baselines with no parseable answer — are recorded and counted, and the
//! run keeps going.

use std::collections::BTreeSet;
use std::io::BufWriter;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::{Agent, UsageRecord};
use crate::agents::{RemoteAgent, SimProver, SimVerifier};
use crate::baselines::{
    run_debate, run_reflexion, run_self_consistency, run_usc, BaselineError, BaselineResult,
};
use crate::metrics::ScoredRecord;
use crate::protocol::types::Question;
use crate::protocol::{
    run_deliberation, DeliberationResult, Participants, RunConfig, RunError, Terminal,
    VerifierVariant,
};
use crate::simlab::handle_seed;

use super::config::{AgentMode, BenchConfig, ConfigError, MethodChoice};
use super::dataset::{load_dataset, IngestError};
use super::transcript::{read_transcripts, OrderedSink, RunPayload, TranscriptEnvelope};
use super::BenchError;

/// Stable run identity: a hash of the canonical config serialization (which
/// includes the seed). Identical configurations always map to the same id.
pub fn run_id_for(config: &BenchConfig) -> String {
    let canonical = serde_json::to_string(config).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(b"run-id");
    hasher.update(canonical.as_bytes());
    hasher.update(config.run.seed.to_le_bytes());
    let digest = hasher.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

enum AgentSet {
    Sim { prover: SimProver, verifier: SimVerifier },
    Remote { prover: RemoteAgent, verifier: Option<RemoteAgent> },
}

impl AgentSet {
    fn prover(&self) -> &dyn Agent {
        match self {
            AgentSet::Sim { prover, .. } => prover,
            AgentSet::Remote { prover, .. } => prover,
        }
    }

    fn verifier(&self) -> &dyn Agent {
        match self {
            AgentSet::Sim { verifier, .. } => verifier,
            AgentSet::Remote { prover, verifier } => {
                verifier.as_ref().map(|v| v as &dyn Agent).unwrap_or(prover)
            }
        }
    }

    fn is_simulated(&self) -> bool {
        matches!(self, AgentSet::Sim { .. })
    }
}

fn build_agents(config: &BenchConfig) -> Result<AgentSet, BenchError> {
    match config.agents.mode {
        AgentMode::Sim => {
            let sim = config
                .agents
                .sim
                .as_ref()
                .ok_or(BenchError::Config(ConfigError::MissingSection { mode: "sim" }))?;
            let seed = config.run.seed;
            let prover = SimProver::new(sim.prover, handle_seed(seed, "prover"))
                .map_err(|e| BenchError::Config(ConfigError::Invalid(e.to_string())))?;
            let verifier = SimVerifier::new(sim.verifier.params(), handle_seed(seed, "verifier"))
                .and_then(|v| v.with_detect_prob(sim.verifier.detect_wrong_prob))
                .map_err(|e| BenchError::Config(ConfigError::Invalid(e.to_string())))?;
            Ok(AgentSet::Sim { prover, verifier })
        }
        AgentMode::Remote => {
            let remote = config
                .agents
                .remote
                .as_ref()
                .ok_or(BenchError::Config(ConfigError::MissingSection { mode: "remote" }))?;
            let prover = RemoteAgent::new(remote.prover.clone())?;
            let verifier =
                remote.verifier.clone().map(RemoteAgent::new).transpose()?;
            Ok(AgentSet::Remote { prover, verifier })
        }
    }
}

/// The envelope method label: baselines by name, deliberation qualified by
/// its verifier variant.
pub fn method_label(config: &BenchConfig) -> String {
    match config.run.method {
        MethodChoice::Deliberation => format!("deliberation/{}", config.run.verifier_variant),
        other => other.to_string(),
    }
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

/// What `execute_run` produced or resumed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub run_id: String,
    pub method: String,
    /// Questions answered in this invocation.
    pub completed: usize,
    /// Questions already present in the transcript and skipped.
    pub resumed: usize,
    /// Per-question breakdowns recorded in this invocation (protocol errors,
    /// unusable baseline runs). The run still finishes; these signal exit 5.
    pub protocol_failures: usize,
    /// Scored records for the whole run — resumed and fresh alike.
    pub records: Vec<ScoredRecord>,
}

struct QuestionOutcome {
    payload: RunPayload,
    usage: UsageRecord,
    scored: ScoredRecord,
    failed: bool,
}

fn deliberate_one(
    config: &BenchConfig,
    agents: &AgentSet,
    question: &Question,
) -> Result<QuestionOutcome, BenchError> {
    let run_config = RunConfig {
        variant: config.run.verifier_variant,
        fatigue_limit: config.run.fatigue_limit,
        max_attempts: config.run.max_attempts,
        attempt_timeout_s: config.run.attempt_timeout_s,
        ..RunConfig::default()
    };
    let participants = match config.run.verifier_variant {
        VerifierVariant::SelfDeliberation => Participants::Solo { agent: agents.prover() },
        _ => Participants::Pair { prover: agents.prover(), verifier: agents.verifier() },
    };
    let result: DeliberationResult =
        run_deliberation(participants, question, &run_config).map_err(|e| match e {
            RunError::Agent(agent) => BenchError::Agent(agent),
            mismatch @ RunError::ParticipantMismatch { .. } => {
                BenchError::Config(ConfigError::Invalid(mismatch.to_string()))
            }
        })?;
    let failed = result.final_answer.is_none()
        || result.attempts.iter().any(|a| a.terminal == Terminal::ProtocolError);
    let scored = ScoredRecord::new(
        question.id.clone(),
        result.final_answer.clone(),
        question.gold.clone().unwrap_or_default(),
        result.high_confidence,
        result.total_calls,
        result.usage.cost_cents,
        result.attempts.last().map(|a| a.rounds),
    );
    let usage = result.usage.clone();
    Ok(QuestionOutcome { payload: RunPayload::Deliberation(result), usage, scored, failed })
}

fn baseline_one(
    config: &BenchConfig,
    agents: &AgentSet,
    question: &Question,
) -> Result<QuestionOutcome, BenchError> {
    let agent = agents.prover();
    let settings = &config.baseline;
    let outcome: Result<BaselineResult, BaselineError> = match config.run.method {
        MethodChoice::Sc => run_self_consistency(question, agent, settings.samples),
        MethodChoice::Usc => run_usc(question, agent, agent, settings.samples),
        MethodChoice::Debate => {
            let agents: Vec<&dyn Agent> =
                (0..settings.debate_agents).map(|_| agent).collect();
            run_debate(question, &agents, settings.debate_rounds, settings.debate_share)
        }
        MethodChoice::Reflexion => run_reflexion(question, agent, settings.reflexion_trials),
        MethodChoice::Deliberation => unreachable!("dispatched to deliberate_one"),
    };
    match outcome {
        Ok(result) => {
            let scored = ScoredRecord::new(
                question.id.clone(),
                Some(result.final_answer.clone()),
                question.gold.clone().unwrap_or_default(),
                result.hc_flag,
                result.calls,
                result.usage.cost_cents,
                None,
            );
            let usage = result.usage.clone();
            Ok(QuestionOutcome { payload: RunPayload::Baseline(result), usage, scored, failed: false })
        }
        Err(BaselineError::Agent(agent)) => Err(BenchError::Agent(agent)),
        Err(error @ (BaselineError::NoParseableAnswer { .. } | BaselineError::InvalidParam { .. })) => {
            log::warn!("question {}: {error}", question.id);
            let scored = ScoredRecord::new(
                question.id.clone(),
                None,
                question.gold.clone().unwrap_or_default(),
                false,
                0,
                None,
                None,
            );
            Ok(QuestionOutcome {
                payload: RunPayload::Failure { method: method_label(config), error: error.to_string() },
                usage: UsageRecord::default(),
                scored,
                failed: true,
            })
        }
    }
}

fn answer_one(
    config: &BenchConfig,
    agents: &AgentSet,
    question: &Question,
) -> Result<QuestionOutcome, BenchError> {
    match config.run.method {
        MethodChoice::Deliberation => deliberate_one(config, agents, question),
        _ => baseline_one(config, agents, question),
    }
}

/// Runs (or resumes) the configured evaluation, appending one envelope per
/// question to the output transcript.
pub fn execute_run(config: &BenchConfig) -> Result<RunOutcome, BenchError> {
    let questions = load_dataset(&config.run.dataset, true)?;
    let run_id = run_id_for(config);
    let method = method_label(config);
    let snapshot = serde_json::to_value(config).expect("config serializes");

    let mut done: BTreeSet<String> = BTreeSet::new();
    let mut records: Vec<ScoredRecord> = Vec::new();
    let mut next_seq = 0u64;
    if config.run.output.exists() {
        let existing = read_transcripts(&config.run.output)?;
        for envelope in existing.envelopes {
            if envelope.run_id != run_id {
                return Err(BenchError::Ingest(IngestError::ForeignRun {
                    path: config.run.output.display().to_string(),
                    line: envelope.seq as usize + 1,
                    found: envelope.run_id,
                    expected: run_id,
                }));
            }
            next_seq = next_seq.max(envelope.seq + 1);
            done.insert(envelope.question_id.clone());
            records.push(envelope.scored);
        }
    } else if let Some(parent) = config.run.output.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }

    let todo: Vec<&Question> = questions.iter().filter(|q| !done.contains(&q.id)).collect();
    let resumed = questions.len() - todo.len();
    let agents = build_agents(config)?;

    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&config.run.output)?;
    let sink = OrderedSink::new(BufWriter::new(file), next_seq);

    let stamped = !agents.is_simulated();
    let fresh: Result<Vec<(ScoredRecord, bool)>, BenchError> = todo
        .par_iter()
        .enumerate()
        .map(|(offset, question)| {
            let started_at_ms = stamped.then(now_ms);
            let outcome = answer_one(config, &agents, question)?;
            let envelope = TranscriptEnvelope {
                run_id: run_id.clone(),
                seq: next_seq + offset as u64,
                question_id: question.id.clone(),
                method: method.clone(),
                config: snapshot.clone(),
                payload: outcome.payload,
                scored: outcome.scored.clone(),
                started_at_ms,
                finished_at_ms: stamped.then(now_ms),
                usage: outcome.usage,
            };
            sink.submit(&envelope)?;
            Ok((outcome.scored, outcome.failed))
        })
        .collect();
    let fresh = fresh?;
    sink.finish()?;

    let protocol_failures = fresh.iter().filter(|(_, failed)| *failed).count();
    let completed = fresh.len();
    records.extend(fresh.into_iter().map(|(scored, _)| scored));
    Ok(RunOutcome { run_id, method, completed, resumed, protocol_failures, records })
}
