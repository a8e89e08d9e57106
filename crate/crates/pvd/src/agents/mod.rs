//! Agent abstraction: anything that can continue a chat dialogue.
//!
//! The protocol is agnostic to what sits behind [`Agent::complete`] — a remote
//! chat endpoint, a seeded simulator, or a scripted test double. Handles are
//! stateless across dialogues and safe to share between threads; everything a
//! call may depend on travels in the message list and the [`CallCtx`].

pub mod parse;
pub mod prompts;
pub mod remote;
pub mod scripted;
pub mod sim;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::types::Question;

pub use parse::{
    extract_json, parse_direct_answer, parse_prover_reply, parse_self_deliberation,
    parse_verifier_reply, serialize_proof, serialize_verifier_reply, ParseError, SelfTranscript,
    SelfVerdict,
};
pub use remote::{EndpointConfig, RemoteAgent, RetryPolicy, TokenPrices};
pub use scripted::ScriptedAgent;
pub use sim::{SimParamError, SimProver, SimProverParams, SimVerifier, SimVerifierParams};

/// Chat message role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

/// One chat message. Content is never empty for messages produced by this
/// crate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentMessage {
    pub role: Role,
    pub content: String,
}

impl AgentMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }
    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }
    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

/// Token and cost accounting for one call (or an accumulated total).
/// `cost_cents` stays `None` when no price is known (simulated agents,
/// endpoints without a price table) so downstream means can report cost as
/// absent rather than zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UsageRecord {
    pub input_tokens: u64,
    pub output_tokens: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_cents: Option<f64>,
    pub latency_ms: u64,
}

impl UsageRecord {
    /// Accumulate another record into this one. Costs add when either side has
    /// one; the sum is `None` only when both sides are `None`.
    pub fn absorb(&mut self, other: &UsageRecord) {
        self.input_tokens += other.input_tokens;
        self.output_tokens += other.output_tokens;
        self.cost_cents = match (self.cost_cents, other.cost_cents) {
            (None, None) => None,
            (a, b) => Some(a.unwrap_or(0.0) + b.unwrap_or(0.0)),
        };
        self.latency_ms += other.latency_ms;
    }
}

/// One completed call: the raw reply text plus its usage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub usage: UsageRecord,
}

/// Per-call context the protocol threads through to the agent.
///
/// Remote agents ignore it entirely. Simulated agents derive their per-call
/// randomness from `(handle seed, role tag, question id, stream, dialogue
/// length)`, which makes behavior a pure function of the seed and the dialogue
/// so far — independent of scheduling. `stream` disambiguates parallel
/// dialogues about the same question (attempt index for deliberations, sample
/// or agent slots for baselines). `gold` reaches simulators only through
/// `question`; it is never rendered into message text.
#[derive(Debug, Clone, Copy)]
pub struct CallCtx<'a> {
    pub question: &'a Question,
    pub attempt: u32,
    pub stream: u64,
    pub fatigue_limit: u32,
}

impl<'a> CallCtx<'a> {
    pub fn new(question: &'a Question, attempt: u32, stream: u64, fatigue_limit: u32) -> Self {
        Self { question, attempt, stream, fatigue_limit }
    }
}

#[derive(Debug, Error)]
pub enum AgentError {
    /// Transport-level failure after bounded retry (connect errors, timeouts,
    /// retryable status codes that never cleared, malformed endpoint replies).
    #[error("transport failure talking to {endpoint}: {detail}")]
    Transport { endpoint: String, detail: String },
    /// Authentication/authorization problem — never retried.
    #[error("authentication rejected by {endpoint}: {detail}")]
    Auth { endpoint: String, detail: String },
    /// Credential environment variable named in the config is unset.
    #[error("credential environment variable {var} is not set")]
    MissingCredential { var: String },
    /// A scripted agent was asked for more replies than it holds.
    #[error("scripted agent exhausted after {served} replies")]
    ScriptExhausted { served: usize },
}

/// A dialogue continuation: given the messages so far, produce the next reply.
pub trait Agent: Send + Sync {
    fn complete(&self, ctx: &CallCtx<'_>, messages: &[AgentMessage])
        -> Result<Completion, AgentError>;

    /// Short identifier for logs and reports.
    fn name(&self) -> &str {
        "agent"
    }
}

/// Outcome of [`repair_parse`]: either a value that parsed on the retry, or
/// the final parse error. The repair prompt and completion are surfaced so the
/// caller can log them and account for the extra call.
pub struct Repaired<T> {
    pub value: Result<T, ParseError>,
    pub prompt: AgentMessage,
    pub completion: Completion,
}

/// Fixed reprompt used after a malformed reply. One repair attempt only.
pub const REPAIR_PROMPT: &str = "Your previous reply could not be parsed. Respond again with \
only the required JSON object (or the required block format), with no code fences and no \
commentary outside it.";

/// One-shot repair: re-ask the agent after `raw` failed to parse. `request` is
/// the dialogue that produced `raw`; the repair call sees that dialogue plus
/// the failed reply and a fixed corrective instruction. The second failure is
/// final — no further repair is attempted.
pub fn repair_parse<T>(
    raw: &str,
    agent: &dyn Agent,
    ctx: &CallCtx<'_>,
    request: &[AgentMessage],
    parse: impl Fn(&str) -> Result<T, ParseError>,
) -> Result<Repaired<T>, AgentError> {
    let mut messages = request.to_vec();
    messages.push(AgentMessage::assistant(raw));
    let prompt = AgentMessage::user(REPAIR_PROMPT);
    messages.push(prompt.clone());
    let completion = agent.complete(ctx, &messages)?;
    let value = parse(&completion.text);
    Ok(Repaired { value, prompt, completion })
}
