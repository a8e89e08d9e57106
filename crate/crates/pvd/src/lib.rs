//! Prover–Verifier Deliberation (PVD).
//!
//! A prover proposes a structured proof for a multiple-choice answer; an
//! independent verifier interrogates it round by round under a fatigue budget.
//! The byproduct of the dialogue — an *Accept with no answer change* (ANC)
//! terminal — is a cheap, calibration-free high-confidence signal that supports
//! selective prediction without logits, sampling ensembles, or a learned
//! confidence head.
//!
//! Crate layout:
//! - [`protocol`] — deliberation state machine, outcome classification, retry
//!   and majority-vote fallback, call accounting.
//! - [`agents`] — the agent abstraction: reply parsers, prompt templates,
//!   seeded simulated agents, a scripted test double, and a remote
//!   chat-completions client.
//! - [`baselines`] — self-consistency, universal self-consistency, multi-agent
//!   debate, and Reflexion, each with its own high-confidence rule.
//! - [`metrics`] — selective-prediction metrics (coverage, precision, gap),
//!   overlap tables, cost summaries.
//! - [`stats`] — Wilson intervals, percentile bootstrap, Fisher's exact test,
//!   exact McNemar.
//! - [`simlab`] — the stylized analytic model of the protocol and seeded
//!   Monte Carlo experiments over it.
//! - [`bench`] — datasets, transcripts, config, report rendering, and the CLI.

pub mod agents;
pub mod baselines;
pub mod bench;
pub mod metrics;
pub mod protocol;
pub mod simlab;
pub mod stats;
