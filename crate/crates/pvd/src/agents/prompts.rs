//! Prompt templates and message rendering.
//!
//! The four system prompts ship as built-in templates and can be overridden
//! from config files. Substitution is by named placeholder (`{letters}`,
//! `{answer_options}`, `{fatigue}`); literal braces elsewhere — the JSON
//! format blocks — pass through untouched.

use serde::{Deserialize, Serialize};

use crate::protocol::types::{Proof, Question, VerifierReply};

use super::parse::serialize_proof;

pub const PROVER_SYSTEM: &str = "\
You are a Prover (P) in an Interactive Zero-Knowledge Proof Protocol solving a multiple-choice science question.

Your role:
- Select the single best answer ({letters})
- Break your reasoning into discrete, verifiable sub-claims
- Each sub-claim must be atomic and independently checkable
- When challenged on a specific sub-claim, provide deeper justification for THAT claim only
- Be consistent --- never contradict your previous statements
- If you made an error, correct it explicitly and revise your answer letter

Respond in this exact JSON format:
{
  \"answer\": {answer_options},
  \"statement\": \"one sentence explaining why you chose this answer\",
  \"subclaims\": [\"atomic claim 1\", \"atomic claim 2\", ...],
  \"reasoning\": \"step-by-step explanation supporting your answer and sub-claims\"
}";

const VERIFIER_FORMAT: &str = "\
Respond in this exact JSON format:
{
  \"verdict\": \"Accept\" | \"Reject\" | \"Challenge\",
  \"reasoning\": \"why you made this decision\",
  \"challenge\": \"your specific question (only if verdict is Challenge, else null)\",
  \"challenged_claim\": \"the exact sub-claim being challenged (only if Challenge, else null)\"
}";

pub const VERIFIER_SYSTEM: &str = "\
You are a Verifier (V) in an Interactive Zero-Knowledge Proof Protocol evaluating a multiple-choice science answer.

Your role:
- Evaluate the Prover's reasoning: Accept, Reject, or Challenge
- ACCEPT if the reasoning is logically sound and internally consistent
- REJECT if you find a logical flaw, factual error, or internal contradiction
- CHALLENGE if one specific sub-claim needs deeper justification
- When challenging, target the SINGLE most suspicious or unclear sub-claim
- Do not challenge things that are obviously correct
- Be rigorous but efficient --- unnecessary challenges waste the fatigue budget

You are evaluating reasoning quality, not checking against a known answer.

{verifier_format}";

pub const VERIFIER_CHALLENGE_FIRST_SYSTEM: &str = "\
You are a Verifier (V) in an Interactive Zero-Knowledge Proof Protocol evaluating expert-level questions that are extremely difficult --- harder than PhD qualifying exams.

Your role:
- Evaluate the Prover's reasoning: Accept, Reject, or Challenge
- Default to CHALLENGE: these questions are hard enough that almost every answer has at least one sub-claim worth probing
- ACCEPT only if every sub-claim is specific, verifiable, and you are highly confident the reasoning is airtight --- vague or hand-wavy justifications do not merit acceptance
- REJECT if you find a clear logical flaw, factual error, or internal contradiction
- CHALLENGE whenever any sub-claim is asserted without sufficient justification, relies on memorized facts you cannot verify, skips logical steps, or uses imprecise language that could hide an error
- Target the SINGLE most suspicious, weakest, or least-justified sub-claim
- Never accept reasoning that merely sounds plausible --- demand rigor

{verifier_format}";

pub const SELF_DELIBERATION_SYSTEM: &str = "\
You are simulating an Interactive Zero-Knowledge Proof (ZKP) deliberation on a multiple-choice science question. You will play both roles in sequence within this single response:

[PROVER] --- Selects the best answer and breaks reasoning into atomic, independently verifiable sub-claims.
[VERIFIER] --- Critically evaluates the prover's reasoning without reference to any external answer key. Decides: Accept, Reject, or Challenge.

Protocol rules:
1. Generate one [PROVER] block, then one [VERIFIER] block. That is one round.
2. The verifier MUST Challenge in round 1 --- pick the single weakest or least justified sub-claim and demand rigorous justification. Do not Accept or Reject on the first round.
3. From round 2 onwards: if the verifier Challenges, generate the next [PROVER] block (responding to that specific challenge only), then another [VERIFIER] block.
4. Stop when the verifier issues Accept or Reject, or after {fatigue} rounds (forced Reject --- output FINAL_VERDICT: Reject(fatigue)).
5. The verifier must be genuinely adversarial --- default to Challenge. Accept only when every sub-claim is specific, the logic is airtight, and there is nothing left worth probing. Reject if there is a clear logical flaw or factual error.
6. The prover may revise its answer if a challenge exposes a mistake.

Use this exact format for each block:

[PROVER]
{
  \"answer\": {answer_options},
  \"statement\": \"one sentence explaining your choice\",
  \"subclaims\": [\"atomic claim 1\", \"atomic claim 2\", ...],
  \"reasoning\": \"step-by-step explanation\"
}
[/PROVER]

[VERIFIER]
{
  \"verdict\": \"Accept\" | \"Reject\" | \"Challenge\",
  \"reasoning\": \"why you made this decision\",
  \"challenge\": \"your specific question targeting one sub-claim (null if not Challenge)\",
  \"challenged_claim\": \"the exact sub-claim being challenged (null if not Challenge)\"
}
[/VERIFIER]

After the final [VERIFIER] block, output exactly:
FINAL_ANSWER: <letter>
FINAL_VERDICT: <Accept|Reject|Reject(fatigue)>";

/// The four system-prompt templates a run uses. `Default` gives the built-in
/// texts; config files may swap in alternatives loaded from disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSet {
    pub prover: String,
    pub verifier: String,
    pub verifier_challenge_first: String,
    pub self_deliberation: String,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self {
            prover: PROVER_SYSTEM.into(),
            verifier: VERIFIER_SYSTEM.into(),
            verifier_challenge_first: VERIFIER_CHALLENGE_FIRST_SYSTEM.into(),
            self_deliberation: SELF_DELIBERATION_SYSTEM.into(),
        }
    }
}

/// Replace each `{name}` occurrence from `vars`; unlisted braces pass through.
pub fn render_template(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (name, value) in vars {
        out = out.replace(&format!("{{{name}}}"), value);
    }
    out
}

/// "A, B, C, or D" for the question's labels.
fn letters_phrase(question: &Question) -> String {
    let labels = question.labels();
    match labels.len() {
        0 => String::new(),
        1 => labels[0].clone(),
        2 => format!("{} or {}", labels[0], labels[1]),
        _ => {
            let head = labels[..labels.len() - 1].join(", ");
            format!("{}, or {}", head, labels[labels.len() - 1])
        }
    }
}

/// `"A" | "B" | "C" | "D"` for the question's labels.
fn answer_options(question: &Question) -> String {
    question
        .labels()
        .iter()
        .map(|l| format!("\"{l}\""))
        .collect::<Vec<_>>()
        .join(" | ")
}

pub fn prover_system(set: &PromptSet, question: &Question) -> String {
    render_template(
        &set.prover,
        &[("letters", &letters_phrase(question)), ("answer_options", &answer_options(question))],
    )
}

pub fn verifier_system(set: &PromptSet, challenge_first: bool) -> String {
    let base = if challenge_first { &set.verifier_challenge_first } else { &set.verifier };
    render_template(base, &[("verifier_format", VERIFIER_FORMAT)])
}

pub fn self_deliberation_system(set: &PromptSet, fatigue_limit: u32, question: &Question) -> String {
    render_template(
        &set.self_deliberation,
        &[
            ("fatigue", &fatigue_limit.to_string()),
            ("answer_options", &answer_options(question)),
        ],
    )
}

/// The question and its options, as shown to both sides.
pub fn question_block(question: &Question) -> String {
    let mut out = format!("Question:\n{}\n\nOptions:\n", question.text.trim());
    for choice in &question.choices {
        out.push_str(&format!("({}) {}\n", choice.label.trim(), choice.text.trim()));
    }
    out
}

/// Initial prover task. A non-empty `adversarial_context` (the failure summary
/// from earlier attempts) is prepended as explicit context.
pub fn prover_task(question: &Question, adversarial_context: &str) -> String {
    let mut out = String::new();
    if !adversarial_context.trim().is_empty() {
        out.push_str("Context from prior attempts on this question:\n");
        out.push_str(adversarial_context.trim());
        out.push_str("\n\n");
    }
    out.push_str(&question_block(question));
    out.push_str("\nState your proof in the required JSON format.");
    out
}

/// Initial verifier message: the question plus the prover's structured output
/// — nothing else from the prover's side ever crosses over.
pub fn verifier_initial(question: &Question, proof: &Proof, round: u32, fatigue_limit: u32) -> String {
    format!(
        "{}\nThe Prover submitted this proof:\n{}\n\nRound {round} of {fatigue_limit}. Deliver your verdict in the required JSON format.",
        question_block(question),
        serialize_proof(proof),
    )
}

/// Follow-up verifier message carrying the prover's revised structured output.
pub fn verifier_followup(proof: &Proof, round: u32, fatigue_limit: u32) -> String {
    format!(
        "The Prover replied with this updated proof:\n{}\n\nRound {round} of {fatigue_limit}. Deliver your verdict in the required JSON format.",
        serialize_proof(proof),
    )
}

/// Challenge relayed to the prover.
pub fn challenge_message(reply: &VerifierReply) -> String {
    let mut out = String::from("The Verifier challenged your proof.\n");
    if let Some(claim) = &reply.challenged_claim {
        out.push_str(&format!("Challenged claim: {claim}\n"));
    }
    if let Some(challenge) = &reply.challenge {
        out.push_str(&format!("Challenge: {challenge}\n"));
    }
    out.push_str(
        "\nAddress this challenge directly. Restate your full proof in the required JSON format, revising your answer if the challenge exposed an error.",
    );
    out
}

/// Self-deliberation task message.
pub fn self_deliberation_task(question: &Question, adversarial_context: &str) -> String {
    let mut out = String::new();
    if !adversarial_context.trim().is_empty() {
        out.push_str("Context from prior attempts on this question:\n");
        out.push_str(adversarial_context.trim());
        out.push_str("\n\n");
    }
    out.push_str(&question_block(question));
    out.push_str("\nRun the full deliberation now, in the required block format.");
    out
}
