//! Core domain types shared across the protocol, agents, and evaluation layers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Canonical label form used for every answer comparison: trimmed and
/// uppercased. Applied before any membership or equality check.
pub fn normalize_label(raw: &str) -> String {
    raw.trim().to_uppercase()
}

/// One answer option of a multiple-choice question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Choice {
    pub label: String,
    pub text: String,
}

/// A multiple-choice question. `gold` is evaluation-only: it is never rendered
/// into any prompt, but simulated agents may read it through the call context
/// to realize their truth-conditional behavior.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub text: String,
    pub choices: Vec<Choice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QuestionError {
    #[error("question {id}: needs at least 2 choices, found {found}")]
    TooFewChoices { id: String, found: usize },
    #[error("question {id}: duplicate choice label {label:?}")]
    DuplicateLabel { id: String, label: String },
    #[error("question {id}: gold label {gold:?} is not among the choice labels")]
    GoldNotAChoice { id: String, gold: String },
    #[error("question {id}: empty {field}")]
    EmptyField { id: String, field: &'static str },
}

impl Question {
    /// Normalized labels in choice order.
    pub fn labels(&self) -> Vec<String> {
        self.choices.iter().map(|c| normalize_label(&c.label)).collect()
    }

    /// Normalized gold label, when present.
    pub fn gold_label(&self) -> Option<String> {
        self.gold.as_deref().map(normalize_label)
    }

    pub fn has_label(&self, answer: &str) -> bool {
        let norm = normalize_label(answer);
        self.labels().iter().any(|l| *l == norm)
    }

    /// Whether `answer` matches the gold label (both normalized). `false` when
    /// the question carries no gold label.
    pub fn is_correct(&self, answer: &str) -> bool {
        match self.gold_label() {
            Some(gold) => normalize_label(answer) == gold,
            None => false,
        }
    }

    pub fn validate(&self) -> Result<(), QuestionError> {
        if self.id.trim().is_empty() {
            return Err(QuestionError::EmptyField { id: self.id.clone(), field: "id" });
        }
        if self.text.trim().is_empty() {
            return Err(QuestionError::EmptyField { id: self.id.clone(), field: "text" });
        }
        if self.choices.len() < 2 {
            return Err(QuestionError::TooFewChoices { id: self.id.clone(), found: self.choices.len() });
        }
        let labels = self.labels();
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(QuestionError::DuplicateLabel { id: self.id.clone(), label: l.clone() });
            }
        }
        if let Some(gold) = self.gold_label() {
            if !labels.contains(&gold) {
                return Err(QuestionError::GoldNotAChoice { id: self.id.clone(), gold });
            }
        }
        Ok(())
    }
}

/// The prover's structured output for one turn: an answer, a one-sentence
/// statement, atomic sub-claims, and supporting reasoning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proof {
    pub answer: String,
    pub statement: String,
    pub subclaims: Vec<String>,
    pub reasoning: String,
}

/// Nominal sub-claim count range. Counts outside it are tolerated with a
/// warning; only an empty list is rejected (there would be nothing to
/// challenge).
pub const SUBCLAIM_RANGE: std::ops::RangeInclusive<usize> = 3..=5;

impl Proof {
    /// Checks the proof against a concrete question: the answer must be one of
    /// the question's labels after normalization. A sub-claim count outside
    /// [`SUBCLAIM_RANGE`] is logged as a warning, not an error.
    pub fn check_against(&self, question: &Question) -> Result<(), ProofError> {
        if !question.has_label(&self.answer) {
            return Err(ProofError::AnswerNotAChoice {
                answer: self.answer.clone(),
                labels: question.labels().join(", "),
            });
        }
        if !SUBCLAIM_RANGE.contains(&self.subclaims.len()) {
            log::warn!(
                "question {}: proof has {} sub-claims (expected {}..={})",
                question.id,
                self.subclaims.len(),
                SUBCLAIM_RANGE.start(),
                SUBCLAIM_RANGE.end()
            );
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProofError {
    #[error("asserted answer {answer:?} is not among the choice labels [{labels}]")]
    AnswerNotAChoice { answer: String, labels: String },
}

/// Verifier verdict for one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Accept,
    Reject,
    Challenge,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Accept => write!(f, "Accept"),
            Verdict::Reject => write!(f, "Reject"),
            Verdict::Challenge => write!(f, "Challenge"),
        }
    }
}

/// The verifier's structured output for one round. `challenge` and
/// `challenged_claim` are present exactly when the verdict is
/// [`Verdict::Challenge`] (the challenge text is mandatory; the quoted claim is
/// best-effort).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifierReply {
    pub verdict: Verdict,
    pub reasoning: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub challenge: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub challenged_claim: Option<String>,
}

impl VerifierReply {
    /// Shape invariant: Challenge carries non-empty challenge text;
    /// Accept/Reject carry neither challenge field.
    pub fn shape_ok(&self) -> bool {
        match self.verdict {
            Verdict::Challenge => self.challenge.as_deref().is_some_and(|c| !c.trim().is_empty()),
            Verdict::Accept | Verdict::Reject => {
                self.challenge.is_none() && self.challenged_claim.is_none()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q4() -> Question {
        Question {
            id: "q1".into(),
            text: "Pick one.".into(),
            choices: ["A", "B", "C", "D"]
                .iter()
                .map(|l| Choice { label: (*l).into(), text: format!("option {l}") })
                .collect(),
            gold: Some("B".into()),
            domain: None,
        }
    }

    #[test]
    fn label_normalization_trims_and_uppercases() {
        assert_eq!(normalize_label("  b\n"), "B");
        assert_eq!(normalize_label("ciFRA"), "CIFRA");
        let q = q4();
        assert!(q.is_correct(" b "));
        assert!(!q.is_correct("A"));
        assert!(q.has_label("d"));
        assert!(!q.has_label("E"));
    }

    #[test]
    fn question_validation_catches_structural_defects() {
        let mut q = q4();
        q.choices.truncate(1);
        assert!(matches!(q.validate(), Err(QuestionError::TooFewChoices { .. })));

        let mut q = q4();
        q.choices[2].label = "a".into();
        assert!(matches!(q.validate(), Err(QuestionError::DuplicateLabel { .. })));

        let mut q = q4();
        q.gold = Some("E".into());
        assert!(matches!(q.validate(), Err(QuestionError::GoldNotAChoice { .. })));

        assert_eq!(q4().validate(), Ok(()));
    }

    #[test]
    fn proof_answer_must_be_a_choice() {
        let q = q4();
        let proof = Proof {
            answer: " c ".into(),
            statement: "s".into(),
            subclaims: vec!["c1".into(), "c2".into(), "c3".into()],
            reasoning: "r".into(),
        };
        assert!(proof.check_against(&q).is_ok());
        let bad = Proof { answer: "E".into(), ..proof };
        assert!(matches!(bad.check_against(&q), Err(ProofError::AnswerNotAChoice { .. })));
    }

    #[test]
    fn verifier_reply_shape_rules() {
        let ok = VerifierReply {
            verdict: Verdict::Challenge,
            reasoning: "r".into(),
            challenge: Some("why?".into()),
            challenged_claim: Some("c1".into()),
        };
        assert!(ok.shape_ok());
        let missing = VerifierReply { challenge: None, ..ok.clone() };
        assert!(!missing.shape_ok());
        let accept = VerifierReply {
            verdict: Verdict::Accept,
            reasoning: "fine".into(),
            challenge: None,
            challenged_claim: None,
        };
        assert!(accept.shape_ok());
        let stray = VerifierReply { challenge: Some("x".into()), ..accept.clone() };
        assert!(!stray.shape_ok());
    }
}
