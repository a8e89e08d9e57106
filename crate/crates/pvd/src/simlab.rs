//! Monte-Carlo laboratory: runs the full deliberation protocol over synthetic
//! questions with seeded simulated agents and compares the measured accept
//! rates against the stylized model's closed forms.
//!
//! In the stylized model a verifier challenges a true claim with per-round
//! probability `p` and lets a false claim slip past rejection with per-round
//! probability `q`. Over a fatigue budget of `T` rounds that yields
//!
//! * P(accept a true claim)  = 1 − pᵀ   (no false rejects), and
//! * P(accept a false claim) = qᵀ        (the slip mass must survive every
//!   round; the run ends in acceptance only if it survives all `T`).
//!
//! The laboratory runs the *actual* protocol engine — provers emit structured
//! proofs, verifiers parse them and roll their per-round model — so these
//! bounds are validated end to end, not replayed from the formulas they are
//! checked against. Everything is seeded: the same scenario always produces
//! bit-identical runs, regardless of thread schedule.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agents::{SimParamError, SimProver, SimProverParams, SimVerifier, SimVerifierParams};
use crate::metrics::{
    answer_is_correct, compute_selective_metrics, MetricsError, MetricsReport, ScoredRecord,
};
use crate::protocol::types::{Choice, Question};
use crate::protocol::{
    run_deliberation, DeliberationResult, Participants, RunConfig, RunError, Terminal,
    VerifierVariant,
};

/// Everything needed to reproduce one simulated experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub prover: SimProverParams,
    pub verifier: SimVerifierParams,
    /// Verifier competence: per-round probability a wrong answer is seen as
    /// false. At 0 the verifier is blind and the confidence signal carries no
    /// information; at 1 every wrong answer faces the rejection path.
    #[serde(default = "default_detect")]
    pub detect_wrong_prob: f64,
    pub fatigue_limit: u32,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    pub n_questions: u32,
    pub seed: u64,
}

fn default_detect() -> f64 {
    1.0
}

fn default_attempts() -> u32 {
    1
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Param(#[from] SimParamError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("a simulation needs at least one question")]
    NoQuestions,
}

/// Closed-form accept probabilities of the stylized model over `T` rounds:
/// `(1 − pᵀ, qᵀ)` for true and false claims. A zero budget accepts nothing
/// true and everything false slips through vacuously: `(0, 1)`.
pub fn theoretical_bounds(p: f64, q: f64, fatigue_limit: u32) -> (f64, f64) {
    (1.0 - p.powi(fatigue_limit as i32), q.powi(fatigue_limit as i32))
}

pub(crate) fn handle_seed(seed: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(b"sim-handle");
    hasher.update(label.as_bytes());
    hasher.update([0u8]);
    hasher.update(seed.to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is long enough"))
}

/// Deterministic synthetic question set: four interchangeable options with a
/// seeded gold label. Gold labels are drawn serially up front so they depend
/// only on `(seed, index)`, never on execution order.
pub fn synthetic_questions(n: u32, seed: u64) -> Vec<Question> {
    let mut hasher = Sha256::new();
    hasher.update(b"sim-gold");
    hasher.update(seed.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(hasher.finalize().into());
    let labels = ["A", "B", "C", "D"];
    (0..n)
        .map(|i| {
            let gold = labels[rng.random_range(0..labels.len())];
            Question {
                id: format!("sim-{i:05}"),
                text: format!("Synthetic deliberation exercise {i}: select the designated option."),
                choices: labels
                    .iter()
                    .map(|l| Choice { label: (*l).to_string(), text: format!("option {l}") })
                    .collect(),
                gold: Some(gold.to_string()),
                domain: Some("synthetic".into()),
            }
        })
        .collect()
}

/// One simulated question with its full deliberation outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimRun {
    pub question: Question,
    pub result: DeliberationResult,
}

/// Runs the full protocol over the scenario's synthetic questions. Questions
/// run in parallel; determinism comes from per-call seed derivation, so the
/// output is identical however the work is scheduled.
pub fn run_scenario(scenario: &SimScenario) -> Result<Vec<SimRun>, SimError> {
    if scenario.n_questions == 0 {
        return Err(SimError::NoQuestions);
    }
    let prover = SimProver::new(scenario.prover, handle_seed(scenario.seed, "prover"))?;
    let verifier = SimVerifier::new(scenario.verifier, handle_seed(scenario.seed, "verifier"))?
        .with_detect_prob(scenario.detect_wrong_prob)?;
    let config = RunConfig {
        variant: VerifierVariant::Standard,
        fatigue_limit: scenario.fatigue_limit,
        max_attempts: scenario.max_attempts,
        ..RunConfig::default()
    };
    let questions = synthetic_questions(scenario.n_questions, scenario.seed);
    questions
        .into_par_iter()
        .map(|question| {
            let participants = Participants::Pair { prover: &prover, verifier: &verifier };
            let result = run_deliberation(participants, &question, &config)?;
            Ok(SimRun { question, result })
        })
        .collect()
}

/// Reduces a simulated run to the record the metrics pipeline consumes.
/// Rounds are taken from the deciding (final) attempt.
pub fn score_run(run: &SimRun) -> ScoredRecord {
    ScoredRecord::new(
        run.question.id.clone(),
        run.result.final_answer.clone(),
        run.question.gold.clone().unwrap_or_default(),
        run.result.high_confidence,
        run.result.total_calls,
        None,
        run.result.attempts.last().map(|a| a.rounds),
    )
}

/// A proportion with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub value: f64,
    /// `sqrt(value · (1 − value) / n)`.
    pub se: f64,
    pub n: u64,
}

impl Rate {
    fn from_counts(hits: u64, n: u64) -> Option<Self> {
        (n > 0).then(|| {
            let value = hits as f64 / n as f64;
            Rate { value, se: (value * (1.0 - value) / n as f64).sqrt(), n }
        })
    }
}

/// Measured behavior of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub scenario: SimScenario,
    /// Fraction of correct-answer attempts that ended in acceptance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_accept: Option<Rate>,
    /// Fraction of wrong-answer attempts that ended in acceptance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub false_accept: Option<Rate>,
    pub metrics: MetricsReport,
}

/// Runs the scenario and aggregates accept rates (over attempts) and the
/// selective metrics (over questions).
pub fn monte_carlo_protocol(scenario: &SimScenario) -> Result<SimReport, SimError> {
    let runs = run_scenario(scenario)?;
    let (mut true_hits, mut true_n, mut false_hits, mut false_n) = (0u64, 0u64, 0u64, 0u64);
    for run in &runs {
        let Some(gold) = run.question.gold.as_deref() else { continue };
        for attempt in &run.result.attempts {
            let Some(answer) = attempt.final_answer.as_deref() else { continue };
            let accepted = matches!(
                attempt.terminal,
                Terminal::AcceptNoChange | Terminal::AcceptWithChange
            );
            if answer_is_correct(Some(answer), gold) {
                true_n += 1;
                true_hits += accepted as u64;
            } else {
                false_n += 1;
                false_hits += accepted as u64;
            }
        }
    }
    let records: Vec<ScoredRecord> = runs.iter().map(score_run).collect();
    Ok(SimReport {
        scenario: *scenario,
        true_accept: Rate::from_counts(true_hits, true_n),
        false_accept: Rate::from_counts(false_hits, false_n),
        metrics: compute_selective_metrics(&records)?,
    })
}

/// One swept parameter axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SweepAxis {
    /// Verifier competence grid.
    DetectProb(Vec<f64>),
    /// Fatigue budget grid.
    FatigueLimit(Vec<u32>),
}

fn csv_cell(value: Option<f64>) -> String {
    value.map(|v| format!("{v:.6}")).unwrap_or_default()
}

/// Runs the scenario once per grid point and renders a CSV row for each.
/// Deterministic: the same base scenario and axis always yield byte-identical
/// output.
pub fn sweep(base: &SimScenario, axis: &SweepAxis) -> Result<String, SimError> {
    let mut out = String::from(
        "axis,value,n_questions,true_accept,true_accept_se,false_accept,false_accept_se,hc_cov,hc_prec,non_hc_acc,gap,mean_calls\n",
    );
    let points: Vec<(String, String, SimScenario)> = match axis {
        SweepAxis::DetectProb(values) => values
            .iter()
            .map(|&d| {
                let mut s = *base;
                s.detect_wrong_prob = d;
                ("detect_wrong_prob".to_string(), format!("{d:.6}"), s)
            })
            .collect(),
        SweepAxis::FatigueLimit(values) => values
            .iter()
            .map(|&t| {
                let mut s = *base;
                s.fatigue_limit = t;
                ("fatigue_limit".to_string(), t.to_string(), s)
            })
            .collect(),
    };
    for (axis_name, value, scenario) in points {
        let report = monte_carlo_protocol(&scenario)?;
        out.push_str(&format!(
            "{axis_name},{value},{},{},{},{},{},{},{},{},{},{}\n",
            scenario.n_questions,
            csv_cell(report.true_accept.map(|r| r.value)),
            csv_cell(report.true_accept.map(|r| r.se)),
            csv_cell(report.false_accept.map(|r| r.value)),
            csv_cell(report.false_accept.map(|r| r.se)),
            csv_cell(Some(report.metrics.hc_cov)),
            csv_cell(report.metrics.hc_prec),
            csv_cell(report.metrics.non_hc_acc),
            csv_cell(report.metrics.gap),
            csv_cell(Some(report.metrics.mean_calls)),
        ));
    }
    Ok(out)
}
