//! Selective-prediction metrics over scored runs.
//!
//! Every method — the deliberation protocol and each baseline — reduces a
//! question to a [`ScoredRecord`]: the final answer, whether it was correct,
//! whether the method flagged it high-confidence (HC), and what it cost. This
//! module turns record sets into the quantities the evaluation reports:
//!
//! * **coverage** — fraction of questions flagged HC;
//! * **HC precision** — accuracy within the HC subset (the headline number;
//!   `1 − precision` is the selective risk);
//! * **non-HC accuracy** — accuracy on the complement;
//! * **gap** — HC precision minus non-HC accuracy, in percentage points.
//!
//! Undefined quantities stay undefined: an empty HC subset has no precision
//! and an empty complement has no non-HC accuracy, so those fields are `None`
//! rather than a fabricated 0. Stored values are unrounded; rounding to one
//! decimal happens only at the rendering edge (see [`pct_points`]).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::types::normalize_label;

/// One question's outcome under one method, reduced to what the metrics need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRecord {
    pub question_id: String,
    /// Final answer, if the method produced one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_answer: Option<String>,
    pub gold: String,
    pub hc_flag: bool,
    /// Normalized equality of `final_answer` and `gold`; stored so records
    /// re-read from disk carry their scoring with them.
    pub correct: bool,
    pub calls: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_cents: Option<f64>,
    /// Deliberation rounds, for protocol runs; baselines have none.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<u32>,
}

/// Normalized answer-equality rule shared by every scoring site.
pub fn answer_is_correct(final_answer: Option<&str>, gold: &str) -> bool {
    final_answer.map(|a| normalize_label(a) == normalize_label(gold)).unwrap_or(false)
}

impl ScoredRecord {
    /// Builds a record, deriving `correct` from the normalized comparison.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        question_id: impl Into<String>,
        final_answer: Option<String>,
        gold: impl Into<String>,
        hc_flag: bool,
        calls: u32,
        cost_cents: Option<f64>,
        rounds: Option<u32>,
    ) -> Self {
        let gold = gold.into();
        let correct = answer_is_correct(final_answer.as_deref(), &gold);
        Self { question_id: question_id.into(), final_answer, gold, hc_flag, correct, calls, cost_cents, rounds }
    }
}

/// Aggregate selective-prediction metrics for one method over one record set.
///
/// Proportions are stored unrounded in `[0, 1]`; `gap` is a difference of
/// proportions (multiply by 100 for percentage points).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub hc_count: usize,
    pub overall_acc: f64,
    /// `hc_count / n`; multiplying back by `n` recovers an integer count.
    pub hc_cov: f64,
    /// Accuracy within the HC subset; `None` when nothing was flagged.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hc_prec: Option<f64>,
    /// Accuracy on the non-HC complement; `None` when everything was flagged.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub non_hc_acc: Option<f64>,
    /// `hc_prec − non_hc_acc`, defined only when both sides are.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    /// Mean rounds over the records that carry a round count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_rounds: Option<f64>,
    pub mean_calls: f64,
    /// Mean cost over the records that carry a cost; absent when none do.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_cost_cents: Option<f64>,
}

impl MetricsReport {
    /// Error rate inside the HC subset: `1 − hc_prec`.
    pub fn selective_risk(&self) -> Option<f64> {
        self.hc_prec.map(|p| 1.0 - p)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("cannot compute metrics over an empty record set")]
    Empty,
    #[error("record sets differ in length ({a} vs {b})")]
    LengthMismatch { a: usize, b: usize },
    #[error("record sets are not aligned: question id {id:?} appears in one but not the other")]
    MisalignedIds { id: String },
}

/// Rounds a proportion to one-decimal percentage points (0.84210… → 84.2).
/// This is the only rounding rule in the pipeline; storage stays unrounded.
pub fn pct_points(proportion: f64) -> f64 {
    (proportion * 1000.0).round() / 10.0
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut count) = (0.0, 0usize);
    for v in values {
        sum += v;
        count += 1;
    }
    (count > 0).then(|| sum / count as f64)
}

/// Computes the selective-prediction report for one record set.
pub fn compute_selective_metrics(records: &[ScoredRecord]) -> Result<MetricsReport, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = records.len();
    let hc: Vec<&ScoredRecord> = records.iter().filter(|r| r.hc_flag).collect();
    let non_hc: Vec<&ScoredRecord> = records.iter().filter(|r| !r.hc_flag).collect();
    let correct = records.iter().filter(|r| r.correct).count();
    let accuracy_of = |subset: &[&ScoredRecord]| -> Option<f64> {
        (!subset.is_empty())
            .then(|| subset.iter().filter(|r| r.correct).count() as f64 / subset.len() as f64)
    };
    let hc_prec = accuracy_of(&hc);
    let non_hc_acc = accuracy_of(&non_hc);
    Ok(MetricsReport {
        n,
        hc_count: hc.len(),
        overall_acc: correct as f64 / n as f64,
        hc_cov: hc.len() as f64 / n as f64,
        hc_prec,
        non_hc_acc,
        gap: hc_prec.zip(non_hc_acc).map(|(p, q)| p - q),
        mean_rounds: mean(records.iter().filter_map(|r| r.rounds.map(f64::from))),
        mean_calls: records.iter().map(|r| f64::from(r.calls)).sum::<f64>() / n as f64,
        mean_cost_cents: mean(records.iter().filter_map(|r| r.cost_cents)),
    })
}

/// 2×2 agreement of two methods' HC flags over the same questions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapTable {
    pub n: usize,
    /// Flagged HC by both methods.
    pub both: usize,
    /// Flagged only by the first method.
    pub only_a: usize,
    /// Flagged only by the second method.
    pub only_b: usize,
    pub neither: usize,
    /// Accuracy of each method on the both-HC cell; `None` when it is empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub both_acc_a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub both_acc_b: Option<f64>,
}

impl OverlapTable {
    /// Cell shares as percentages of `n`, in table order
    /// (both, only-first, only-second, neither).
    pub fn cell_percents(&self) -> [f64; 4] {
        let pct = |c: usize| 100.0 * c as f64 / self.n as f64;
        [pct(self.both), pct(self.only_a), pct(self.only_b), pct(self.neither)]
    }
}

/// Pairs two record sets by question id (order-insensitive) and returns the
/// HC-flag overlap table. The sets must cover exactly the same questions.
pub fn overlap_table(a: &[ScoredRecord], b: &[ScoredRecord]) -> Result<OverlapTable, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::Empty);
    }
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch { a: a.len(), b: b.len() });
    }
    let mut by_id: std::collections::BTreeMap<&str, &ScoredRecord> =
        b.iter().map(|r| (r.question_id.as_str(), r)).collect();
    if by_id.len() != b.len() {
        // A duplicate id in `b` hides another record; the first id that
        // cannot be matched one-to-one is the misalignment.
        let mut seen = std::collections::BTreeSet::new();
        for r in b {
            if !seen.insert(r.question_id.as_str()) {
                return Err(MetricsError::MisalignedIds { id: r.question_id.clone() });
            }
        }
    }
    let mut table = OverlapTable {
        n: a.len(),
        both: 0,
        only_a: 0,
        only_b: 0,
        neither: 0,
        both_acc_a: None,
        both_acc_b: None,
    };
    let (mut both_correct_a, mut both_correct_b) = (0usize, 0usize);
    for ra in a {
        let Some(rb) = by_id.remove(ra.question_id.as_str()) else {
            return Err(MetricsError::MisalignedIds { id: ra.question_id.clone() });
        };
        match (ra.hc_flag, rb.hc_flag) {
            (true, true) => {
                table.both += 1;
                both_correct_a += ra.correct as usize;
                both_correct_b += rb.correct as usize;
            }
            (true, false) => table.only_a += 1,
            (false, true) => table.only_b += 1,
            (false, false) => table.neither += 1,
        }
    }
    if let Some((id, _)) = by_id.pop_first() {
        return Err(MetricsError::MisalignedIds { id: id.to_string() });
    }
    if table.both > 0 {
        table.both_acc_a = Some(both_correct_a as f64 / table.both as f64);
        table.both_acc_b = Some(both_correct_b as f64 / table.both as f64);
    }
    Ok(table)
}

/// Cost/quality summary across methods as CSV: one row per method with its
/// HC precision, mean cost, and coverage. Rows are sorted by method name;
/// undefined values render as empty cells.
pub fn cost_summary(entries: &[(String, MetricsReport)]) -> String {
    let mut rows: Vec<&(String, MetricsReport)> = entries.iter().collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out = String::from("method,hc_prec,mean_cost_cents,hc_cov\n");
    for (method, report) in rows {
        let fmt_pct = |v: Option<f64>| v.map(|p| format!("{:.1}", pct_points(p))).unwrap_or_default();
        let cost = report.mean_cost_cents.map(|c| format!("{c:.2}")).unwrap_or_default();
        out.push_str(&format!(
            "{method},{},{cost},{}\n",
            fmt_pct(report.hc_prec),
            fmt_pct(Some(report.hc_cov)),
        ));
    }
    out
}
