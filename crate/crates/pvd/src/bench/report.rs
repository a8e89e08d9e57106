//! Deterministic cross-method report rendering.
//!
//! Two formats from the same inputs: a markdown table for humans and a CSV
//! for machines. Rendering is a pure function of the inputs — byte-identical
//! on every call — with rows sorted by method label. Markdown rounds
//! percentages to one decimal (coverage to a whole percent, matching how the
//! headline table is read); the CSV keeps six decimals of the raw
//! proportions. Undefined quantities render as "—" in markdown and empty CSV
//! cells — never as a fabricated zero.

use crate::metrics::{pct_points, MetricsReport};

const MD_HEADER: &str = "| Method | Accuracy | Coverage | HC precision | Non-HC accuracy | Gap (pp) | Mean rounds | Mean calls | Mean cost (¢) |\n|---|---:|---:|---:|---:|---:|---:|---:|---:|\n";

const CSV_HEADER: &str =
    "method,n,overall_acc,hc_cov,hc_prec,non_hc_acc,gap,mean_rounds,mean_calls,mean_cost_cents\n";

fn sorted<'a>(entries: &'a [(String, MetricsReport)]) -> Vec<&'a (String, MetricsReport)> {
    let mut rows: Vec<&(String, MetricsReport)> = entries.iter().collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    rows
}

fn md_pct(value: Option<f64>) -> String {
    value.map(|p| format!("{:.1}%", pct_points(p))).unwrap_or_else(|| "—".into())
}

fn md_opt(value: Option<f64>, decimals: usize) -> String {
    value.map(|v| format!("{v:.decimals$}")).unwrap_or_else(|| "—".into())
}

/// Markdown table in the headline column order.
pub fn render_markdown(entries: &[(String, MetricsReport)]) -> String {
    let mut out = String::from(MD_HEADER);
    for (method, m) in sorted(entries) {
        out.push_str(&format!(
            "| {method} | {} | {:.0}% | {} | {} | {} | {} | {:.1} | {} |\n",
            md_pct(Some(m.overall_acc)),
            (m.hc_cov * 100.0).round(),
            md_pct(m.hc_prec),
            md_pct(m.non_hc_acc),
            m.gap.map(|g| format!("{:+.1}", pct_points(g))).unwrap_or_else(|| "—".into()),
            md_opt(m.mean_rounds, 1),
            m.mean_calls,
            md_opt(m.mean_cost_cents, 2),
        ));
    }
    out
}

fn csv_opt(value: Option<f64>) -> String {
    value.map(|v| format!("{v:.6}")).unwrap_or_default()
}

/// CSV with raw (unrounded-to-display) proportions, same row order as the
/// markdown table.
pub fn render_csv(entries: &[(String, MetricsReport)]) -> String {
    let mut out = String::from(CSV_HEADER);
    for (method, m) in sorted(entries) {
        out.push_str(&format!(
            "{method},{},{:.6},{:.6},{},{},{},{},{:.6},{}\n",
            m.n,
            m.overall_acc,
            m.hc_cov,
            csv_opt(m.hc_prec),
            csv_opt(m.non_hc_acc),
            csv_opt(m.gap),
            csv_opt(m.mean_rounds),
            m.mean_calls,
            csv_opt(m.mean_cost_cents),
        ));
    }
    out
}
