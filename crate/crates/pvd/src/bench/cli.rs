//! Command-line interface.
//!
//! Subcommands: `run` (the deliberation protocol), `baseline <method>`,
//! `simulate` (Monte-Carlo validation), `metrics`, `stats` (single-run
//! intervals or `--pairs` comparisons), and `report` (cross-method tables).
//!
//! Exit codes: 0 success; 2 configuration problems; 3 ingest/data problems;
//! 4 transport or credential failures; 5 the run finished but recorded
//! per-question protocol failures.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::metrics::{
    compute_selective_metrics, cost_summary, overlap_table, MetricsError, MetricsReport,
    ScoredRecord,
};
use crate::protocol::VerifierVariant;
use crate::simlab::{monte_carlo_protocol, sweep, theoretical_bounds, SweepAxis};
use crate::stats::{bootstrap_gap_ci, fisher_exact, mcnemar, wilson_interval};

use super::config::{load_config, BenchConfig, ConfigError, MethodChoice};
use super::report::{render_csv, render_markdown};
use super::runner::execute_run;
use super::transcript::read_transcripts;
use super::BenchError;

#[derive(Debug, Parser)]
#[command(
    name = "pvd",
    version,
    about = "Prover-verifier deliberation: protocol runs, baselines, simulation, and analysis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Standard,
    ChallengeFirst,
    #[value(name = "self")]
    SelfDeliberation,
}

impl From<VariantArg> for VerifierVariant {
    fn from(value: VariantArg) -> Self {
        match value {
            VariantArg::Standard => VerifierVariant::Standard,
            VariantArg::ChallengeFirst => VerifierVariant::ChallengeFirst,
            VariantArg::SelfDeliberation => VerifierVariant::SelfDeliberation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineArg {
    Sc,
    Usc,
    Debate,
    Reflexion,
}

impl From<BaselineArg> for MethodChoice {
    fn from(value: BaselineArg) -> Self {
        match value {
            BaselineArg::Sc => MethodChoice::Sc,
            BaselineArg::Usc => MethodChoice::Usc,
            BaselineArg::Debate => MethodChoice::Debate,
            BaselineArg::Reflexion => MethodChoice::Reflexion,
        }
    }
}

/// Flags that override fields of the loaded configuration.
#[derive(Debug, Args)]
pub struct RunOverrides {
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Override the run seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the deliberation round budget.
    #[arg(long)]
    pub fatigue: Option<u32>,
    /// Override the prover attempt budget.
    #[arg(long)]
    pub attempts: Option<u32>,
    /// Override the verifier variant.
    #[arg(long, value_enum)]
    pub verifier_variant: Option<VariantArg>,
    /// Override the dataset path.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Override the output transcript path.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl RunOverrides {
    pub fn apply(&self, config: &mut BenchConfig) {
        if let Some(seed) = self.seed {
            config.run.seed = seed;
        }
        if let Some(fatigue) = self.fatigue {
            config.run.fatigue_limit = fatigue;
        }
        if let Some(attempts) = self.attempts {
            config.run.max_attempts = attempts;
        }
        if let Some(variant) = self.verifier_variant {
            config.run.verifier_variant = variant.into();
        }
        if let Some(dataset) = &self.dataset {
            config.run.dataset = dataset.clone();
        }
        if let Some(output) = &self.output {
            config.run.output = output.clone();
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the deliberation protocol over a dataset.
    Run(RunOverrides),
    /// Run a baseline method over a dataset.
    Baseline {
        #[arg(value_enum)]
        method: BaselineArg,
        #[command(flatten)]
        overrides: RunOverrides,
    },
    /// Monte-Carlo validation of the protocol against its closed forms.
    Simulate {
        /// TOML configuration containing a [simulate] scenario.
        #[arg(long)]
        config: PathBuf,
        /// Sweep one axis instead of a single run:
        /// "detect=0,0.5,1" or "fatigue=1,2,4,8".
        #[arg(long)]
        sweep: Option<String>,
        /// Write the output here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Selective metrics from a transcript.
    Metrics {
        /// Transcript JSONL produced by `run` or `baseline`.
        #[arg(long)]
        input: PathBuf,
    },
    /// Confidence intervals for one run, or paired tests with --pairs.
    Stats {
        #[arg(long)]
        input: PathBuf,
        /// Second transcript over the same questions for paired tests.
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        resamples: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
    },
    /// Render cross-method report tables from transcripts.
    Report {
        #[arg(long, required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        /// Directory for report.md, report.csv, and costs.csv.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

/// Writes to stdout, ignoring a closed pipe (`pvd … | head` must not panic).
fn out(content: &str) {
    use std::io::Write as _;
    let _ = std::io::stdout().write_all(content.as_bytes());
}

fn out_line(content: &str) {
    out(content);
    out("\n");
}

/// Parses CLI arguments and runs the selected command, returning the process
/// exit code.
pub fn main_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests exit 0 through clap's printer.
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(error) => {
            eprintln!("error: {error}");
            let mut source = std::error::Error::source(&error);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            error.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<i32, BenchError> {
    match command {
        Command::Run(overrides) => cmd_run(overrides, None),
        Command::Baseline { method, overrides } => cmd_run(overrides, Some(method.into())),
        Command::Simulate { config, sweep, out } => cmd_simulate(&config, sweep.as_deref(), out),
        Command::Metrics { input } => cmd_metrics(&input),
        Command::Stats { input, pairs, resamples, seed, level } => {
            cmd_stats(&input, pairs.as_deref(), resamples, seed, level)
        }
        Command::Report { inputs, out_dir } => cmd_report(&inputs, &out_dir),
    }
}

fn cmd_run(overrides: RunOverrides, forced_method: Option<MethodChoice>) -> Result<i32, BenchError> {
    let mut config = load_config(&overrides.config)?;
    overrides.apply(&mut config);
    if let Some(method) = forced_method {
        config.run.method = method;
    }
    config.validate()?;
    let outcome = execute_run(&config)?;
    out_line(&format!(
        "run {} ({}): {} completed, {} resumed, {} protocol failures",
        outcome.run_id, outcome.method, outcome.completed, outcome.resumed,
        outcome.protocol_failures
    ));
    if !outcome.records.is_empty() {
        let metrics = compute_selective_metrics(&outcome.records)?;
        out(&render_markdown(&[(outcome.method.clone(), metrics)]));
    }
    Ok(if outcome.protocol_failures > 0 { 5 } else { 0 })
}

/// Parses a sweep spec like "detect=0,0.5,1" or "fatigue=1,2,4".
pub fn parse_sweep(spec: &str) -> Result<SweepAxis, ConfigError> {
    let (axis, values) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError::Invalid(format!("sweep spec {spec:?} needs axis=v1,v2,…")))?;
    let parse_err =
        |v: &str| ConfigError::Invalid(format!("sweep value {v:?} is not a number"));
    match axis {
        "detect" => values
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| parse_err(v)))
            .collect::<Result<Vec<_>, _>>()
            .map(SweepAxis::DetectProb),
        "fatigue" => values
            .split(',')
            .map(|v| v.trim().parse::<u32>().map_err(|_| parse_err(v)))
            .collect::<Result<Vec<_>, _>>()
            .map(SweepAxis::FatigueLimit),
        other => Err(ConfigError::Invalid(format!(
            "unknown sweep axis {other:?} (expected \"detect\" or \"fatigue\")"
        ))),
    }
}

fn emit(target: Option<PathBuf>, content: &str) -> Result<(), BenchError> {
    match target {
        Some(path) => {
            std::fs::write(&path, content)?;
            out_line(&format!("wrote {}", path.display()));
        }
        None => out(content),
    }
    Ok(())
}

fn cmd_simulate(
    config_path: &Path,
    sweep_spec: Option<&str>,
    out: Option<PathBuf>,
) -> Result<i32, BenchError> {
    let config = load_config(config_path)?;
    let scenario = config.simulate.ok_or_else(|| {
        ConfigError::Invalid("the configuration has no [simulate] scenario".into())
    })?;
    match sweep_spec {
        Some(spec) => {
            let axis = parse_sweep(spec)?;
            let csv = sweep(&scenario, &axis)?;
            emit(out, &csv)?;
        }
        None => {
            #[derive(Serialize)]
            struct SimulateOutput {
                report: crate::simlab::SimReport,
                /// Closed-form (true-accept, false-accept) for the scenario's
                /// p, q, and round budget.
                theoretical: (f64, f64),
            }
            let report = monte_carlo_protocol(&scenario)?;
            let theoretical = theoretical_bounds(
                scenario.verifier.challenge_prob,
                scenario.verifier.slip_prob,
                scenario.fatigue_limit,
            );
            let output = SimulateOutput { report, theoretical };
            emit(out, &format!("{}\n", serde_json::to_string_pretty(&output).expect("serializes")))?;
        }
    }
    Ok(0)
}

/// Scored records from a transcript, labeled by the file stem.
fn load_scored(path: &Path) -> Result<(String, Vec<ScoredRecord>), BenchError> {
    let transcript = read_transcripts(path)?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Ok((label, transcript.envelopes.into_iter().map(|e| e.scored).collect()))
}

fn cmd_metrics(input: &Path) -> Result<i32, BenchError> {
    let (label, records) = load_scored(input)?;
    let metrics = compute_selective_metrics(&records)?;
    #[derive(Serialize)]
    struct MetricsOutput {
        method: String,
        metrics: MetricsReport,
    }
    out_line(
        &serde_json::to_string_pretty(&MetricsOutput { method: label, metrics })
            .expect("serializes"),
    );
    Ok(0)
}

/// Pairs two record sets by question id; both must cover the same questions.
fn align(
    a: &[ScoredRecord],
    b: &[ScoredRecord],
) -> Result<Vec<(ScoredRecord, ScoredRecord)>, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch { a: a.len(), b: b.len() });
    }
    let mut by_id: BTreeMap<&str, &ScoredRecord> =
        b.iter().map(|r| (r.question_id.as_str(), r)).collect();
    let mut pairs = Vec::with_capacity(a.len());
    for ra in a {
        let rb = by_id
            .remove(ra.question_id.as_str())
            .ok_or_else(|| MetricsError::MisalignedIds { id: ra.question_id.clone() })?;
        pairs.push((ra.clone(), rb.clone()));
    }
    if let Some((id, _)) = by_id.pop_first() {
        return Err(MetricsError::MisalignedIds { id: id.to_string() });
    }
    Ok(pairs)
}

fn cmd_stats(
    input: &Path,
    pairs: Option<&Path>,
    resamples: u32,
    seed: u64,
    level: f64,
) -> Result<i32, BenchError> {
    let (label, records) = load_scored(input)?;
    match pairs {
        None => {
            let hc: Vec<&ScoredRecord> = records.iter().filter(|r| r.hc_flag).collect();
            let hc_correct = hc.iter().filter(|r| r.correct).count() as u64;
            let precision_interval = if hc.is_empty() {
                None
            } else {
                Some(wilson_interval(hc_correct, hc.len() as u64, level)?)
            };
            let gap_bootstrap = bootstrap_gap_ci(&records, resamples, seed, level)?;
            #[derive(Serialize)]
            struct SingleStats {
                method: String,
                n: usize,
                hc_precision_interval: Option<crate::stats::ConfidenceInterval>,
                gap_bootstrap: crate::stats::BootstrapGap,
            }
            let output = SingleStats {
                method: label,
                n: records.len(),
                hc_precision_interval: precision_interval,
                gap_bootstrap,
            };
            out_line(&serde_json::to_string_pretty(&output).expect("serializes"));
        }
        Some(pairs_path) => {
            let (label_b, records_b) = load_scored(pairs_path)?;
            let aligned = align(&records, &records_b)?;
            let correct_a: Vec<bool> = aligned.iter().map(|(a, _)| a.correct).collect();
            let correct_b: Vec<bool> = aligned.iter().map(|(_, b)| b.correct).collect();
            let mcnemar_result = mcnemar(&correct_a, &correct_b)?;

            let hc_split = |records: &[ScoredRecord]| -> [u64; 2] {
                let correct =
                    records.iter().filter(|r| r.hc_flag && r.correct).count() as u64;
                let wrong = records.iter().filter(|r| r.hc_flag && !r.correct).count() as u64;
                [correct, wrong]
            };
            let table = [hc_split(&records), hc_split(&records_b)];
            let fisher = fisher_exact(table);
            let overlap = overlap_table(&records, &records_b)?;

            #[derive(Serialize)]
            struct PairedStats {
                method_a: String,
                method_b: String,
                n: usize,
                /// [[a-HC correct, a-HC wrong], [b-HC correct, b-HC wrong]].
                hc_precision_table: [[u64; 2]; 2],
                fisher: crate::stats::TestResult,
                mcnemar: crate::stats::McNemarResult,
                overlap: crate::metrics::OverlapTable,
            }
            let output = PairedStats {
                method_a: label,
                method_b: label_b,
                n: aligned.len(),
                hc_precision_table: table,
                fisher,
                mcnemar: mcnemar_result,
                overlap,
            };
            out_line(&serde_json::to_string_pretty(&output).expect("serializes"));
        }
    }
    Ok(0)
}

fn cmd_report(inputs: &[PathBuf], out_dir: &Path) -> Result<i32, BenchError> {
    let mut entries = Vec::with_capacity(inputs.len());
    for input in inputs {
        let (label, records) = load_scored(input)?;
        entries.push((label, compute_selective_metrics(&records)?));
    }
    let markdown = render_markdown(&entries);
    let csv = render_csv(&entries);
    let costs = cost_summary(&entries);
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("report.md"), &markdown)?;
    std::fs::write(out_dir.join("report.csv"), &csv)?;
    std::fs::write(out_dir.join("costs.csv"), &costs)?;
    out(&markdown);
    out_line(&format!(
        "wrote {}, {}, {}",
        out_dir.join("report.md").display(),
        out_dir.join("report.csv").display(),
        out_dir.join("costs.csv").display()
    ));
    Ok(0)
}
