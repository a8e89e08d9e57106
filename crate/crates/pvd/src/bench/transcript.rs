//! Append-only JSONL run transcripts.
//!
//! Every question's outcome is one [`TranscriptEnvelope`] on one line: the
//! run id, a full config snapshot, the method, the complete payload (with all
//! message logs), the scored reduction, and usage. A transcript is therefore
//! self-sufficient: metrics and statistics can be recomputed from the file
//! alone, and the config snapshot is enough to re-create the run.
//!
//! Writes go through [`OrderedSink`], which serializes concurrent submissions
//! behind a mutex and releases lines strictly in sequence order, so files are
//! deterministic under any thread schedule and records never interleave.
//! Reads tolerate exactly one defect: a partial trailing line without a
//! newline (a crashed writer), which is skipped with a warning.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::agents::UsageRecord;
use crate::baselines::BaselineResult;
use crate::metrics::ScoredRecord;
use crate::protocol::DeliberationResult;

use super::dataset::IngestError;

/// The method-specific outcome carried by an envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum RunPayload {
    Deliberation(DeliberationResult),
    Baseline(BaselineResult),
    /// A per-question breakdown that produced no result (for example, a
    /// baseline where no sample ever parsed). Recorded so the run can finish
    /// and the failure stays visible in the transcript.
    Failure { method: String, error: String },
}

/// One question's complete record within a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEnvelope {
    pub run_id: String,
    /// Position within the run; transcript lines appear in `seq` order.
    pub seq: u64,
    pub question_id: String,
    pub method: String,
    /// Snapshot of the full run configuration, identical on every line.
    pub config: serde_json::Value,
    pub payload: RunPayload,
    /// The metrics-ready reduction of `payload`.
    pub scored: ScoredRecord,
    /// Wall-clock bounds in unix milliseconds; absent for simulated runs so
    /// identical configurations produce byte-identical files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at_ms: Option<u64>,
    pub usage: UsageRecord,
}

struct SinkState<W: Write> {
    writer: W,
    next_seq: u64,
    pending: BTreeMap<u64, String>,
}

/// Serialized, order-restoring transcript writer. Envelopes may be submitted
/// from any thread in any order; lines hit the writer in `seq` order, each
/// flushed whole, so a reader never sees a torn or out-of-order record.
pub struct OrderedSink<W: Write> {
    state: Mutex<SinkState<W>>,
}

impl<W: Write> OrderedSink<W> {
    /// `next_seq` is the first sequence number this sink expects — 0 for a
    /// fresh file, or one past the last persisted envelope when resuming.
    pub fn new(writer: W, next_seq: u64) -> Self {
        Self { state: Mutex::new(SinkState { writer, next_seq, pending: BTreeMap::new() }) }
    }

    pub fn submit(&self, envelope: &TranscriptEnvelope) -> std::io::Result<()> {
        let line = serde_json::to_string(envelope)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        let mut state = self.state.lock().expect("sink poisoned");
        state.pending.insert(envelope.seq, line);
        let mut wrote = false;
        loop {
            let next = state.next_seq;
            let Some(line) = state.pending.remove(&next) else { break };
            writeln!(state.writer, "{line}")?;
            state.next_seq += 1;
            wrote = true;
        }
        if wrote {
            state.writer.flush()?;
        }
        Ok(())
    }

    /// Closes the sink, returning the writer. Errors if a sequence gap left
    /// envelopes buffered — that would mean a submitted record was dropped.
    pub fn finish(self) -> std::io::Result<W> {
        let state = self.state.into_inner().expect("sink poisoned");
        if !state.pending.is_empty() {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!(
                    "transcript sink closed with {} envelope(s) buffered behind missing seq {}",
                    state.pending.len(),
                    state.next_seq
                ),
            ));
        }
        Ok(state.writer)
    }
}

/// A parsed transcript file.
#[derive(Debug)]
pub struct TranscriptFile {
    pub envelopes: Vec<TranscriptEnvelope>,
    /// True when a partial trailing line (crashed writer) was skipped.
    pub skipped_partial_line: bool,
}

/// Reads a transcript, skipping at most a partial trailing line. Any other
/// malformed content is an error naming the line.
pub fn read_transcripts(path: &Path) -> Result<TranscriptFile, IngestError> {
    let display = path.display().to_string();
    let raw = std::fs::read_to_string(path)
        .map_err(|source| IngestError::Io { path: display.clone(), source })?;
    let lines: Vec<(usize, &str)> =
        raw.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).collect();
    let mut envelopes = Vec::with_capacity(lines.len());
    let mut skipped = false;
    for (position, (index, line)) in lines.iter().enumerate() {
        match serde_json::from_str::<TranscriptEnvelope>(line) {
            Ok(envelope) => envelopes.push(envelope),
            Err(source) => {
                let is_unterminated_tail = position + 1 == lines.len() && !raw.ends_with('\n');
                if is_unterminated_tail {
                    log::warn!(
                        "{display}:{}: skipping partial trailing line left by an interrupted run",
                        index + 1
                    );
                    skipped = true;
                } else {
                    return Err(IngestError::Malformed {
                        path: display,
                        line: index + 1,
                        source,
                    });
                }
            }
        }
    }
    Ok(TranscriptFile { envelopes, skipped_partial_line: skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{BaselineMethod, MethodDetail};

    fn envelope(seq: u64) -> TranscriptEnvelope {
        let result = BaselineResult {
            question_id: format!("q{seq}"),
            method: BaselineMethod::SelfConsistency,
            final_answer: "A".into(),
            hc_flag: true,
            samples: vec![],
            calls: 3,
            usage: UsageRecord::default(),
            detail: MethodDetail::SelfConsistency { agreement: 1.0, unparseable: 0 },
        };
        TranscriptEnvelope {
            run_id: "abcd1234".into(),
            seq,
            question_id: format!("q{seq}"),
            method: "sc".into(),
            config: serde_json::json!({"seed": 7}),
            scored: ScoredRecord::new(format!("q{seq}"), Some("A".into()), "A", true, 3, None, None),
            payload: RunPayload::Baseline(result),
            started_at_ms: None,
            finished_at_ms: None,
            usage: UsageRecord::default(),
        }
    }

    #[test]
    fn envelopes_round_trip_identically() {
        let original = envelope(0);
        let line = serde_json::to_string(&original).unwrap();
        let reparsed: TranscriptEnvelope = serde_json::from_str(&line).unwrap();
        assert_eq!(reparsed, original);
        assert_eq!(serde_json::to_string(&reparsed).unwrap(), line);
    }

    #[test]
    fn sink_releases_lines_in_sequence_order() {
        let sink = OrderedSink::new(Vec::new(), 0);
        for seq in [2u64, 0, 1, 3] {
            sink.submit(&envelope(seq)).unwrap();
        }
        let bytes = sink.finish().unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let seqs: Vec<u64> = text
            .lines()
            .map(|l| serde_json::from_str::<TranscriptEnvelope>(l).unwrap().seq)
            .collect();
        assert_eq!(seqs, vec![0, 1, 2, 3]);
    }

    #[test]
    fn sink_reports_sequence_gaps_at_close() {
        let sink = OrderedSink::new(Vec::new(), 0);
        sink.submit(&envelope(0)).unwrap();
        sink.submit(&envelope(2)).unwrap();
        let err = sink.finish().unwrap_err();
        assert!(err.to_string().contains("seq 1"), "{err}");
    }

    #[test]
    fn concurrent_submissions_never_tear_records() {
        use rayon::prelude::*;
        let sink = OrderedSink::new(Vec::new(), 0);
        (0u64..200).into_par_iter().for_each(|seq| {
            sink.submit(&envelope(seq)).unwrap();
        });
        let text = String::from_utf8(sink.finish().unwrap()).unwrap();
        let seqs: Vec<u64> = text
            .lines()
            .map(|l| serde_json::from_str::<TranscriptEnvelope>(l).unwrap().seq)
            .collect();
        assert_eq!(seqs, (0..200).collect::<Vec<_>>());
    }

    #[test]
    fn reader_skips_only_an_unterminated_trailing_line() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "{}", serde_json::to_string(&envelope(0)).unwrap()).unwrap();
        writeln!(file, "{}", serde_json::to_string(&envelope(1)).unwrap()).unwrap();
        write!(file, r#"{{"run_id":"abcd1234","seq":2,"questi"#).unwrap();
        file.flush().unwrap();
        let parsed = read_transcripts(file.path()).unwrap();
        assert_eq!(parsed.envelopes.len(), 2);
        assert!(parsed.skipped_partial_line);
    }

    #[test]
    fn reader_rejects_corruption_before_the_tail() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "{}", serde_json::to_string(&envelope(0)).unwrap()).unwrap();
        writeln!(file, "{{broken}}").unwrap();
        writeln!(file, "{}", serde_json::to_string(&envelope(2)).unwrap()).unwrap();
        file.flush().unwrap();
        match read_transcripts(file.path()) {
            Err(IngestError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed error, got {other:?}"),
        }

        // A terminated but corrupt final line is corruption, not a crash tail.
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "{}", serde_json::to_string(&envelope(0)).unwrap()).unwrap();
        writeln!(file, "{{broken}}").unwrap();
        file.flush().unwrap();
        assert!(matches!(
            read_transcripts(file.path()),
            Err(IngestError::Malformed { line: 2, .. })
        ));
    }
}
