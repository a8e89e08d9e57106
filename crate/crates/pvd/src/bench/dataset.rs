//! JSONL dataset ingestion.
//!
//! A dataset is one JSON object per line with the [`Question`] shape:
//! `id`, `text`, `choices` (label/text pairs), optional `gold`, optional
//! `domain`. Errors carry the file path and 1-based line number; an empty
//! file is a valid empty dataset.

use std::collections::BTreeSet;
use std::io::BufRead;
use std::path::Path;

use thiserror::Error;

use crate::protocol::types::{Question, QuestionError};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {source}")]
    Malformed {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}:{line}: {source}")]
    InvalidQuestion {
        path: String,
        line: usize,
        #[source]
        source: QuestionError,
    },
    #[error("{path}:{line}: duplicate question id {id:?}")]
    DuplicateId { path: String, line: usize, id: String },
    #[error("{path}:{line}: question {id:?} is missing required field `gold` (needed to score an evaluation run)")]
    MissingGold { path: String, line: usize, id: String },
    #[error("{path}:{line}: transcript belongs to run {found:?}, expected {expected:?}")]
    ForeignRun { path: String, line: usize, found: String, expected: String },
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

/// Loads a JSONL dataset. With `require_gold`, every question must carry a
/// gold label (evaluation mode); without it, unlabeled questions pass through.
pub fn load_dataset(path: &Path, require_gold: bool) -> Result<Vec<Question>, IngestError> {
    let file = std::fs::File::open(path)
        .map_err(|source| IngestError::Io { path: display(path), source })?;
    let mut questions = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for (index, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| IngestError::Io { path: display(path), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = index + 1;
        let question: Question = serde_json::from_str(&line).map_err(|source| {
            IngestError::Malformed { path: display(path), line: lineno, source }
        })?;
        question.validate().map_err(|source| IngestError::InvalidQuestion {
            path: display(path),
            line: lineno,
            source,
        })?;
        if !seen.insert(question.id.clone()) {
            return Err(IngestError::DuplicateId {
                path: display(path),
                line: lineno,
                id: question.id,
            });
        }
        if require_gold && question.gold.is_none() {
            return Err(IngestError::MissingGold {
                path: display(path),
                line: lineno,
                id: question.id,
            });
        }
        questions.push(question);
    }
    Ok(questions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        for line in lines {
            writeln!(file, "{line}").unwrap();
        }
        file
    }

    const Q1: &str = r#"{"id":"q1","text":"Pick A.","choices":[{"label":"A","text":"first"},{"label":"B","text":"second"}],"gold":"A"}"#;
    const Q2: &str = r#"{"id":"q2","text":"Pick B.","choices":[{"label":"A","text":"first"},{"label":"B","text":"second"}],"gold":"B","domain":"physics"}"#;
    const Q_NO_GOLD: &str = r#"{"id":"q3","text":"Pick one.","choices":[{"label":"A","text":"first"},{"label":"B","text":"second"}]}"#;

    #[test]
    fn loads_valid_records_and_tolerates_blank_lines() {
        let file = write_file(&[Q1, "", Q2]);
        let questions = load_dataset(file.path(), true).unwrap();
        assert_eq!(questions.len(), 2);
        assert_eq!(questions[0].id, "q1");
        assert_eq!(questions[1].domain.as_deref(), Some("physics"));
    }

    #[test]
    fn empty_file_is_an_empty_dataset() {
        let file = write_file(&[]);
        assert!(load_dataset(file.path(), true).unwrap().is_empty());
    }

    #[test]
    fn malformed_line_errors_with_its_line_number() {
        let file = write_file(&[Q1, "{not json", Q2]);
        let err = load_dataset(file.path(), true).unwrap_err();
        match &err {
            IngestError::Malformed { line, .. } => assert_eq!(*line, 2),
            other => panic!("expected malformed error, got {other:?}"),
        }
        assert!(err.to_string().contains(":2:"));
    }

    #[test]
    fn duplicate_ids_error_by_name() {
        let dup = Q1.replace("Pick A.", "Pick again.");
        let file = write_file(&[Q1, &dup]);
        let err = load_dataset(file.path(), true).unwrap_err();
        match err {
            IngestError::DuplicateId { id, line, .. } => {
                assert_eq!(id, "q1");
                assert_eq!(line, 2);
            }
            other => panic!("expected duplicate id error, got {other:?}"),
        }
    }

    #[test]
    fn evaluation_mode_requires_gold() {
        let file = write_file(&[Q1, Q_NO_GOLD]);
        let err = load_dataset(file.path(), true).unwrap_err();
        match err {
            IngestError::MissingGold { id, .. } => assert_eq!(id, "q3"),
            other => panic!("expected missing gold error, got {other:?}"),
        }
        let questions = load_dataset(file.path(), false).unwrap();
        assert_eq!(questions.len(), 2, "collection mode accepts unlabeled questions");
    }

    #[test]
    fn structurally_invalid_questions_are_rejected() {
        let bad = r#"{"id":"q9","text":"Bad.","choices":[{"label":"A","text":"only"}],"gold":"Z"}"#;
        let file = write_file(&[bad]);
        assert!(matches!(
            load_dataset(file.path(), true),
            Err(IngestError::InvalidQuestion { .. })
        ));
    }
}
