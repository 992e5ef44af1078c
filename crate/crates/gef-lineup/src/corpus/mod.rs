//! Essay corpus handling: tokenization, the M² annotation format and its
//! redaction variants, inline `<NS>` error markup, and the essay manifest.

mod clc;
mod m2;
mod manifest;
mod token;

pub use clc::{parse_clc_spans, parse_clc_xml, ClcAnnotation, ClcTypeMap};
pub use m2::{parse_m2, serialize_m2, serialize_m2_file, Edit, M2Format, M2Record, Redaction};
pub use manifest::{load_manifest, parse_manifest, EssayEntry};
pub use token::{detokenize, tokenize, tokenize_spans};

use thiserror::Error;

/// Tokens are non-empty and contain no whitespace.
pub type TokenSeq = Vec<String>;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: malformed: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: span {start} {end} out of range for source of {len} tokens")]
    SpanOutOfRange {
        line: usize,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("annotator {annotator}: edit at {a_start} {a_end} overlaps edit at {b_start} {b_end}")]
    OverlapViolation {
        annotator: u32,
        a_start: usize,
        a_end: usize,
        b_start: usize,
        b_end: usize,
    },
    #[error("unbalanced annotation tag at char {offset}")]
    UnbalancedTag { offset: usize },
    #[error("nested annotation at char {offset}")]
    NestedAnnotation { offset: usize },
    #[error("essay {essay_id}: {reason}")]
    BadManifest { essay_id: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type CorpusResult<T> = Result<T, CorpusError>;
