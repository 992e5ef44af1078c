use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CorpusError, CorpusResult};

/// One essay of the corpus manifest (a JSON object per line).
///
/// `m2` and `clc` carry annotations in their respective formats; when both
/// are absent, corrections can still be recovered from `corrected_text`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EssayEntry {
    pub essay_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrected_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m2: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clc: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cefr_level: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l1: Option<String>,
}

/// Parse a JSON-lines manifest. Blank lines are skipped; essay ids must be
/// unique.
pub fn parse_manifest(text: &str) -> CorpusResult<Vec<EssayEntry>> {
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: EssayEntry =
            serde_json::from_str(line).map_err(|e| CorpusError::MalformedLine {
                line: idx + 1,
                reason: e.to_string(),
            })?;
        if entry.essay_id.is_empty() {
            return Err(CorpusError::BadManifest {
                essay_id: String::new(),
                reason: format!("line {}: empty essay_id", idx + 1),
            });
        }
        if !seen.insert(entry.essay_id.clone()) {
            return Err(CorpusError::BadManifest {
                essay_id: entry.essay_id.clone(),
                reason: "duplicate essay_id".into(),
            });
        }
        entries.push(entry);
    }
    Ok(entries)
}

pub fn load_manifest(path: impl AsRef<Path>) -> CorpusResult<Vec<EssayEntry>> {
    parse_manifest(&std::fs::read_to_string(path)?)
}
