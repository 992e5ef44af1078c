use serde::{Deserialize, Serialize};

use super::{CorpusError, CorpusResult, TokenSeq};

/// One correction: replace `source[start..end]` with `replacement`.
///
/// `start == end` is an insertion; an empty replacement with `start < end`
/// is a deletion. `U:`-prefixed types must be deletions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edit {
    pub start: usize,
    pub end: usize,
    pub replacement: TokenSeq,
    pub etype: String,
    pub annotator: u32,
    pub required: bool,
}

impl Edit {
    pub fn is_insertion(&self) -> bool {
        self.start == self.end
    }

    pub fn is_deletion(&self) -> bool {
        self.replacement.is_empty() && self.start < self.end
    }

    /// Token-count change when this edit is applied.
    pub fn delta(&self) -> isize {
        self.replacement.len() as isize - (self.end - self.start) as isize
    }

    fn check(&self, line: usize, source_len: usize) -> CorpusResult<()> {
        if self.start > self.end {
            return Err(CorpusError::MalformedLine {
                line,
                reason: format!("span start {} after end {}", self.start, self.end),
            });
        }
        if self.end > source_len {
            return Err(CorpusError::SpanOutOfRange {
                line,
                start: self.start,
                end: self.end,
                len: source_len,
            });
        }
        if !valid_etype(&self.etype) {
            return Err(CorpusError::MalformedLine {
                line,
                reason: format!("bad edit type {:?}", self.etype),
            });
        }
        if self.etype.starts_with("U:") && !self.is_deletion() {
            return Err(CorpusError::MalformedLine {
                line,
                reason: format!("{} edit must delete tokens", self.etype),
            });
        }
        Ok(())
    }
}

/// `M:`/`R:`/`U:` plus one or two uppercase category parts, or a literal
/// `noop` / `UNK`.
pub fn valid_etype(s: &str) -> bool {
    if s == "noop" || s == "UNK" {
        return true;
    }
    let mut parts = s.split(':');
    if !matches!(parts.next(), Some("M" | "R" | "U")) {
        return false;
    }
    let upper = |p: &str| !p.is_empty() && p.chars().all(|c| c.is_ascii_uppercase());
    match (parts.next(), parts.next(), parts.next()) {
        (Some(a), None, _) => upper(a),
        (Some(a), Some(b), None) => upper(a) && upper(b),
        _ => false,
    }
}

/// A source token sequence plus its corrections, sorted by span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct M2Record {
    pub essay_id: String,
    pub source: TokenSeq,
    pub edits: Vec<Edit>,
}

impl M2Record {
    /// Validates spans, types, and per-annotator overlap, and sorts edits.
    pub fn new(essay_id: impl Into<String>, source: TokenSeq, mut edits: Vec<Edit>) -> CorpusResult<Self> {
        for e in &edits {
            e.check(0, source.len())?;
        }
        edits.sort_by_key(|e| (e.start, e.end, e.annotator));
        check_overlap(&edits)?;
        Ok(M2Record {
            essay_id: essay_id.into(),
            source,
            edits,
        })
    }

    /// The record as seen by a single annotator.
    pub fn for_annotator(&self, annotator: u32) -> M2Record {
        M2Record {
            essay_id: self.essay_id.clone(),
            source: self.source.clone(),
            edits: self
                .edits
                .iter()
                .filter(|e| e.annotator == annotator)
                .cloned()
                .collect(),
        }
    }

    pub fn annotators(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.edits.iter().map(|e| e.annotator).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// Same-annotator edits may not overlap; two insertions may not share a
/// position.
fn check_overlap(sorted: &[Edit]) -> CorpusResult<()> {
    for (i, a) in sorted.iter().enumerate() {
        for b in &sorted[i + 1..] {
            if b.annotator != a.annotator {
                continue;
            }
            let proper = a.start < b.end && b.start < a.end;
            let twin_insert = a.is_insertion() && b.is_insertion() && a.start == b.start;
            if proper || twin_insert {
                return Err(CorpusError::OverlapViolation {
                    annotator: a.annotator,
                    a_start: a.start,
                    a_end: a.end,
                    b_start: b.start,
                    b_end: b.end,
                });
            }
        }
    }
    Ok(())
}

/// Which text goes in the correction field of a serialized annotation line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Redaction {
    /// The corrected tokens, as annotated.
    Standard,
    /// The original (incorrect) tokens the span covers.
    ReplacedCorrected,
    /// Nothing: span and type only.
    NoLexical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct M2Format {
    pub redaction: Redaction,
    pub include_source: bool,
}

impl M2Format {
    pub fn standard() -> Self {
        M2Format {
            redaction: Redaction::Standard,
            include_source: false,
        }
    }

    pub fn replaced_corrected() -> Self {
        M2Format {
            redaction: Redaction::ReplacedCorrected,
            include_source: false,
        }
    }

    pub fn no_lexical() -> Self {
        M2Format {
            redaction: Redaction::NoLexical,
            include_source: false,
        }
    }

    pub fn with_source(mut self) -> Self {
        self.include_source = true;
        self
    }
}

/// Parse M² text into records. Records are separated by blank lines; a new
/// `S ` line also starts a new record. `noop` annotations (span `-1 -1`)
/// contribute no edit. Essay ids are the record index.
pub fn parse_m2(text: &str) -> CorpusResult<Vec<M2Record>> {
    let mut records: Vec<M2Record> = Vec::new();
    let mut source: Option<TokenSeq> = None;
    let mut edits: Vec<Edit> = Vec::new();

    let mut flush = |source: &mut Option<TokenSeq>, edits: &mut Vec<Edit>| -> CorpusResult<()> {
        if let Some(src) = source.take() {
            let rec = M2Record::new(records.len().to_string(), src, std::mem::take(edits))?;
            records.push(rec);
        }
        Ok(())
    };

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            flush(&mut source, &mut edits)?;
        } else if let Some(rest) = line.strip_prefix("S ") {
            flush(&mut source, &mut edits)?;
            source = Some(rest.split_whitespace().map(str::to_string).collect());
        } else if let Some(body) = line.strip_prefix("A ") {
            let Some(src) = &source else {
                return Err(CorpusError::MalformedLine {
                    line: lineno,
                    reason: "annotation before any source line".into(),
                });
            };
            if let Some(edit) = parse_annotation(body, lineno, src.len())? {
                edits.push(edit);
            }
        } else {
            return Err(CorpusError::MalformedLine {
                line: lineno,
                reason: "expected S line, A line, or blank".into(),
            });
        }
    }
    flush(&mut source, &mut edits)?;
    Ok(records)
}

fn parse_annotation(body: &str, line: usize, source_len: usize) -> CorpusResult<Option<Edit>> {
    let fields: Vec<&str> = body.split("|||").collect();
    if fields.len() != 6 {
        return Err(CorpusError::MalformedLine {
            line,
            reason: format!("expected 6 |||-separated fields, got {}", fields.len()),
        });
    }
    let mut span = fields[0].split_whitespace();
    let (start, end) = match (span.next(), span.next(), span.next()) {
        (Some(a), Some(b), None) => {
            let parse = |s: &str| {
                s.parse::<i64>().map_err(|_| CorpusError::MalformedLine {
                    line,
                    reason: format!("bad span number {s:?}"),
                })
            };
            (parse(a)?, parse(b)?)
        }
        _ => {
            return Err(CorpusError::MalformedLine {
                line,
                reason: "span must be two numbers".into(),
            })
        }
    };
    let etype = fields[1].trim();
    if etype == "noop" {
        if start == -1 && end == -1 {
            return Ok(None);
        }
        return Err(CorpusError::MalformedLine {
            line,
            reason: "noop annotation must have span -1 -1".into(),
        });
    }
    if start < 0 || end < 0 {
        return Err(CorpusError::MalformedLine {
            line,
            reason: "negative span on a non-noop annotation".into(),
        });
    }
    let replacement = match fields[2].trim() {
        "" | "-NONE-" => Vec::new(),
        text => text.split_whitespace().map(str::to_string).collect(),
    };
    let required = fields[3].trim() == "REQUIRED";
    let annotator = fields[5]
        .trim()
        .parse::<u32>()
        .map_err(|_| CorpusError::MalformedLine {
            line,
            reason: format!("bad annotator id {:?}", fields[5]),
        })?;
    let edit = Edit {
        start: start as usize,
        end: end as usize,
        replacement,
        etype: etype.to_string(),
        annotator,
        required,
    };
    edit.check(line, source_len)?;
    Ok(Some(edit))
}

/// Serialize one record. The source line appears only when the format asks
/// for it; a record with no edits and no source serializes to nothing.
pub fn serialize_m2(rec: &M2Record, fmt: M2Format) -> String {
    let mut out = String::new();
    if fmt.include_source {
        out.push_str("S ");
        out.push_str(&rec.source.join(" "));
        out.push('\n');
    }
    for e in &rec.edits {
        let correction = match fmt.redaction {
            Redaction::Standard => e.replacement.join(" "),
            Redaction::ReplacedCorrected => rec.source[e.start..e.end].join(" "),
            Redaction::NoLexical => String::new(),
        };
        let required = if e.required { "REQUIRED" } else { "OPTIONAL" };
        out.push_str(&format!(
            "A {} {}|||{}|||{}|||{}|||-NONE-|||{}\n",
            e.start, e.end, e.etype, correction, required, e.annotator
        ));
    }
    out
}

/// Serialize several records with blank-line separators.
pub fn serialize_m2_file(records: &[M2Record], fmt: M2Format) -> String {
    records
        .iter()
        .map(|r| serialize_m2(r, fmt))
        .filter(|block| !block.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;
    use proptest::prelude::*;

    fn edit(start: usize, end: usize, repl: &[&str], etype: &str) -> Edit {
        Edit {
            start,
            end,
            replacement: repl.iter().map(|s| s.to_string()).collect(),
            etype: etype.into(),
            annotator: 0,
            required: true,
        }
    }

    #[test]
    fn parses_single_record() {
        let text = "S Hello .\nA 0 1|||R:SPELL|||Hullo|||REQUIRED|||-NONE-|||0\n";
        let recs = parse_m2(text).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].source, vec!["Hello", "."]);
        assert_eq!(recs[0].edits.len(), 1);
        assert_eq!(recs[0].edits[0].replacement, vec!["Hullo"]);
    }

    #[test]
    fn source_only_record_has_no_edits() {
        let recs = parse_m2("S Hello .\n").unwrap();
        assert_eq!(recs.len(), 1);
        assert!(recs[0].edits.is_empty());
    }

    #[test]
    fn noop_yields_zero_edits() {
        let text = "S Hello .\nA -1 -1|||noop|||-NONE-|||REQUIRED|||-NONE-|||0\n";
        let recs = parse_m2(text).unwrap();
        assert_eq!(recs.len(), 1);
        assert!(recs[0].edits.is_empty());
    }

    #[test]
    fn tolerates_space_before_delimiter() {
        let spaced = "S a b\nA 0 1 |||R:NOUN|||c|||REQUIRED|||-NONE-|||0\n";
        let recs = parse_m2(spaced).unwrap();
        assert_eq!(recs[0].edits[0].start, 0);
        assert_eq!(recs[0].edits[0].end, 1);
    }

    #[test]
    fn span_out_of_range() {
        let text = "S one two\nA 1 3|||R:NOUN|||x|||REQUIRED|||-NONE-|||0\n";
        match parse_m2(text) {
            Err(CorpusError::SpanOutOfRange { line, end, len, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(end, 3);
                assert_eq!(len, 2);
            }
            other => panic!("expected span error, got {other:?}"),
        }
    }

    #[test]
    fn overlap_same_annotator_rejected() {
        let text = "S a b c d\n\
                    A 0 2|||R:NOUN|||x|||REQUIRED|||-NONE-|||0\n\
                    A 1 3|||R:NOUN|||y|||REQUIRED|||-NONE-|||0\n";
        assert!(matches!(
            parse_m2(text),
            Err(CorpusError::OverlapViolation { .. })
        ));
    }

    #[test]
    fn overlap_across_annotators_allowed() {
        let text = "S a b c d\n\
                    A 0 2|||R:NOUN|||x|||REQUIRED|||-NONE-|||0\n\
                    A 1 3|||R:NOUN|||y|||REQUIRED|||-NONE-|||1\n";
        let recs = parse_m2(text).unwrap();
        assert_eq!(recs[0].edits.len(), 2);
        assert_eq!(recs[0].annotators(), vec![0, 1]);
    }

    #[test]
    fn twin_insertions_same_position_rejected() {
        let text = "S a b\n\
                    A 1 1|||M:DET|||the|||REQUIRED|||-NONE-|||0\n\
                    A 1 1|||M:ADJ|||big|||REQUIRED|||-NONE-|||0\n";
        assert!(matches!(
            parse_m2(text),
            Err(CorpusError::OverlapViolation { .. })
        ));
    }

    #[test]
    fn insertions_at_distinct_positions_allowed() {
        let text = "S a b\n\
                    A 1 1|||M:DET|||the|||REQUIRED|||-NONE-|||0\n\
                    A 2 2|||M:PUNCT|||.|||REQUIRED|||-NONE-|||0\n";
        assert!(parse_m2(text).is_ok());
    }

    #[test]
    fn unnecessary_must_delete() {
        let text = "S a b\nA 0 1|||U:DET|||the|||REQUIRED|||-NONE-|||0\n";
        assert!(matches!(
            parse_m2(text),
            Err(CorpusError::MalformedLine { .. })
        ));
    }

    #[test]
    fn etype_grammar() {
        for ok in ["R:SPELL", "M:DET", "U:PRON", "R:VERB:TENSE", "noop", "UNK"] {
            assert!(valid_etype(ok), "{ok}");
        }
        for bad in ["X:SPELL", "R:", "R:spell", "R:VERB:TENSE:X", "", "R", ":R"] {
            assert!(!valid_etype(bad), "{bad}");
        }
    }

    #[test]
    fn redaction_variants() {
        let rec = M2Record::new(
            "e",
            tokenize("I can liste to music"),
            vec![edit(2, 3, &["listen"], "R:SPELL")],
        )
        .unwrap();
        assert_eq!(
            serialize_m2(&rec, M2Format::standard()),
            "A 2 3|||R:SPELL|||listen|||REQUIRED|||-NONE-|||0\n"
        );
        assert_eq!(
            serialize_m2(&rec, M2Format::replaced_corrected()),
            "A 2 3|||R:SPELL|||liste|||REQUIRED|||-NONE-|||0\n"
        );
        assert_eq!(
            serialize_m2(&rec, M2Format::no_lexical()),
            "A 2 3|||R:SPELL||||||REQUIRED|||-NONE-|||0\n"
        );
    }

    #[test]
    fn replaced_corrected_insertion_is_empty() {
        let rec = M2Record::new("e", tokenize("cat sat"), vec![edit(0, 0, &["the"], "M:DET")]).unwrap();
        assert_eq!(
            serialize_m2(&rec, M2Format::replaced_corrected()),
            "A 0 0|||M:DET||||||REQUIRED|||-NONE-|||0\n"
        );
    }

    #[test]
    fn zero_edit_record_serializes_empty_without_source() {
        let rec = M2Record::new("e", tokenize("fine text"), vec![]).unwrap();
        for fmt in [
            M2Format::standard(),
            M2Format::replaced_corrected(),
            M2Format::no_lexical(),
        ] {
            assert_eq!(serialize_m2(&rec, fmt), "");
        }
        assert_eq!(
            serialize_m2(&rec, M2Format::standard().with_source()),
            "S fine text\n"
        );
    }

    #[test]
    fn file_round_trip() {
        let text = "S Hello .\n\
                    A 0 1|||R:SPELL|||Hullo|||REQUIRED|||-NONE-|||0\n\
                    \n\
                    S a b c\n\
                    A 0 1|||U:DET||||||REQUIRED|||-NONE-|||0\n\
                    A 2 2|||M:PUNCT|||.|||OPTIONAL|||-NONE-|||1\n";
        let recs = parse_m2(text).unwrap();
        let out = serialize_m2_file(&recs, M2Format::standard().with_source());
        assert_eq!(out, text);
        assert_eq!(parse_m2(&out).unwrap(), recs);
    }

    prop_compose! {
        fn arb_record()(n in 1usize..30)(
            source in proptest::collection::vec("[a-z]{1,6}", n..n + 1),
            picks in proptest::collection::vec((0usize..3, proptest::collection::vec("[a-z]{1,5}", 0..3)), 0..6),
            n in Just(n),
        ) -> M2Record {
            let mut edits = Vec::new();
            let mut cursor = 0usize;
            for (gap, repl) in picks {
                let start = cursor + gap;
                if start >= n { break; }
                let end = (start + 1).min(n);
                let etype = if repl.is_empty() { "U:DET" } else { "R:NOUN" };
                edits.push(Edit {
                    start,
                    end,
                    replacement: repl,
                    etype: etype.into(),
                    annotator: 0,
                    required: true,
                });
                cursor = end + 1;
            }
            M2Record::new("p", source, edits).unwrap()
        }
    }

    proptest! {
        #[test]
        fn serialize_parse_identity(rec in arb_record()) {
            let text = serialize_m2(&rec, M2Format::standard().with_source());
            let parsed = parse_m2(&text).unwrap();
            prop_assert_eq!(parsed.len(), 1);
            prop_assert_eq!(&parsed[0].source, &rec.source);
            prop_assert_eq!(&parsed[0].edits, &rec.edits);
        }
    }
}
