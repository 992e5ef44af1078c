use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{tokenize, tokenize_spans, CorpusError, CorpusResult, Edit, M2Record, TokenSeq};

/// One inline error span: `<NS type="CODE">wrong|correct</NS>`.
///
/// Either side may be empty (insertion or deletion, respectively); content
/// without a `|` counts as a wrong side with no correction. `char_offset` is
/// the span's position in the stripped learner text, in characters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClcAnnotation {
    pub code: String,
    pub wrong: Option<String>,
    pub correct: Option<String>,
    pub char_offset: usize,
}

/// Maps raw error codes to type categories. Unmapped codes pass through
/// unchanged; the `M:`/`R:`/`U:` prefix always comes from which sides the
/// annotation has.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ClcTypeMap {
    pub categories: HashMap<String, String>,
}

impl ClcTypeMap {
    /// Loads a `{"CODE": "CATEGORY"}` JSON object.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        Ok(ClcTypeMap {
            categories: serde_json::from_str(text)?,
        })
    }

    pub fn etype(&self, code: &str, has_wrong: bool, has_correct: bool) -> String {
        let category = self.categories.get(code).map(String::as_str).unwrap_or(code);
        let prefix = match (has_wrong, has_correct) {
            (_, false) => "U",
            (true, true) => "R",
            (false, true) => "M",
        };
        format!("{prefix}:{category}")
    }
}

/// Strips `<NS>` markup, returning the learner text (wrong sides kept in
/// place) and the annotations found.
pub fn parse_clc_spans(text: &str) -> CorpusResult<(String, Vec<ClcAnnotation>)> {
    let char_at = |byte: usize| text[..byte].chars().count();
    let mut plain = String::new();
    let mut plain_chars = 0usize;
    let mut anns = Vec::new();
    let mut rest = text;
    loop {
        let base = text.len() - rest.len();
        let open = rest.find("<NS");
        if let Some(close) = rest.find("</NS>") {
            if open.map_or(true, |o| close < o) {
                return Err(CorpusError::UnbalancedTag {
                    offset: char_at(base + close),
                });
            }
        }
        let Some(open) = open else {
            plain.push_str(rest);
            break;
        };
        let seg = &rest[..open];
        plain.push_str(seg);
        plain_chars += seg.chars().count();

        let tag_offset = char_at(base + open);
        let after_open = &rest[open..];
        let Some(tag_len) = after_open.find('>') else {
            return Err(CorpusError::UnbalancedTag { offset: tag_offset });
        };
        let code = after_open[..tag_len]
            .strip_prefix("<NS")
            .map(str::trim)
            .and_then(|a| a.strip_prefix("type=\""))
            .and_then(|a| a.strip_suffix('"'))
            .ok_or(CorpusError::UnbalancedTag { offset: tag_offset })?;

        let content_rest = &after_open[tag_len + 1..];
        let Some(close) = content_rest.find("</NS>") else {
            return Err(CorpusError::UnbalancedTag { offset: tag_offset });
        };
        let content = &content_rest[..close];
        if content.contains("<NS") {
            return Err(CorpusError::NestedAnnotation { offset: tag_offset });
        }
        let (wrong, correct) = match content.find('|') {
            Some(p) => (&content[..p], Some(&content[p + 1..])),
            None => (content, None),
        };
        if wrong.is_empty() && correct.map_or(true, str::is_empty) {
            return Err(CorpusError::UnbalancedTag { offset: tag_offset });
        }
        anns.push(ClcAnnotation {
            code: code.to_string(),
            wrong: (!wrong.is_empty()).then(|| wrong.to_string()),
            correct: correct.filter(|c| !c.is_empty()).map(str::to_string),
            char_offset: plain_chars,
        });
        plain.push_str(wrong);
        plain_chars += wrong.chars().count();
        rest = &content_rest[close + "</NS>".len()..];
    }
    Ok((plain, anns))
}

/// Converts inline markup to an annotated record: the learner text becomes
/// the source, each span an edit over the tokens it covers.
pub fn parse_clc_xml(essay_id: &str, text: &str, map: &ClcTypeMap) -> CorpusResult<M2Record> {
    let (plain, anns) = parse_clc_spans(text)?;
    let spans = tokenize_spans(&plain);
    let tokens: TokenSeq = spans.iter().map(|&(a, b)| plain[a..b].to_string()).collect();
    let mut char_to_byte: Vec<usize> = plain.char_indices().map(|(b, _)| b).collect();
    char_to_byte.push(plain.len());

    let mut edits = Vec::new();
    for ann in &anns {
        let wrong = ann.wrong.as_deref().unwrap_or("");
        let wb_start = char_to_byte[ann.char_offset];
        let wb_end = char_to_byte[ann.char_offset + wrong.chars().count()];
        let (start, end) = if wb_start == wb_end {
            let pos = spans
                .iter()
                .position(|&(a, _)| a >= wb_start)
                .unwrap_or(spans.len());
            (pos, pos)
        } else {
            let start = spans
                .iter()
                .position(|&(_, b)| b > wb_start)
                .unwrap_or(spans.len());
            let end = spans
                .iter()
                .rposition(|&(a, _)| a < wb_end)
                .map_or(start, |i| i + 1);
            (start, end.max(start))
        };
        edits.push(Edit {
            start,
            end,
            replacement: tokenize(ann.correct.as_deref().unwrap_or("")),
            etype: map.etype(&ann.code, ann.wrong.is_some(), ann.correct.is_some()),
            annotator: 0,
            required: true,
        });
    }
    M2Record::new(essay_id, tokens, edits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replacement_span() {
        let rec = parse_clc_xml(
            "e",
            "I am looking forward to <NS type=\"FV\">hear|hearing</NS> from you.",
            &ClcTypeMap::default(),
        )
        .unwrap();
        assert_eq!(
            rec.source,
            vec!["I", "am", "looking", "forward", "to", "hear", "from", "you", "."]
        );
        assert_eq!(rec.edits.len(), 1);
        let e = &rec.edits[0];
        assert_eq!((e.start, e.end), (5, 6));
        assert_eq!(e.replacement, vec!["hearing"]);
        assert_eq!(e.etype, "R:FV");
    }

    #[test]
    fn insertion_span() {
        let rec = parse_clc_xml("e", "<NS type=\"MD\">|the</NS> cat sat", &ClcTypeMap::default()).unwrap();
        assert_eq!(rec.source, vec!["cat", "sat"]);
        let e = &rec.edits[0];
        assert_eq!((e.start, e.end), (0, 0));
        assert_eq!(e.replacement, vec!["the"]);
        assert_eq!(e.etype, "M:MD");
    }

    #[test]
    fn deletion_span() {
        let rec = parse_clc_xml("e", "I like <NS type=\"UD\">the|</NS> music", &ClcTypeMap::default()).unwrap();
        assert_eq!(rec.source, vec!["I", "like", "the", "music"]);
        let e = &rec.edits[0];
        assert_eq!((e.start, e.end), (2, 3));
        assert!(e.replacement.is_empty());
        assert_eq!(e.etype, "U:UD");
    }

    #[test]
    fn no_pipe_is_wrong_only() {
        let rec = parse_clc_xml("e", "a <NS type=\"X\">bad</NS> day", &ClcTypeMap::default()).unwrap();
        let e = &rec.edits[0];
        assert_eq!((e.start, e.end), (1, 2));
        assert_eq!(e.etype, "U:X");
    }

    #[test]
    fn span_covering_attached_punctuation() {
        let rec = parse_clc_xml("e", "Write <NS type=\"RP\">soon.|soon!</NS>", &ClcTypeMap::default()).unwrap();
        assert_eq!(rec.source, vec!["Write", "soon", "."]);
        let e = &rec.edits[0];
        assert_eq!((e.start, e.end), (1, 3));
        assert_eq!(e.replacement, vec!["soon", "!"]);
    }

    #[test]
    fn category_mapping() {
        let map = ClcTypeMap::from_json(r#"{"FV": "VERB:FORM"}"#).unwrap();
        let rec = parse_clc_xml("e", "to <NS type=\"FV\">hear|hearing</NS>", &map).unwrap();
        assert_eq!(rec.edits[0].etype, "R:VERB:FORM");
    }

    #[test]
    fn multiple_spans_keep_offsets() {
        let (plain, anns) = parse_clc_spans(
            "He <NS type=\"FV\">go|goes</NS> to <NS type=\"MD\">|the</NS> park.",
        )
        .unwrap();
        assert_eq!(plain, "He go to  park.");
        assert_eq!(anns.len(), 2);
        assert_eq!(anns[0].char_offset, 3);
        assert_eq!(anns[1].char_offset, 9);
        assert_eq!(anns[1].wrong, None);
    }

    #[test]
    fn unbalanced_tags() {
        assert!(matches!(
            parse_clc_spans("a <NS type=\"X\">b|c"),
            Err(CorpusError::UnbalancedTag { .. })
        ));
        assert!(matches!(
            parse_clc_spans("a </NS> b"),
            Err(CorpusError::UnbalancedTag { offset: 2 })
        ));
    }

    #[test]
    fn nested_rejected() {
        assert!(matches!(
            parse_clc_spans("<NS type=\"A\">x <NS type=\"B\">y|z</NS>|w</NS>"),
            Err(CorpusError::NestedAnnotation { offset: 0 })
        ));
    }
}
