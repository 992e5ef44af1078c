use super::TokenSeq;

const TERMINALS: &[char] = &['.', ',', '!', '?', ';', ':'];

/// Byte ranges of the tokens of `text`, in order.
///
/// Words are split on whitespace, then any run of terminal punctuation
/// (`. , ! ? ; :`) at the end of a word is peeled off, one token per mark.
/// Other punctuation stays attached wherever it appears.
pub fn tokenize_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut word_start: Option<usize> = None;
    let bytes_len = text.len();
    for (i, ch) in text.char_indices() {
        if ch.is_whitespace() {
            if let Some(start) = word_start.take() {
                push_word(text, start, i, &mut spans);
            }
        } else if word_start.is_none() {
            word_start = Some(i);
        }
    }
    if let Some(start) = word_start {
        push_word(text, start, bytes_len, &mut spans);
    }
    spans
}

fn push_word(text: &str, start: usize, end: usize, spans: &mut Vec<(usize, usize)>) {
    let word = &text[start..end];
    let mut head_end = end;
    let mut tail = Vec::new();
    for (i, ch) in word.char_indices().rev() {
        if TERMINALS.contains(&ch) {
            head_end = start + i;
            tail.push((start + i, start + i + ch.len_utf8()));
        } else {
            break;
        }
    }
    if head_end > start {
        spans.push((start, head_end));
    }
    tail.reverse();
    spans.extend(tail);
}

/// Split `text` into tokens; idempotent on already-tokenized text.
pub fn tokenize(text: &str) -> TokenSeq {
    tokenize_spans(text)
        .into_iter()
        .map(|(a, b)| text[a..b].to_string())
        .collect()
}

/// Joins tokens with single spaces.
pub fn detokenize(tokens: &[String]) -> String {
    tokens.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn splits_terminal_punctuation() {
        assert_eq!(tokenize("Write soon."), vec!["Write", "soon", "."]);
        assert_eq!(tokenize("Hello Mike,"), vec!["Hello", "Mike", ","]);
        assert_eq!(tokenize("what?!"), vec!["what", "?", "!"]);
        assert_eq!(tokenize("well;"), vec!["well", ";"]);
    }

    #[test]
    fn keeps_internal_punctuation() {
        assert_eq!(tokenize("don't stop"), vec!["don't", "stop"]);
        assert_eq!(tokenize("e.g. this"), vec!["e.g", ".", "this"]);
        assert_eq!(tokenize("(hello)"), vec!["(hello)"]);
    }

    #[test]
    fn bare_punctuation_words() {
        assert_eq!(tokenize("a . ."), vec!["a", ".", "."]);
        assert_eq!(tokenize("..."), vec![".", ".", "."]);
    }

    #[test]
    fn empty_and_whitespace() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  \n\t ").is_empty());
    }

    #[test]
    fn spans_cover_tokens() {
        let text = "Hello Mike, bye.";
        for (a, b) in tokenize_spans(text) {
            assert!(a < b);
            assert!(!text[a..b].chars().any(char::is_whitespace));
        }
    }

    #[test]
    fn known_essay_indices() {
        let text = "Hello Mike, I bought a mobile phone, I like it because I can liste to \
                    music and I can see funny videos. It is expensive but it is good and it \
                    is black. Write soon.";
        let toks = tokenize(text);
        assert_eq!(toks[15], "liste");
        assert_eq!(toks[21], "see");
        assert_eq!(toks[26], "is");
        assert_eq!(toks.len(), 40);
    }

    proptest! {
        #[test]
        fn idempotent_on_tokenized_text(words in proptest::collection::vec("[a-zA-Z,.!?;:'()-]{1,8}", 0..20)) {
            let first = tokenize(&words.join(" "));
            let second = tokenize(&detokenize(&first));
            prop_assert_eq!(first, second);
        }

        #[test]
        fn tokens_nonempty_no_whitespace(text in "[ a-zA-Z,.!?;:'\n-]{0,80}") {
            for t in tokenize(&text) {
                prop_assert!(!t.is_empty());
                prop_assert!(!t.chars().any(char::is_whitespace));
            }
        }
    }
}
