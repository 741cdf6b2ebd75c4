use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fragment length in characters; roughly five minutes of speech.
pub const DEFAULT_FRAGMENT_LEN: usize = 5000;

const MIN_FRAGMENT_LEN: usize = 1000;

/// Half-open range of character (not byte) positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharSpan {
    pub start: usize,
    pub end: usize,
}

impl CharSpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// Cuts `text` into consecutive spans of exactly `target_len` characters;
/// the final span keeps whatever remains.
pub fn fragment_transcript(text: &str, target_len: usize) -> Result<Vec<CharSpan>> {
    if target_len < MIN_FRAGMENT_LEN {
        return Err(Error::Config(format!("fragment length {target_len} is below the minimum of {MIN_FRAGMENT_LEN}")));
    }
    let total = text.chars().count();
    if total == 0 {
        return Err(Error::Empty("transcript text"));
    }
    Ok((0..total).step_by(target_len).map(|start| CharSpan { start, end: (start + target_len).min(total) }).collect())
}

/// The substring covered by a character span.
pub fn slice_chars(text: &str, span: CharSpan) -> &str {
    let mut indices = text.char_indices().map(|(i, _)| i).chain(std::iter::once(text.len()));
    let start = indices.nth(span.start).unwrap_or(text.len());
    let end = if span.is_empty() { start } else { indices.nth(span.len() - 1).unwrap_or(text.len()) };
    &text[start..end]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spans(v: &[(usize, usize)]) -> Vec<CharSpan> {
        v.iter().map(|&(start, end)| CharSpan { start, end }).collect()
    }

    #[test]
    fn remainder_is_kept() {
        let text = "a".repeat(12_345);
        assert_eq!(fragment_transcript(&text, 5000).unwrap(), spans(&[(0, 5000), (5000, 10_000), (10_000, 12_345)]));
    }

    #[test]
    fn exact_and_short_texts_are_one_span() {
        assert_eq!(fragment_transcript(&"b".repeat(5000), 5000).unwrap(), spans(&[(0, 5000)]));
        assert_eq!(fragment_transcript(&"b".repeat(4999), 5000).unwrap(), spans(&[(0, 4999)]));
    }

    #[test]
    fn empty_text_errors() {
        assert!(matches!(fragment_transcript("", 5000), Err(Error::Empty(_))));
    }

    #[test]
    fn tiny_target_rejected() {
        assert!(fragment_transcript("abc", 999).is_err());
    }

    #[test]
    fn counts_characters_not_bytes() {
        let text = "é".repeat(1500);
        let parts = fragment_transcript(&text, 1000).unwrap();
        assert_eq!(parts, spans(&[(0, 1000), (1000, 1500)]));
        assert_eq!(slice_chars(&text, parts[1]).chars().count(), 500);
    }

    proptest! {
        #[test]
        fn spans_reassemble_text(text in "[a-zé∑ \\n]{1,4000}", len in 1000usize..2500) {
            let parts = fragment_transcript(&text, len).unwrap();
            let joined: String = parts.iter().map(|&s| slice_chars(&text, s)).collect();
            prop_assert_eq!(joined, text.clone());
            for pair in parts.windows(2) {
                prop_assert_eq!(pair[0].end, pair[1].start);
                prop_assert_eq!(pair[0].len(), len);
            }
        }
    }
}
