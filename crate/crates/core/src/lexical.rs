//! Quote-aware scanning shared by the normalizer and the tokenizer.
//!
//! LAMMPS treats text between single or double quotes as one argument and
//! protects `#` and `$` inside it. Everything here works on byte offsets of
//! ASCII delimiters, so slicing at the returned positions is always valid.

/// Tracks whether a scan position sits inside a quoted run.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct QuoteState {
    open: Option<u8>,
}

impl QuoteState {
    /// Feed one byte; returns true when the byte is outside any quote
    /// (quote delimiters themselves count as quoted).
    pub(crate) fn step(&mut self, b: u8) -> bool {
        match self.open {
            Some(q) => {
                if b == q {
                    self.open = None;
                }
                false
            }
            None => {
                if b == b'"' || b == b'\'' {
                    self.open = Some(b);
                    false
                } else {
                    true
                }
            }
        }
    }

    pub(crate) fn is_open(&self) -> bool {
        self.open.is_some()
    }
}

/// Byte offset of the first unquoted `#`, if any.
pub(crate) fn unquoted_hash(text: &str) -> Option<usize> {
    let mut state = QuoteState::default();
    text.bytes().enumerate().find(|&(_, b)| state.step(b) && b == b'#').map(|(i, _)| i)
}

/// True when `text` contains `needle` outside of quotes.
pub(crate) fn contains_unquoted(text: &str, needle: u8) -> bool {
    let mut state = QuoteState::default();
    text.bytes().any(|b| state.step(b) && b == needle)
}

/// A whitespace-delimited word with its byte range in the source line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Word<'a> {
    pub text: &'a str,
    pub start: usize,
    pub end: usize,
}

/// Split on unquoted whitespace. Quotes stay attached to their word.
/// The boolean reports an unterminated quote at end of line.
pub(crate) fn split_words(text: &str) -> (Vec<Word<'_>>, bool) {
    let bytes = text.as_bytes();
    let mut words = Vec::new();
    let mut state = QuoteState::default();
    let mut start: Option<usize> = None;
    for (i, &b) in bytes.iter().enumerate() {
        let was_open = state.is_open();
        state.step(b);
        let is_space = !was_open && b.is_ascii_whitespace();
        match (start, is_space) {
            (None, false) => start = Some(i),
            (Some(s), true) => {
                words.push(Word { text: &text[s..i], start: s, end: i });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        words.push(Word { text: &text[s..], start: s, end: text.len() });
    }
    (words, state.is_open())
}

/// First whitespace-delimited word, ignoring quotes.
pub(crate) fn first_word(text: &str) -> Option<&str> {
    text.split_whitespace().next()
}

/// Strip one layer of matching surrounding quotes.
pub(crate) fn unquote(text: &str) -> &str {
    let b = text.as_bytes();
    if b.len() >= 2 && (b[0] == b'"' || b[0] == b'\'') && b[b.len() - 1] == b[0] {
        &text[1..text.len() - 1]
    } else {
        text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_inside_quotes_is_protected() {
        assert_eq!(unquoted_hash("print \"a # b\" # c"), Some(14));
        assert_eq!(unquoted_hash("dump_modify 1 format '%d # x'"), None);
    }

    #[test]
    fn words_keep_quoted_runs_together() {
        let (w, open) = split_words("velocity all create 600 87287 dist \"gaussian\"");
        assert!(!open);
        assert_eq!(w.len(), 7);
        assert_eq!(w[6].text, "\"gaussian\"");
        let (w, _) = split_words("fix 1 all print 10 \"a b  c\" screen no");
        assert_eq!(w[5].text, "\"a b  c\"");
        assert_eq!((w[5].start, w[5].end), (19, 27));
    }

    #[test]
    fn unterminated_quote_is_reported() {
        let (_, open) = split_words("print \"oops");
        assert!(open);
    }
}
