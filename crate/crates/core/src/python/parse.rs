//! Thin wrapper around the Python grammar plus byte-offset/line conversion.

use rustpython_parser::ast;
use rustpython_parser::text_size::{TextRange, TextSize};
use rustpython_parser::Parse;

#[derive(Debug, Clone, thiserror::Error)]
#[error("{path}:{line}: {message}")]
pub struct ParseFailure {
    pub path: String,
    pub line: usize,
    pub message: String,
}

/// Parses a module, mapping grammar errors to a line-addressed failure.
pub fn parse_module(source: &str, path: &str) -> Result<ast::Suite, ParseFailure> {
    ast::Suite::parse(source, path).map_err(|e| {
        let line = LineIndex::new(source).line_of(e.offset);
        ParseFailure {
            path: path.to_string(),
            line,
            message: e.error.to_string(),
        }
    })
}

/// Whether the text is a syntactically valid module.
pub fn check_syntax(source: &str) -> bool {
    ast::Suite::parse(source, "<syntax-check>").is_ok()
}

/// Byte-offset to 1-based line number conversion for one source text.
#[derive(Debug, Clone)]
pub struct LineIndex {
    /// Byte offset of the start of each line; first entry is always 0.
    starts: Vec<usize>,
    len: usize,
}

impl LineIndex {
    pub fn new(source: &str) -> Self {
        let mut starts = vec![0];
        for (i, b) in source.bytes().enumerate() {
            if b == b'\n' {
                starts.push(i + 1);
            }
        }
        LineIndex {
            starts,
            len: source.len(),
        }
    }

    /// 1-based line containing the byte offset. Offsets at or past the end of
    /// the text map to the last line.
    pub fn line_of(&self, offset: TextSize) -> usize {
        let offset = usize::from(offset).min(self.len);
        match self.starts.binary_search(&offset) {
            Ok(i) => i + 1,
            Err(i) => i,
        }
    }

    /// 1-based line of the first byte of a range.
    pub fn first_line(&self, range: TextRange) -> usize {
        self.line_of(range.start())
    }

    /// 1-based line of the last byte of a range. Ranges are end-exclusive, so
    /// the answer is the line of `end - 1` (clamped for empty ranges).
    pub fn last_line(&self, range: TextRange) -> usize {
        let end = usize::from(range.end());
        let start = usize::from(range.start());
        if end <= start {
            return self.line_of(range.start());
        }
        self.line_of(TextSize::new((end - 1) as u32))
    }

    /// Byte offset where the given 1-based line starts.
    pub fn line_start(&self, line: usize) -> Option<usize> {
        self.starts.get(line.checked_sub(1)?).copied()
    }

    pub fn line_count(&self) -> usize {
        if self.len == 0 {
            0
        } else if self.starts.last() == Some(&self.len) {
            self.starts.len() - 1
        } else {
            self.starts.len()
        }
    }
}

/// Extracts the inclusive 1-based line span `[start, end]` from a text,
/// preserving bytes exactly. Returns `None` when the span exceeds the file.
pub fn line_span<'a>(source: &'a str, index: &LineIndex, start: usize, end: usize) -> Option<&'a str> {
    if start == 0 || end < start || end > index.line_count().max(1) {
        return None;
    }
    let begin = index.line_start(start)?;
    let finish = match index.line_start(end + 1) {
        Some(next) => next,
        None => source.len(),
    };
    if end > index.line_count() {
        return None;
    }
    Some(&source[begin..finish])
}

/// Prefixes each line of `text` with its absolute 1-based line number,
/// starting at `first_line`.
pub fn annotate_line_numbers(text: &str, first_line: usize) -> String {
    let mut out = String::with_capacity(text.len() + text.len() / 8);
    for (i, line) in text.split_inclusive('\n').enumerate() {
        out.push_str(&format!("{}|", first_line + i));
        out.push_str(line);
    }
    if !out.ends_with('\n') {
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_check() {
        assert!(parse_module("x = 1\n", "m.py").is_ok());
        assert!(check_syntax("def f():\n    return 1\n"));
        let err = parse_module("def f(:\n", "m.py").unwrap_err();
        assert_eq!(err.path, "m.py");
        assert_eq!(err.line, 1);
    }

    #[test]
    fn line_index_maps_offsets() {
        let src = "ab\ncd\n\nef";
        let idx = LineIndex::new(src);
        assert_eq!(idx.line_count(), 4);
        assert_eq!(idx.line_of(TextSize::new(0)), 1);
        assert_eq!(idx.line_of(TextSize::new(2)), 1);
        assert_eq!(idx.line_of(TextSize::new(3)), 2);
        assert_eq!(idx.line_of(TextSize::new(6)), 3);
        assert_eq!(idx.line_of(TextSize::new(7)), 4);
        assert_eq!(idx.line_of(TextSize::new(99)), 4);
        assert_eq!(idx.line_start(2), Some(3));
    }

    #[test]
    fn line_span_is_byte_exact() {
        let src = "one\ntwo\nthree\n";
        let idx = LineIndex::new(src);
        assert_eq!(line_span(src, &idx, 2, 3), Some("two\nthree\n"));
        assert_eq!(line_span(src, &idx, 1, 3), Some(src));
        assert_eq!(line_span(src, &idx, 3, 4), None);
        assert_eq!(line_span(src, &idx, 0, 1), None);
    }

    #[test]
    fn annotate_numbers_every_line() {
        assert_eq!(annotate_line_numbers("a\nb", 5), "5|a\n6|b\n");
        assert_eq!(annotate_line_numbers("a\n", 1), "1|a\n");
    }
}
