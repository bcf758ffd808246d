//! Lenient parser for model-emitted location lists.
//!
//! The expected answer is a fenced code block of newline-separated entries in
//! one of three shapes:
//!
//! ```text
//! path/to/file.py
//! path/to/file.py: Qualified.name
//! path/to/file.py: line 42
//! ```
//!
//! Anything outside fences is ignored (whole text is used when no fence is
//! present), bullets and numbering are stripped, and unparseable lines are
//! returned as rejects rather than failing the parse.

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RawTarget {
    File { path: String },
    Element { path: String, name: String },
    Line { path: String, line: usize },
}

impl RawTarget {
    pub fn path(&self) -> &str {
        match self {
            RawTarget::File { path } => path,
            RawTarget::Element { path, .. } => path,
            RawTarget::Line { path, .. } => path,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RejectedLine {
    pub raw: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedTargets {
    pub targets: Vec<RawTarget>,
    pub rejected: Vec<RejectedLine>,
}

pub fn parse_targets(text: &str) -> ParsedTargets {
    let mut parsed = ParsedTargets::default();
    for line in candidate_lines(text) {
        let stripped = strip_list_markup(line);
        if stripped.is_empty() {
            continue;
        }
        match parse_line(stripped) {
            Some(target) => parsed.targets.push(target),
            None => parsed.rejected.push(RejectedLine {
                raw: line.to_string(),
                reason: "does not match any location form".to_string(),
            }),
        }
    }
    parsed
}

/// Lines inside fenced blocks, or every line when the text has no fence.
fn candidate_lines(text: &str) -> Vec<&str> {
    let mut fenced = Vec::new();
    let mut inside = false;
    for line in text.lines() {
        if line.trim_start().starts_with("```") {
            inside = !inside;
            continue;
        }
        if inside {
            fenced.push(line);
        }
    }
    if fenced.is_empty() {
        text.lines().collect()
    } else {
        fenced
    }
}

fn strip_list_markup(line: &str) -> &str {
    let mut s = line.trim();
    for prefix in ["- ", "* ", "+ "] {
        if let Some(rest) = s.strip_prefix(prefix) {
            s = rest.trim_start();
        }
    }
    if let Some(dot) = s.find(". ") {
        if s[..dot].chars().all(|c| c.is_ascii_digit()) && !s[..dot].is_empty() {
            s = s[dot + 2..].trim_start();
        }
    }
    s.trim_matches('`').trim()
}

fn parse_line(line: &str) -> Option<RawTarget> {
    match line.split_once(':') {
        None => {
            if looks_like_path(line) {
                Some(RawTarget::File {
                    path: line.to_string(),
                })
            } else {
                None
            }
        }
        Some((head, rest)) => {
            let path = head.trim();
            let rest = rest.trim();
            if !looks_like_path(path) || rest.is_empty() {
                return None;
            }
            if let Some(line_no) = parse_line_form(rest) {
                return Some(RawTarget::Line {
                    path: path.to_string(),
                    line: line_no,
                });
            }
            let name = strip_name_markup(rest);
            if looks_like_qualified_name(name) {
                Some(RawTarget::Element {
                    path: path.to_string(),
                    name: name.to_string(),
                })
            } else {
                None
            }
        }
    }
}

/// `line 42`, `Line 42`, or `line: 42` after the path colon.
fn parse_line_form(rest: &str) -> Option<usize> {
    let lower = rest.to_ascii_lowercase();
    let tail = lower.strip_prefix("line")?;
    let tail = tail.trim_start_matches(':').trim();
    if tail.is_empty() || !tail.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let n = tail.parse().ok()?;
    if n == 0 {
        None
    } else {
        Some(n)
    }
}

/// Drops a leading `class`/`function`/`method` tag and trailing call parens.
fn strip_name_markup(rest: &str) -> &str {
    let mut s = rest;
    for tag in ["class", "function", "method", "def"] {
        if let Some(tail) = s.strip_prefix(tag) {
            if let Some(tail) = tail.strip_prefix(':').or_else(|| tail.strip_prefix(' ')) {
                s = tail.trim();
                break;
            }
        }
    }
    s.strip_suffix("()").unwrap_or(s).trim()
}

fn looks_like_path(s: &str) -> bool {
    !s.is_empty() && !s.contains(char::is_whitespace) && !s.contains("```")
}

fn looks_like_qualified_name(s: &str) -> bool {
    !s.is_empty()
        && s.split('.').all(|part| {
            !part.is_empty()
                && part
                    .chars()
                    .all(|c| c.is_alphanumeric() || c == '_')
                && !part.chars().next().unwrap().is_ascii_digit()
        })
}
