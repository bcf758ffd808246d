//! Unified diff rendering, parsing, and strict positional application.

use std::collections::BTreeMap;

use crate::diffs::myers::{diff_ops, LineOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineTag {
    Context,
    Del,
    Add,
}

/// One diff body line. `content` keeps its trailing newline; a missing one
/// marks the final line of a file that does not end with a newline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HunkLine {
    pub tag: LineTag,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hunk {
    pub old_start: usize,
    pub old_count: usize,
    pub new_start: usize,
    pub new_count: usize,
    pub lines: Vec<HunkLine>,
}

/// Diff of one file. Paths keep their rendered prefixes (`a/x.py`, `b/x.py`,
/// or `/dev/null` for creations and deletions).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileDiff {
    pub old_path: String,
    pub new_path: String,
    pub hunks: Vec<Hunk>,
}

impl FileDiff {
    /// Repository-relative path this diff applies to, prefix stripped.
    pub fn target_path(&self) -> &str {
        let path = if self.new_path == "/dev/null" {
            &self.old_path
        } else {
            &self.new_path
        };
        strip_prefix(path)
    }

    pub fn is_creation(&self) -> bool {
        self.old_path == "/dev/null"
    }

    pub fn is_deletion(&self) -> bool {
        self.new_path == "/dev/null"
    }
}

fn strip_prefix(path: &str) -> &str {
    path.strip_prefix("a/")
        .or_else(|| path.strip_prefix("b/"))
        .unwrap_or(path)
}

/// Splits text into lines that keep their trailing newline; the final line
/// may lack one.
pub fn split_keep(text: &str) -> Vec<&str> {
    text.split_inclusive('\n').collect()
}

#[derive(Debug, Clone, thiserror::Error)]
#[error("diff line {line_number}: {message}")]
pub struct DiffParseError {
    pub line_number: usize,
    pub message: String,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum ApplyError {
    #[error("diff targets {0}, which is not in the file set")]
    MissingFile(String),
    #[error("{path}:{line}: patch context mismatch: expected {expected:?}, found {found:?}")]
    ContextMismatch {
        path: String,
        line: usize,
        expected: String,
        found: String,
    },
    #[error("{0}: hunks overlap or run past end of file")]
    Overlap(String),
    #[error("creation target {0} already exists")]
    AlreadyExists(String),
}

/// Renders the diff of one changed file with `--- a/` / `+++ b/` headers, or
/// `None` when old and new are byte-identical.
pub fn render_file_diff(path: &str, old: &str, new: &str, context: usize) -> Option<String> {
    let diff = diff_file(path, old, new, context)?;
    Some(render(&diff))
}

/// Structured diff of one file, `None` when unchanged.
pub fn diff_file(path: &str, old: &str, new: &str, context: usize) -> Option<FileDiff> {
    if old == new {
        return None;
    }
    let a = split_keep(old);
    let b = split_keep(new);
    let ops = diff_ops(&a, &b);
    let hunks = build_hunks(&a, &b, &ops, context);
    if hunks.is_empty() {
        return None;
    }
    Some(FileDiff {
        old_path: format!("a/{path}"),
        new_path: format!("b/{path}"),
        hunks,
    })
}

/// Concatenated per-file diffs of two file maps, in path order. Paths present
/// on one side only render as creations or deletions.
pub fn render_file_map_diff(
    old: &BTreeMap<String, String>,
    new: &BTreeMap<String, String>,
    context: usize,
) -> String {
    let mut out = String::new();
    let paths: std::collections::BTreeSet<&String> = old.keys().chain(new.keys()).collect();
    for path in paths {
        let old_text = old.get(path.as_str()).map(|s| s.as_str());
        let new_text = new.get(path.as_str()).map(|s| s.as_str());
        let diff = match (old_text, new_text) {
            (Some(o), Some(n)) => diff_file(path, o, n, context),
            (Some(o), None) => diff_file(path, o, "", context).map(|mut d| {
                d.new_path = "/dev/null".to_string();
                d
            }),
            (None, Some(n)) => diff_file(path, "", n, context).map(|mut d| {
                d.old_path = "/dev/null".to_string();
                d
            }),
            (None, None) => None,
        };
        if let Some(d) = diff {
            out.push_str(&render(&d));
        }
    }
    out
}

fn build_hunks(a: &[&str], b: &[&str], ops: &[LineOp], context: usize) -> Vec<Hunk> {
    let is_keep = |op: &LineOp| matches!(op, LineOp::Keep { .. });
    let mut blocks: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < ops.len() {
        if is_keep(&ops[i]) {
            i += 1;
            continue;
        }
        let start = i;
        while i < ops.len() && !is_keep(&ops[i]) {
            i += 1;
        }
        match blocks.last_mut() {
            Some((_, prev_end)) if start - *prev_end <= 2 * context => *prev_end = i,
            _ => blocks.push((start, i)),
        }
    }

    let mut a_pos_at = vec![0usize; ops.len() + 1];
    let mut b_pos_at = vec![0usize; ops.len() + 1];
    for (idx, op) in ops.iter().enumerate() {
        a_pos_at[idx + 1] = a_pos_at[idx]
            + match op {
                LineOp::Keep { .. } | LineOp::Del { .. } => 1,
                LineOp::Ins { .. } => 0,
            };
        b_pos_at[idx + 1] = b_pos_at[idx]
            + match op {
                LineOp::Keep { .. } | LineOp::Ins { .. } => 1,
                LineOp::Del { .. } => 0,
            };
    }

    let mut hunks = Vec::with_capacity(blocks.len());
    for (start, end) in blocks {
        let h0 = start.saturating_sub(context);
        let h1 = (end + context).min(ops.len());
        let mut lines = Vec::with_capacity(h1 - h0);
        let mut old_count = 0;
        let mut new_count = 0;
        for op in &ops[h0..h1] {
            match op {
                LineOp::Keep { a: i, .. } => {
                    old_count += 1;
                    new_count += 1;
                    lines.push(HunkLine {
                        tag: LineTag::Context,
                        content: a[*i].to_string(),
                    });
                }
                LineOp::Del { a: i } => {
                    old_count += 1;
                    lines.push(HunkLine {
                        tag: LineTag::Del,
                        content: a[*i].to_string(),
                    });
                }
                LineOp::Ins { b: j } => {
                    new_count += 1;
                    lines.push(HunkLine {
                        tag: LineTag::Add,
                        content: b[*j].to_string(),
                    });
                }
            }
        }
        let a_at = a_pos_at[h0];
        let b_at = b_pos_at[h0];
        hunks.push(Hunk {
            old_start: if old_count > 0 { a_at + 1 } else { a_at },
            old_count,
            new_start: if new_count > 0 { b_at + 1 } else { b_at },
            new_count,
            lines,
        });
    }
    hunks
}

/// Renders a structured diff back to text.
pub fn render(diff: &FileDiff) -> String {
    let mut out = String::new();
    out.push_str(&format!("--- {}\n+++ {}\n", diff.old_path, diff.new_path));
    for h in &diff.hunks {
        out.push_str(&format!(
            "@@ -{},{} +{},{} @@\n",
            h.old_start, h.old_count, h.new_start, h.new_count
        ));
        for line in &h.lines {
            let tag = match line.tag {
                LineTag::Context => ' ',
                LineTag::Del => '-',
                LineTag::Add => '+',
            };
            out.push(tag);
            match line.content.strip_suffix('\n') {
                Some(body) => {
                    out.push_str(body);
                    out.push('\n');
                }
                None => {
                    out.push_str(&line.content);
                    out.push_str("\n\\ No newline at end of file\n");
                }
            }
        }
    }
    out
}

/// Parses unified diff text, tolerating `diff --git` and metadata lines.
pub fn parse_unified(text: &str) -> Result<Vec<FileDiff>, DiffParseError> {
    let mut diffs: Vec<FileDiff> = Vec::new();
    let mut lines = text.split('\n').enumerate().peekable();
    let err = |n: usize, m: &str| DiffParseError {
        line_number: n + 1,
        message: m.to_string(),
    };
    while let Some((n, line)) = lines.next() {
        if let Some(old_path) = line.strip_prefix("--- ") {
            let Some((n2, next)) = lines.next() else {
                return Err(err(n, "missing +++ line after ---"));
            };
            let Some(new_path) = next.strip_prefix("+++ ") else {
                return Err(err(n2, "expected +++ line"));
            };
            diffs.push(FileDiff {
                old_path: trim_path(old_path),
                new_path: trim_path(new_path),
                hunks: Vec::new(),
            });
            continue;
        }
        if line.starts_with("@@ ") {
            let current = diffs
                .last_mut()
                .ok_or_else(|| err(n, "hunk header before file header"))?;
            let mut hunk = parse_hunk_header(line).ok_or_else(|| err(n, "malformed hunk header"))?;
            let mut old_left = hunk.old_count;
            let mut new_left = hunk.new_count;
            while old_left > 0 || new_left > 0 {
                let Some((n3, body)) = lines.next() else {
                    return Err(err(n, "truncated hunk"));
                };
                let (tag, rest) = match body.chars().next() {
                    Some(' ') => (LineTag::Context, &body[1..]),
                    Some('+') => (LineTag::Add, &body[1..]),
                    Some('-') => (LineTag::Del, &body[1..]),
                    None => (LineTag::Context, ""),
                    Some('\\') => {
                        strip_last_newline(&mut hunk)?;
                        continue;
                    }
                    Some(_) => return Err(err(n3, "unexpected line inside hunk")),
                };
                match tag {
                    LineTag::Context => {
                        old_left = old_left
                            .checked_sub(1)
                            .ok_or_else(|| err(n3, "hunk longer than header counts"))?;
                        new_left = new_left
                            .checked_sub(1)
                            .ok_or_else(|| err(n3, "hunk longer than header counts"))?;
                    }
                    LineTag::Del => {
                        old_left = old_left
                            .checked_sub(1)
                            .ok_or_else(|| err(n3, "hunk longer than header counts"))?;
                    }
                    LineTag::Add => {
                        new_left = new_left
                            .checked_sub(1)
                            .ok_or_else(|| err(n3, "hunk longer than header counts"))?;
                    }
                }
                hunk.lines.push(HunkLine {
                    tag,
                    content: format!("{rest}\n"),
                });
            }
            if let Some(&(_, peek)) = lines.peek() {
                if peek.starts_with('\\') {
                    lines.next();
                    strip_last_newline(&mut hunk)?;
                }
            }
            current.hunks.push(hunk);
        }
        // Any other line (diff --git, index, mode changes, prose) is skipped.
    }
    Ok(diffs)
}

fn strip_last_newline(hunk: &mut Hunk) -> Result<(), DiffParseError> {
    let last = hunk.lines.last_mut().ok_or(DiffParseError {
        line_number: 0,
        message: "no-newline marker before any hunk line".to_string(),
    })?;
    if let Some(stripped) = last.content.strip_suffix('\n') {
        last.content = stripped.to_string();
    }
    Ok(())
}

fn trim_path(raw: &str) -> String {
    let raw = raw.split('\t').next().unwrap_or(raw);
    raw.trim_end().to_string()
}

fn parse_hunk_header(line: &str) -> Option<Hunk> {
    let rest = line.strip_prefix("@@ -")?;
    let (old_part, rest) = rest.split_once(" +")?;
    let (new_part, _) = rest.split_once(" @@")?;
    let parse_pair = |part: &str| -> Option<(usize, usize)> {
        match part.split_once(',') {
            Some((s, c)) => Some((s.parse().ok()?, c.parse().ok()?)),
            None => Some((part.parse().ok()?, 1)),
        }
    };
    let (old_start, old_count) = parse_pair(old_part)?;
    let (new_start, new_count) = parse_pair(new_part)?;
    Some(Hunk {
        old_start,
        old_count,
        new_start,
        new_count,
        lines: Vec::new(),
    })
}

/// Applies parsed diffs to a file map, strictly: every context and deletion
/// line must match the target at its stated position.
pub fn apply_unified(
    files: &BTreeMap<String, String>,
    diffs: &[FileDiff],
) -> Result<BTreeMap<String, String>, ApplyError> {
    let mut out = files.clone();
    for diff in diffs {
        let path = diff.target_path().to_string();
        if diff.is_creation() {
            if out.contains_key(&path) {
                return Err(ApplyError::AlreadyExists(path));
            }
            let built = apply_hunks(&path, "", &diff.hunks)?;
            out.insert(path, built);
            continue;
        }
        let old = out
            .get(&path)
            .ok_or_else(|| ApplyError::MissingFile(path.clone()))?
            .clone();
        if diff.is_deletion() {
            out.remove(&path);
            continue;
        }
        let patched = apply_hunks(&path, &old, &diff.hunks)?;
        out.insert(path, patched);
    }
    Ok(out)
}

fn apply_hunks(path: &str, old: &str, hunks: &[Hunk]) -> Result<String, ApplyError> {
    let a = split_keep(old);
    let mut out = String::with_capacity(old.len());
    let mut cursor = 0usize;
    for h in hunks {
        let anchor = if h.old_count > 0 {
            h.old_start.checked_sub(1).ok_or_else(|| ApplyError::Overlap(path.to_string()))?
        } else {
            h.old_start
        };
        if anchor < cursor || anchor > a.len() {
            return Err(ApplyError::Overlap(path.to_string()));
        }
        for line in &a[cursor..anchor] {
            out.push_str(line);
        }
        cursor = anchor;
        for line in &h.lines {
            match line.tag {
                LineTag::Add => out.push_str(&line.content),
                LineTag::Context | LineTag::Del => {
                    let found = a.get(cursor).copied().unwrap_or("<end of file>");
                    if !line_matches(&line.content, found) {
                        return Err(ApplyError::ContextMismatch {
                            path: path.to_string(),
                            line: cursor + 1,
                            expected: line.content.clone(),
                            found: found.to_string(),
                        });
                    }
                    if line.tag == LineTag::Context {
                        out.push_str(found);
                    }
                    cursor += 1;
                }
            }
        }
    }
    if cursor > a.len() {
        return Err(ApplyError::Overlap(path.to_string()));
    }
    for line in &a[cursor..] {
        out.push_str(line);
    }
    Ok(out)
}

/// A diff line matches the file line when their bodies agree; the diff side
/// may lack the trailing newline the file has (no-newline markers only state
/// the absence on the file side).
fn line_matches(expected: &str, found: &str) -> bool {
    expected == found || expected.strip_suffix('\n') == Some(found)
}
