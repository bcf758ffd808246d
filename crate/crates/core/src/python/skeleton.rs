//! Compressed per-file outline: declaration headers, class fields, method
//! signatures, and module/class-level comments. Bodies never appear.

use rustpython_parser::ast::{self, Ranged, Stmt};
use rustpython_parser::lexer;
use rustpython_parser::{Mode, Tok};
use serde::{Deserialize, Serialize};

use crate::python::parse::{parse_module, LineIndex, ParseFailure};
use crate::snapshot::RepoSnapshot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SkeletonKind {
    Class,
    Function,
    Method,
    Field,
    Comment,
}

/// One outline entry. For classes, functions, and methods `header_text` is
/// the verbatim source slice from the `def`/`class`/`async` keyword through
/// the colon that closes the signature; fields keep their first physical
/// line; comments keep the block text without indentation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkeletonEntry {
    pub kind: SkeletonKind,
    pub header_text: String,
    pub start_line: usize,
    pub end_line: usize,
    pub children: Vec<SkeletonEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileSkeleton {
    pub path: String,
    pub entries: Vec<SkeletonEntry>,
}

impl FileSkeleton {
    /// Flattened (kind, header_text) pairs, the fidelity surface checked
    /// against an independent parser.
    pub fn declaration_set(&self) -> Vec<(SkeletonKind, String)> {
        fn collect(entries: &[SkeletonEntry], out: &mut Vec<(SkeletonKind, String)>) {
            for e in entries {
                out.push((e.kind, e.header_text.clone()));
                collect(&e.children, out);
            }
        }
        let mut out = Vec::new();
        collect(&self.entries, &mut out);
        out.sort();
        out
    }
}

/// Byte offset of the colon terminating a `def`/`class` header, scanning from
/// `start`. Tracks bracket depth and skips string literals and comments, so
/// colons inside annotations, defaults, lambdas, and f-strings are ignored.
fn scan_header_colon(source: &str, start: usize) -> Option<usize> {
    let bytes = source.as_bytes();
    let mut i = start;
    let mut depth: i32 = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b'(' | b'[' | b'{' => {
                depth += 1;
                i += 1;
            }
            b')' | b']' | b'}' => {
                depth -= 1;
                i += 1;
            }
            b'#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'\'' | b'"' => {
                i = skip_string(bytes, i);
            }
            b':' if depth == 0 => return Some(i),
            _ => i += 1,
        }
    }
    None
}

/// Advances past a string literal starting at the opening quote.
fn skip_string(bytes: &[u8], start: usize) -> usize {
    let quote = bytes[start];
    let triple = bytes.len() >= start + 3 && bytes[start + 1] == quote && bytes[start + 2] == quote;
    let mut i = start + if triple { 3 } else { 1 };
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 2,
            b'\n' if !triple => return i,
            q if q == quote => {
                if !triple {
                    return i + 1;
                }
                if bytes.len() >= i + 3 && bytes[i + 1] == quote && bytes[i + 2] == quote {
                    return i + 3;
                }
                i += 1;
            }
            _ => i += 1,
        }
    }
    i
}

#[derive(Debug)]
struct CommentBlock {
    start_line: usize,
    end_line: usize,
    text: String,
    consumed: bool,
}

/// Full-line comment blocks: consecutive lines whose only content is a
/// comment, grouped while adjacent. Trailing inline comments are skipped.
fn comment_blocks(source: &str, index: &LineIndex) -> Vec<CommentBlock> {
    let mut blocks: Vec<CommentBlock> = Vec::new();
    for item in lexer::lex(source, Mode::Module) {
        let Ok((tok, range)) = item else { break };
        let Tok::Comment(text) = tok else { continue };
        let line = index.line_of(range.start());
        let line_start = index.line_start(line).unwrap_or(0);
        let prefix = &source[line_start..usize::from(range.start())];
        if !prefix.trim().is_empty() {
            continue;
        }
        match blocks.last_mut() {
            Some(b) if b.end_line + 1 == line => {
                b.end_line = line;
                b.text.push('\n');
                b.text.push_str(&text);
            }
            _ => blocks.push(CommentBlock {
                start_line: line,
                end_line: line,
                text,
                consumed: false,
            }),
        }
    }
    blocks
}

struct Builder<'a> {
    source: &'a str,
    index: &'a LineIndex,
}

/// An entry plus the line a preceding comment must touch to attach to it
/// (first decorator line for decorated declarations).
struct Placed {
    entry: SkeletonEntry,
    attach_line: usize,
}

impl Builder<'_> {
    fn header_slice(&self, stmt: &Stmt) -> String {
        let start = usize::from(stmt.range().start());
        match scan_header_colon(self.source, start) {
            Some(colon) => self.source[start..=colon].to_string(),
            None => self.source[start..usize::from(stmt.range().end()).min(self.source.len())]
                .lines()
                .next()
                .unwrap_or_default()
                .to_string(),
        }
    }

    fn attach_line(&self, stmt: &Stmt, decorators: &[ast::Expr]) -> usize {
        decorators
            .first()
            .map(|d| self.index.first_line(d.range()))
            .unwrap_or_else(|| self.index.first_line(stmt.range()))
    }

    fn field_entry(&self, stmt: &Stmt) -> SkeletonEntry {
        let start = self.index.first_line(stmt.range());
        let line_begin = self.index.line_start(start).unwrap_or(0);
        let line_text = self.source[line_begin..]
            .lines()
            .next()
            .unwrap_or_default()
            .trim_start()
            .trim_end();
        SkeletonEntry {
            kind: SkeletonKind::Field,
            header_text: line_text.to_string(),
            start_line: start,
            end_line: self.index.last_line(stmt.range()),
            children: Vec::new(),
        }
    }

    fn def_entry(&self, stmt: &Stmt, kind: SkeletonKind, body: &[Stmt], in_class: bool) -> SkeletonEntry {
        let children = if kind == SkeletonKind::Class {
            self.walk(body, true)
                .into_iter()
                .map(|p| p.entry)
                .collect()
        } else {
            Vec::new()
        };
        let _ = in_class;
        SkeletonEntry {
            kind,
            header_text: self.header_slice(stmt),
            start_line: self.index.first_line(stmt.range()),
            end_line: self.index.last_line(stmt.range()),
            children,
        }
    }

    /// Collects declaration entries from a statement list. `in_class` decides
    /// whether functions become methods and whether assignments are fields.
    /// Control-flow statements are descended (import-guard declarations stay
    /// visible) without contributing entries themselves.
    fn walk(&self, body: &[Stmt], in_class: bool) -> Vec<Placed> {
        let mut out = Vec::new();
        for stmt in body {
            match stmt {
                Stmt::FunctionDef(ast::StmtFunctionDef {
                    body,
                    decorator_list,
                    ..
                })
                | Stmt::AsyncFunctionDef(ast::StmtAsyncFunctionDef {
                    body,
                    decorator_list,
                    ..
                }) => {
                    let kind = if in_class {
                        SkeletonKind::Method
                    } else {
                        SkeletonKind::Function
                    };
                    out.push(Placed {
                        entry: self.def_entry(stmt, kind, body, in_class),
                        attach_line: self.attach_line(stmt, decorator_list),
                    });
                }
                Stmt::ClassDef(ast::StmtClassDef {
                    body,
                    decorator_list,
                    ..
                }) => {
                    out.push(Placed {
                        entry: self.def_entry(stmt, SkeletonKind::Class, body, in_class),
                        attach_line: self.attach_line(stmt, decorator_list),
                    });
                }
                Stmt::Assign(ast::StmtAssign { targets, .. }) => {
                    if let [ast::Expr::Name(_)] = targets.as_slice() {
                        out.push(Placed {
                            attach_line: self.index.first_line(stmt.range()),
                            entry: self.field_entry(stmt),
                        });
                    }
                }
                Stmt::AnnAssign(ast::StmtAnnAssign { target, .. }) => {
                    if matches!(target.as_ref(), ast::Expr::Name(_)) {
                        out.push(Placed {
                            attach_line: self.index.first_line(stmt.range()),
                            entry: self.field_entry(stmt),
                        });
                    }
                }
                Stmt::If(ast::StmtIf { body, orelse, .. })
                | Stmt::While(ast::StmtWhile { body, orelse, .. })
                | Stmt::For(ast::StmtFor { body, orelse, .. })
                | Stmt::AsyncFor(ast::StmtAsyncFor { body, orelse, .. }) => {
                    out.extend(self.walk_defs_only(body, in_class));
                    out.extend(self.walk_defs_only(orelse, in_class));
                }
                Stmt::With(ast::StmtWith { body, .. })
                | Stmt::AsyncWith(ast::StmtAsyncWith { body, .. }) => {
                    out.extend(self.walk_defs_only(body, in_class));
                }
                Stmt::Try(ast::StmtTry {
                    body,
                    handlers,
                    orelse,
                    finalbody,
                    ..
                })
                | Stmt::TryStar(ast::StmtTryStar {
                    body,
                    handlers,
                    orelse,
                    finalbody,
                    ..
                }) => {
                    out.extend(self.walk_defs_only(body, in_class));
                    for h in handlers {
                        let ast::ExceptHandler::ExceptHandler(h) = h;
                        out.extend(self.walk_defs_only(&h.body, in_class));
                    }
                    out.extend(self.walk_defs_only(orelse, in_class));
                    out.extend(self.walk_defs_only(finalbody, in_class));
                }
                _ => {}
            }
        }
        out
    }

    /// Like `walk` but only class/function declarations survive: assignments
    /// under control flow are mutations, not declarations.
    fn walk_defs_only(&self, body: &[Stmt], in_class: bool) -> Vec<Placed> {
        self.walk(body, in_class)
            .into_iter()
            .filter(|p| p.entry.kind != SkeletonKind::Field)
            .collect()
    }
}

/// Builds the outline of one parseable source file.
pub fn build_skeleton(snapshot: &RepoSnapshot, path: &str) -> Result<FileSkeleton, ParseFailure> {
    let source = snapshot.text(path).ok_or_else(|| ParseFailure {
        path: path.to_string(),
        line: 0,
        message: "not a text file in snapshot".to_string(),
    })?;
    let suite = parse_module(source, path)?;
    let index = LineIndex::new(source);
    let builder = Builder {
        source,
        index: &index,
    };
    let placed = builder.walk(&suite, false);
    let mut blocks = comment_blocks(source, &index);

    let first_stmt_line = suite
        .first()
        .map(|s| index.first_line(s.range()))
        .unwrap_or(usize::MAX);
    let mut entries: Vec<SkeletonEntry> = Vec::new();
    for b in blocks.iter_mut().filter(|b| b.end_line < first_stmt_line) {
        b.consumed = true;
        entries.push(SkeletonEntry {
            kind: SkeletonKind::Comment,
            header_text: b.text.clone(),
            start_line: b.start_line,
            end_line: b.end_line,
            children: Vec::new(),
        });
    }
    attach_comments(placed, &mut blocks, &mut entries);
    entries.sort_by_key(|e| e.start_line);
    Ok(FileSkeleton {
        path: path.to_string(),
        entries,
    })
}

/// Interleaves retained comment blocks with declaration entries: a block
/// whose last line sits directly above a declaration (or its decorators) is
/// kept, recursively inside classes.
fn attach_comments(placed: Vec<Placed>, blocks: &mut Vec<CommentBlock>, out: &mut Vec<SkeletonEntry>) {
    for p in placed {
        if let Some(b) = blocks
            .iter_mut()
            .find(|b| !b.consumed && b.end_line + 1 == p.attach_line)
        {
            b.consumed = true;
            out.push(SkeletonEntry {
                kind: SkeletonKind::Comment,
                header_text: b.text.clone(),
                start_line: b.start_line,
                end_line: b.end_line,
                children: Vec::new(),
            });
        }
        let mut entry = p.entry;
        if entry.kind == SkeletonKind::Class {
            let children = std::mem::take(&mut entry.children);
            let placed_children: Vec<Placed> = children
                .into_iter()
                .map(|c| Placed {
                    attach_line: c.start_line,
                    entry: c,
                })
                .collect();
            let mut rebuilt = Vec::new();
            attach_comments(placed_children, blocks, &mut rebuilt);
            rebuilt.sort_by_key(|e| e.start_line);
            entry.children = rebuilt;
        }
        out.push(entry);
    }
}

fn render_entry(entry: &SkeletonEntry, depth: usize, out: &mut String) {
    let indent = "    ".repeat(depth);
    match entry.kind {
        SkeletonKind::Comment => {
            for line in entry.header_text.lines() {
                out.push_str(&indent);
                out.push_str(line);
                out.push('\n');
            }
        }
        SkeletonKind::Field => {
            out.push_str(&indent);
            out.push_str(&entry.header_text);
            out.push('\n');
        }
        SkeletonKind::Function | SkeletonKind::Method => {
            push_header(&entry.header_text, &indent, out);
            out.push_str(&indent);
            out.push_str("    ...\n");
        }
        SkeletonKind::Class => {
            push_header(&entry.header_text, &indent, out);
            if entry.children.is_empty() {
                out.push_str(&indent);
                out.push_str("    ...\n");
            } else {
                for child in &entry.children {
                    render_entry(child, depth + 1, out);
                }
            }
        }
    }
}

fn push_header(header: &str, indent: &str, out: &mut String) {
    for (i, line) in header.lines().enumerate() {
        if i == 0 {
            out.push_str(indent);
        }
        out.push_str(line);
        out.push('\n');
    }
}

/// Renders the outline as prompt text: four-space indentation per nesting
/// level, function bodies shown as `...`, one blank line between top-level
/// entries (none after a comment, which belongs to what follows).
pub fn render_skeleton(skeleton: &FileSkeleton) -> String {
    let mut out = String::new();
    let mut prev_was_comment = false;
    for (i, entry) in skeleton.entries.iter().enumerate() {
        if i > 0 && !prev_was_comment {
            out.push('\n');
        }
        render_entry(entry, 0, &mut out);
        prev_was_comment = entry.kind == SkeletonKind::Comment;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn skeleton(src: &str) -> FileSkeleton {
        let snap = RepoSnapshot::from_files("t", [("m.py", src)]);
        build_skeleton(&snap, "m.py").unwrap()
    }

    #[test]
    fn empty_file_has_no_entries() {
        assert!(skeleton("").entries.is_empty());
    }

    #[test]
    fn single_function_keeps_signature_only() {
        let src = "\
def add(a, b):
    total = a + b
    # inner comment
    return total
";
        let sk = skeleton(src);
        assert_eq!(sk.entries.len(), 1);
        let e = &sk.entries[0];
        assert_eq!(e.kind, SkeletonKind::Function);
        assert_eq!(e.header_text, "def add(a, b):");
        assert_eq!((e.start_line, e.end_line), (1, 4));
        let rendered = render_skeleton(&sk);
        assert!(!rendered.contains("total"));
        assert!(!rendered.contains("inner comment"));
    }

    #[test]
    fn class_nests_fields_and_methods() {
        let src = "\
# module note
VERSION = '1.0'


class Account:
    # balance is in cents
    balance = 0
    owner: str

    def deposit(self, amount):
        self.balance += amount
        return self.balance

    async def close(self):
        pass
";
        let sk = skeleton(src);
        let kinds: Vec<SkeletonKind> = sk.entries.iter().map(|e| e.kind).collect();
        assert_eq!(
            kinds,
            vec![SkeletonKind::Comment, SkeletonKind::Field, SkeletonKind::Class]
        );
        let class = &sk.entries[2];
        let child_kinds: Vec<SkeletonKind> = class.children.iter().map(|e| e.kind).collect();
        assert_eq!(
            child_kinds,
            vec![
                SkeletonKind::Comment,
                SkeletonKind::Field,
                SkeletonKind::Field,
                SkeletonKind::Method,
                SkeletonKind::Method,
            ]
        );
        assert_eq!(class.children[3].header_text, "def deposit(self, amount):");
        assert_eq!(class.children[4].header_text, "async def close(self):");
        let rendered = render_skeleton(&sk);
        let expected = "\
# module note
VERSION = '1.0'

class Account:
    # balance is in cents
    balance = 0
    owner: str
    def deposit(self, amount):
        ...
    async def close(self):
        ...
";
        assert_eq!(rendered, expected);
    }

    #[test]
    fn multiline_signature_with_tricky_colons() {
        let src = "\
def lookup(
    table: dict[str, int],
    default=lambda: {'a': 1},
) -> dict[str, int]:
    return table
";
        let sk = skeleton(src);
        let header = &sk.entries[0].header_text;
        assert!(header.starts_with("def lookup("));
        assert!(header.ends_with(") -> dict[str, int]:"));
        assert_eq!(header.lines().count(), 4);
    }

    #[test]
    fn comment_attaches_over_decorator() {
        let src = "\
import functools

# cached for speed
@functools.cache
def slow():
    pass
";
        let sk = skeleton(src);
        let kinds: Vec<SkeletonKind> = sk.entries.iter().map(|e| e.kind).collect();
        assert_eq!(kinds, vec![SkeletonKind::Comment, SkeletonKind::Function]);
        assert_eq!(sk.entries[0].header_text, "# cached for speed");
    }

    #[test]
    fn unattached_and_inline_comments_dropped() {
        let src = "\
x = 1

# floating note, blank line below

y = 2  # trailing comment

def f():
    pass
";
        let sk = skeleton(src);
        let comments: Vec<&SkeletonEntry> = sk
            .entries
            .iter()
            .filter(|e| e.kind == SkeletonKind::Comment)
            .collect();
        assert!(comments.is_empty(), "got {comments:?}");
        assert_eq!(sk.entries[1].header_text, "y = 2  # trailing comment");
    }

    #[test]
    fn guarded_declarations_stay_visible() {
        let src = "\
try:
    import fast_json as json
except ImportError:
    import json


def parse(s):
    return json.loads(s)


if True:
    def fallback():
        pass
";
        let sk = skeleton(src);
        let names: Vec<&str> = sk.entries.iter().map(|e| e.header_text.as_str()).collect();
        assert_eq!(names, vec!["def parse(s):", "def fallback():"]);
    }

    #[test]
    fn destructuring_assignment_is_not_a_field() {
        let sk = skeleton("a, b = 1, 2\nc = 3\n");
        assert_eq!(sk.entries.len(), 1);
        assert_eq!(sk.entries[0].header_text, "c = 3");
    }
}
