//! Declaration index: every class, function, and method in a file with its
//! qualified name and line span.

use rustpython_parser::ast::{self, Ranged, Stmt};
use serde::{Deserialize, Serialize};

use crate::python::parse::{annotate_line_numbers, line_span, parse_module, LineIndex, ParseFailure};
use crate::snapshot::RepoSnapshot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Class,
    Function,
    Method,
}

/// One declaration. `qualified_name` joins enclosing class/function names
/// with dots (`Outer.method.inner`); control-flow nesting adds no component.
/// The span starts at the `def`/`class` keyword (decorators excluded) and is
/// inclusive on both ends.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeElement {
    pub path: String,
    pub qualified_name: String,
    pub kind: ElementKind,
    pub start_line: usize,
    pub end_line: usize,
}

impl CodeElement {
    pub fn contains_line(&self, line: usize) -> bool {
        self.start_line <= line && line <= self.end_line
    }

    pub fn contains_span(&self, start: usize, end: usize) -> bool {
        self.start_line <= start && end <= self.end_line
    }

    pub fn line_count(&self) -> usize {
        self.end_line - self.start_line + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scope {
    Class,
    Function,
}

struct Walker<'a> {
    path: &'a str,
    index: &'a LineIndex,
    scopes: Vec<(Scope, String)>,
    out: Vec<CodeElement>,
}

impl Walker<'_> {
    fn qualified(&self, name: &str) -> String {
        if self.scopes.is_empty() {
            name.to_string()
        } else {
            let mut q = self
                .scopes
                .iter()
                .map(|(_, n)| n.as_str())
                .collect::<Vec<_>>()
                .join(".");
            q.push('.');
            q.push_str(name);
            q
        }
    }

    fn record(&mut self, name: &str, scope: Scope, stmt: &Stmt, body: &[Stmt]) {
        let kind = match scope {
            Scope::Class => ElementKind::Class,
            Scope::Function => match self.scopes.last() {
                Some((Scope::Class, _)) => ElementKind::Method,
                _ => ElementKind::Function,
            },
        };
        self.out.push(CodeElement {
            path: self.path.to_string(),
            qualified_name: self.qualified(name),
            kind,
            start_line: self.index.first_line(stmt.range()),
            end_line: self.index.last_line(stmt.range()),
        });
        self.scopes.push((scope, name.to_string()));
        self.walk(body);
        self.scopes.pop();
    }

    fn walk(&mut self, body: &[Stmt]) {
        for stmt in body {
            match stmt {
                Stmt::FunctionDef(ast::StmtFunctionDef { name, body, .. })
                | Stmt::AsyncFunctionDef(ast::StmtAsyncFunctionDef { name, body, .. }) => {
                    self.record(name.as_str(), Scope::Function, stmt, body);
                }
                Stmt::ClassDef(ast::StmtClassDef { name, body, .. }) => {
                    self.record(name.as_str(), Scope::Class, stmt, body);
                }
                Stmt::If(ast::StmtIf { body, orelse, .. })
                | Stmt::While(ast::StmtWhile { body, orelse, .. })
                | Stmt::For(ast::StmtFor { body, orelse, .. })
                | Stmt::AsyncFor(ast::StmtAsyncFor { body, orelse, .. }) => {
                    self.walk(body);
                    self.walk(orelse);
                }
                Stmt::With(ast::StmtWith { body, .. })
                | Stmt::AsyncWith(ast::StmtAsyncWith { body, .. }) => self.walk(body),
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
                    self.walk(body);
                    for h in handlers {
                        let ast::ExceptHandler::ExceptHandler(h) = h;
                        self.walk(&h.body);
                    }
                    self.walk(orelse);
                    self.walk(finalbody);
                }
                Stmt::Match(ast::StmtMatch { cases, .. }) => {
                    for case in cases {
                        self.walk(&case.body);
                    }
                }
                _ => {}
            }
        }
    }
}

/// All declarations of one file in source order.
pub fn list_elements(snapshot: &RepoSnapshot, path: &str) -> Result<Vec<CodeElement>, ParseFailure> {
    let source = snapshot.text(path).ok_or_else(|| ParseFailure {
        path: path.to_string(),
        line: 0,
        message: "not a text file in snapshot".to_string(),
    })?;
    let suite = parse_module(source, path)?;
    let index = LineIndex::new(source);
    let mut walker = Walker {
        path,
        index: &index,
        scopes: Vec::new(),
        out: Vec::new(),
    };
    walker.walk(&suite);
    Ok(walker.out)
}

/// Name lookup over one file's declarations. Duplicate qualified names (two
/// `def f` at the same level) are all retained and returned together.
#[derive(Debug, Clone)]
pub struct ElementIndex {
    elements: Vec<CodeElement>,
}

impl ElementIndex {
    pub fn build(snapshot: &RepoSnapshot, path: &str) -> Result<Self, ParseFailure> {
        Ok(ElementIndex {
            elements: list_elements(snapshot, path)?,
        })
    }

    pub fn from_elements(elements: Vec<CodeElement>) -> Self {
        ElementIndex { elements }
    }

    pub fn elements(&self) -> &[CodeElement] {
        &self.elements
    }

    /// Elements matching a model-provided name. Exact qualified-name matches
    /// win; otherwise any element whose qualified name ends with `.{name}`
    /// matches, so `method_b` finds `ClassA.method_b`.
    pub fn resolve(&self, name: &str) -> Vec<&CodeElement> {
        let exact: Vec<&CodeElement> = self
            .elements
            .iter()
            .filter(|e| e.qualified_name == name)
            .collect();
        if !exact.is_empty() {
            return exact;
        }
        let suffix = format!(".{name}");
        self.elements
            .iter()
            .filter(|e| e.qualified_name.ends_with(&suffix))
            .collect()
    }

    /// Innermost element whose span contains the line, if any.
    pub fn enclosing(&self, line: usize) -> Option<&CodeElement> {
        self.elements
            .iter()
            .filter(|e| e.contains_line(line))
            .min_by_key(|e| e.line_count())
    }
}

/// Exact source of one element, each line prefixed with its absolute line
/// number. None if the file is missing or the span is out of range.
pub fn element_source(snapshot: &RepoSnapshot, element: &CodeElement) -> Option<String> {
    let source = snapshot.text(&element.path)?;
    let index = LineIndex::new(source);
    let span = line_span(source, &index, element.start_line, element.end_line)?;
    Some(annotate_line_numbers(span, element.start_line))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn elements(src: &str) -> Vec<CodeElement> {
        let snap = RepoSnapshot::from_files("t", [("m.py", src)]);
        list_elements(&snap, "m.py").unwrap()
    }

    #[test]
    fn nested_function_in_method() {
        let src = "\
class A:
    def m(self):
        def inner():
            pass
        return inner
";
        let got = elements(src);
        let names: Vec<(&str, ElementKind)> = got
            .iter()
            .map(|e| (e.qualified_name.as_str(), e.kind))
            .collect();
        assert_eq!(
            names,
            vec![
                ("A", ElementKind::Class),
                ("A.m", ElementKind::Method),
                ("A.m.inner", ElementKind::Function),
            ]
        );
        assert_eq!(got[0].start_line, 1);
        assert_eq!(got[0].end_line, 5);
        assert_eq!(got[2].start_line, 3);
        assert_eq!(got[2].end_line, 4);
    }

    #[test]
    fn decorators_excluded_from_span() {
        let src = "\
import functools

@functools.cache
def f():
    return 1
";
        let got = elements(src);
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].start_line, 4);
        assert_eq!(got[0].end_line, 5);
    }

    #[test]
    fn duplicates_kept_and_control_flow_descended() {
        let src = "\
def f():
    pass

if True:
    def f():
        pass
";
        let got = elements(src);
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].qualified_name, "f");
        assert_eq!(got[1].qualified_name, "f");
        assert_ne!(got[0].start_line, got[1].start_line);
        let idx = ElementIndex::from_elements(got);
        assert_eq!(idx.resolve("f").len(), 2);
    }

    #[test]
    fn resolve_by_suffix() {
        let src = "\
class A:
    def m(self):
        pass

class B:
    def other(self):
        pass
";
        let snap = RepoSnapshot::from_files("t", [("m.py", src)]);
        let idx = ElementIndex::build(&snap, "m.py").unwrap();
        assert_eq!(idx.resolve("A.m")[0].qualified_name, "A.m");
        assert_eq!(idx.resolve("m")[0].qualified_name, "A.m");
        assert!(idx.resolve("missing").is_empty());
        assert_eq!(idx.enclosing(7).unwrap().qualified_name, "B.other");
    }
}
