//! Patch generation: build padded context windows around edit locations,
//! sample search/replace edits from the model, and apply them to produce
//! candidate patches in unified diff form.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::diffs::render_file_map_diff;
use crate::gateway::{CompletionRequest, Gateway, GatewayError};
use crate::localization::{EditLocation, IssueReport};
use crate::prompts::{fill, PromptTemplates};
use crate::python::parse::{annotate_line_numbers, line_span, LineIndex};
use crate::snapshot::RepoSnapshot;

pub const DIFF_CONTEXT_LINES: usize = 3;

/// Numbered source region shown to the model for one file: padded location
/// spans, clamped to the file and merged where they touch or overlap.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextWindow {
    pub path: String,
    pub segments: Vec<(usize, usize)>,
}

/// Windows for one location set, in path order.
pub fn build_windows(
    snapshot: &RepoSnapshot,
    locations: &[EditLocation],
    pad: usize,
) -> Vec<ContextWindow> {
    let mut by_path: BTreeMap<&str, Vec<(usize, usize)>> = BTreeMap::new();
    for location in locations {
        let Some(line_count) = snapshot.line_count(&location.path) else {
            continue;
        };
        let start = location.start_line.saturating_sub(pad).max(1);
        let end = (location.end_line + pad).min(line_count);
        by_path.entry(&location.path).or_default().push((start, end));
    }
    by_path
        .into_iter()
        .map(|(path, mut spans)| {
            spans.sort_unstable();
            let mut segments: Vec<(usize, usize)> = Vec::new();
            for (start, end) in spans {
                match segments.last_mut() {
                    Some(last) if start <= last.1 + 1 => last.1 = last.1.max(end),
                    _ => segments.push((start, end)),
                }
            }
            ContextWindow {
                path: path.to_string(),
                segments,
            }
        })
        .collect()
}

/// Renders windows as fenced, line-numbered excerpts with `...` between
/// non-adjacent segments.
pub fn render_windows(snapshot: &RepoSnapshot, windows: &[ContextWindow]) -> String {
    let mut out = String::new();
    for window in windows {
        let Some(source) = snapshot.text(&window.path) else {
            continue;
        };
        let index = LineIndex::new(source);
        out.push_str(&format!("### {}\n```python\n", window.path));
        for (i, &(start, end)) in window.segments.iter().enumerate() {
            if i > 0 {
                out.push_str("...\n");
            }
            if let Some(span) = line_span(source, &index, start, end) {
                out.push_str(&annotate_line_numbers(span, start));
            }
        }
        out.push_str("```\n\n");
    }
    out.trim_end().to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchReplaceEdit {
    pub path: String,
    pub search: String,
    pub replace: String,
}

/// Extracts well-formed search/replace blocks from a model answer. A block is
/// a file header line (`### path` or a bare path line) followed by
/// `<<<<<<< SEARCH`, the search lines, `=======`, the replace lines, and
/// `>>>>>>> REPLACE`. Prose and malformed blocks are ignored; an empty search
/// invalidates its block.
pub fn parse_search_replace(text: &str) -> Vec<SearchReplaceEdit> {
    enum State {
        Scanning,
        InSearch,
        InReplace,
    }
    let mut edits = Vec::new();
    let mut state = State::Scanning;
    let mut path: Option<String> = None;
    let mut search: Vec<&str> = Vec::new();
    let mut replace: Vec<&str> = Vec::new();
    for line in text.lines() {
        let trimmed = line.trim();
        match state {
            State::Scanning => {
                if trimmed.starts_with("<<<<<<<") && trimmed.contains("SEARCH") {
                    if path.is_some() {
                        search.clear();
                        replace.clear();
                        state = State::InSearch;
                    } else {
                        log::warn!("search block without a preceding file header; skipping");
                    }
                } else if let Some(header) = header_path(trimmed) {
                    path = Some(header);
                }
            }
            State::InSearch => {
                if trimmed == "=======" {
                    state = State::InReplace;
                } else if trimmed.starts_with(">>>>>>>") {
                    log::warn!("search block closed without a divider; skipping");
                    state = State::Scanning;
                } else {
                    search.push(line);
                }
            }
            State::InReplace => {
                if trimmed.starts_with(">>>>>>>") && trimmed.contains("REPLACE") {
                    if search.iter().all(|l| l.trim().is_empty()) {
                        log::warn!("edit with empty search text; skipping");
                    } else {
                        edits.push(SearchReplaceEdit {
                            path: path.clone().unwrap(),
                            search: search.join("\n"),
                            replace: replace.join("\n"),
                        });
                    }
                    state = State::Scanning;
                } else {
                    replace.push(line);
                }
            }
        }
    }
    edits
}

/// `### path`-style headers or bare path-looking lines.
fn header_path(line: &str) -> Option<String> {
    let candidate = line.strip_prefix("####").or_else(|| line.strip_prefix("###")).map(str::trim);
    let candidate = match candidate {
        Some(c) => c,
        None => line,
    };
    let candidate = candidate.trim_matches('`').trim();
    if candidate.is_empty()
        || candidate.contains(char::is_whitespace)
        || !candidate.contains('.')
        || candidate.starts_with("```")
    {
        return None;
    }
    Some(candidate.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateStatus {
    Applied,
    ApplyFailed,
    SyntaxFailed,
    RegressionFailed,
    Survivor,
}

/// One sampled patch attempt. `sample_index` 0 is the greedy draw. The
/// unified diff is present exactly when the edits applied; `patched_files`
/// then holds the new content of every changed file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidatePatch {
    pub task_id: String,
    pub location_set_index: usize,
    pub sample_index: usize,
    pub status: CandidateStatus,
    pub edits: Vec<SearchReplaceEdit>,
    pub unified_diff: Option<String>,
    pub patched_files: BTreeMap<String, String>,
    pub ambiguous_match: bool,
    pub failure: Option<String>,
}

impl CandidatePatch {
    pub fn order_key(&self) -> (usize, usize) {
        (self.location_set_index, self.sample_index)
    }

    pub fn is_noop(&self) -> bool {
        self.unified_diff.as_deref() == Some("")
    }

    pub fn applied(&self) -> bool {
        self.status != CandidateStatus::ApplyFailed
    }
}

#[derive(Debug)]
enum ApplyFailure {
    SearchNotFound { path: String },
    FileNotAllowed { path: String },
    MissingFile { path: String },
    NoEdits,
}

impl ApplyFailure {
    fn describe(&self) -> String {
        match self {
            ApplyFailure::SearchNotFound { path } => {
                format!("search text not found in {path}")
            }
            ApplyFailure::FileNotAllowed { path } => {
                format!("{path} is outside the provided context files")
            }
            ApplyFailure::MissingFile { path } => format!("{path} is not in the snapshot"),
            ApplyFailure::NoEdits => "no well-formed edits in the answer".to_string(),
        }
    }
}

/// Applies edits in order, each against the partially patched text. Matching
/// is exact on contiguous lines, whitespace included; the first occurrence
/// wins and further occurrences set the ambiguity flag.
fn apply_edits(
    snapshot: &RepoSnapshot,
    allowed: &[&str],
    edits: &[SearchReplaceEdit],
) -> Result<(BTreeMap<String, String>, bool), ApplyFailure> {
    if edits.is_empty() {
        return Err(ApplyFailure::NoEdits);
    }
    let mut texts: BTreeMap<String, String> = BTreeMap::new();
    let mut ambiguous = false;
    for edit in edits {
        if !allowed.contains(&edit.path.as_str()) {
            return Err(ApplyFailure::FileNotAllowed {
                path: edit.path.clone(),
            });
        }
        if !texts.contains_key(&edit.path) {
            let original = snapshot.text(&edit.path).ok_or(ApplyFailure::MissingFile {
                path: edit.path.clone(),
            })?;
            texts.insert(edit.path.clone(), original.to_string());
        }
        let current = texts.get_mut(&edit.path).unwrap();
        let (next, extra_matches) = splice(current, &edit.search, &edit.replace)
            .ok_or(ApplyFailure::SearchNotFound {
                path: edit.path.clone(),
            })?;
        ambiguous |= extra_matches;
        *current = next;
    }
    Ok((texts, ambiguous))
}

/// Replaces the first contiguous-line occurrence of `search`. Returns the new
/// text and whether more occurrences existed.
fn splice(text: &str, search: &str, replace: &str) -> Option<(String, bool)> {
    let lines: Vec<&str> = text.split_inclusive('\n').collect();
    let needle: Vec<&str> = search.lines().collect();
    let matches_at = |at: usize| {
        lines[at..]
            .iter()
            .take(needle.len())
            .map(|l| l.strip_suffix('\n').unwrap_or(l))
            .eq(needle.iter().copied())
    };
    let mut found: Option<usize> = None;
    let mut extra = false;
    for at in 0..lines.len().saturating_sub(needle.len() - 1) {
        if matches_at(at) {
            if found.is_some() {
                extra = true;
                break;
            }
            found = Some(at);
        }
    }
    let at = found?;
    let mut out = String::new();
    for line in &lines[..at] {
        out.push_str(line);
    }
    let had_final_newline = lines[at + needle.len() - 1].ends_with('\n');
    if !replace.is_empty() {
        out.push_str(replace);
        if had_final_newline {
            out.push('\n');
        }
    }
    for line in &lines[at + needle.len()..] {
        out.push_str(line);
    }
    Some((out, extra))
}

#[derive(Debug, thiserror::Error)]
pub enum RepairError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

pub struct RepairEngine<'a> {
    pub gateway: &'a Gateway,
    pub model_name: String,
    pub max_output_tokens: u32,
    pub n_samples_per_set: u32,
    pub sample_temperature: f64,
    pub context_pad: usize,
    pub prompts: PromptTemplates,
}

impl<'a> RepairEngine<'a> {
    /// One greedy draw plus `n_samples_per_set` sampled draws per location
    /// set. Candidates come back totally ordered by
    /// (location_set_index, sample_index); an empty set yields none.
    pub fn run(
        &self,
        issue: &IssueReport,
        snapshot: &RepoSnapshot,
        location_sets: &[Vec<EditLocation>],
    ) -> Result<Vec<CandidatePatch>, RepairError> {
        let mut candidates = Vec::new();
        for (set_index, locations) in location_sets.iter().enumerate() {
            if locations.is_empty() {
                log::warn!(
                    "{}: location set {set_index} is empty; no candidates drawn",
                    issue.task_id
                );
                continue;
            }
            let windows = build_windows(snapshot, locations, self.context_pad);
            let allowed: Vec<&str> = windows.iter().map(|w| w.path.as_str()).collect();
            let contexts = render_windows(snapshot, &windows);
            let prompt = fill(
                self.prompts.repair,
                &[
                    ("issue_title", &issue.title),
                    ("issue_body", &issue.body),
                    ("contexts", &contexts),
                ],
            );

            let greedy = CompletionRequest::greedy(&self.model_name, self.max_output_tokens)
                .section("instructions", prompt.clone());
            let greedy_text = self.gateway.complete(&issue.task_id, &greedy)?.texts.remove(0);
            candidates.push(self.build_candidate(
                issue,
                snapshot,
                &allowed,
                set_index,
                0,
                &greedy_text,
            ));

            if self.n_samples_per_set == 0 {
                continue;
            }
            let sampled = CompletionRequest::sampled(
                &self.model_name,
                self.sample_temperature,
                self.n_samples_per_set,
                self.max_output_tokens,
            )
            .section("instructions", prompt);
            let texts = self.gateway.complete(&issue.task_id, &sampled)?.texts;
            for (i, text) in texts.iter().enumerate() {
                candidates.push(self.build_candidate(
                    issue,
                    snapshot,
                    &allowed,
                    set_index,
                    i + 1,
                    text,
                ));
            }
        }
        Ok(candidates)
    }

    fn build_candidate(
        &self,
        issue: &IssueReport,
        snapshot: &RepoSnapshot,
        allowed: &[&str],
        set_index: usize,
        sample_index: usize,
        text: &str,
    ) -> CandidatePatch {
        let edits = parse_search_replace(text);
        match apply_edits(snapshot, allowed, &edits) {
            Ok((patched, ambiguous)) => {
                let paths: Vec<&str> = patched.keys().map(String::as_str).collect();
                let old = snapshot.text_map(&paths);
                let diff = render_file_map_diff(&old, &patched, DIFF_CONTEXT_LINES);
                CandidatePatch {
                    task_id: issue.task_id.clone(),
                    location_set_index: set_index,
                    sample_index,
                    status: CandidateStatus::Applied,
                    edits,
                    unified_diff: Some(diff),
                    patched_files: patched,
                    ambiguous_match: ambiguous,
                    failure: None,
                }
            }
            Err(failure) => CandidatePatch {
                task_id: issue.task_id.clone(),
                location_set_index: set_index,
                sample_index,
                status: CandidateStatus::ApplyFailed,
                edits,
                unified_diff: None,
                patched_files: BTreeMap::new(),
                ambiguous_match: false,
                failure: Some(failure.describe()),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{FnBackend, ModelPrices};
    use crate::localization::LocationKind;

    fn snapshot() -> RepoSnapshot {
        let app: String = (1..=40).map(|i| format!("line_{i} = {i}\n")).collect();
        RepoSnapshot::from_files("demo", [("app.py", app.as_str()), ("util.py", "x = 1\ny = 2\n")])
    }

    fn location(path: &str, start: usize, end: usize) -> EditLocation {
        EditLocation {
            path: path.into(),
            kind: LocationKind::Line,
            target: start.to_string(),
            start_line: start,
            end_line: end,
        }
    }

    #[test]
    fn windows_clamp_merge_and_separate() {
        let snap = snapshot();
        let locations = vec![
            location("app.py", 2, 2),
            location("app.py", 8, 8),
            location("app.py", 35, 36),
        ];
        let windows = build_windows(&snap, &locations, 5);
        assert_eq!(windows.len(), 1);
        assert_eq!(windows[0].segments, vec![(1, 13), (30, 40)]);

        let rendered = render_windows(&snap, &windows);
        assert!(rendered.starts_with("### app.py\n```python\n1|line_1 = 1\n"));
        assert!(rendered.contains("13|line_13 = 13\n...\n30|line_30 = 30\n"));
    }

    #[test]
    fn parse_extracts_blocks_and_ignores_prose() {
        let answer = "Looking at the issue, the fix is:\n\n\
```python\n### app.py\n<<<<<<< SEARCH\nline_2 = 2\n=======\nline_2 = 20\n>>>>>>> REPLACE\n```\n\n\
And another one:\n\n\
```python\n### util.py\n<<<<<<< SEARCH\nx = 1\n=======\nx = 10\n>>>>>>> REPLACE\n```\n";
        let edits = parse_search_replace(answer);
        assert_eq!(edits.len(), 2);
        assert_eq!(edits[0].path, "app.py");
        assert_eq!(edits[0].search, "line_2 = 2");
        assert_eq!(edits[1].replace, "x = 10");
    }

    #[test]
    fn parse_rejects_empty_search_and_missing_header() {
        let empty_search = "### app.py\n<<<<<<< SEARCH\n=======\nnew\n>>>>>>> REPLACE\n";
        assert!(parse_search_replace(empty_search).is_empty());
        let headerless = "<<<<<<< SEARCH\nold\n=======\nnew\n>>>>>>> REPLACE\n";
        assert!(parse_search_replace(headerless).is_empty());
    }

    #[test]
    fn sequential_edits_see_earlier_edits() {
        let snap = snapshot();
        let edits = vec![
            SearchReplaceEdit {
                path: "util.py".into(),
                search: "x = 1".into(),
                replace: "x = 100".into(),
            },
            SearchReplaceEdit {
                path: "util.py".into(),
                search: "x = 100\ny = 2".into(),
                replace: "x = 100\ny = 200".into(),
            },
        ];
        let (patched, ambiguous) = apply_edits(&snap, &["util.py"], &edits).unwrap();
        assert_eq!(patched["util.py"], "x = 100\ny = 200\n");
        assert!(!ambiguous);
    }

    #[test]
    fn first_occurrence_wins_and_flags_ambiguity() {
        let snap = RepoSnapshot::from_files("d", [("a.py", "v = 0\nw = 1\nv = 0\n")]);
        let edits = vec![SearchReplaceEdit {
            path: "a.py".into(),
            search: "v = 0".into(),
            replace: "v = 9".into(),
        }];
        let (patched, ambiguous) = apply_edits(&snap, &["a.py"], &edits).unwrap();
        assert_eq!(patched["a.py"], "v = 9\nw = 1\nv = 0\n");
        assert!(ambiguous);
    }

    #[test]
    fn apply_failures_are_reported() {
        let snap = snapshot();
        let not_found = vec![SearchReplaceEdit {
            path: "util.py".into(),
            search: "no such line".into(),
            replace: "x".into(),
        }];
        assert!(matches!(
            apply_edits(&snap, &["util.py"], &not_found),
            Err(ApplyFailure::SearchNotFound { .. })
        ));
        let outside = vec![SearchReplaceEdit {
            path: "app.py".into(),
            search: "line_1 = 1".into(),
            replace: "z".into(),
        }];
        assert!(matches!(
            apply_edits(&snap, &["util.py"], &outside),
            Err(ApplyFailure::FileNotAllowed { .. })
        ));
        assert!(matches!(
            apply_edits(&snap, &["util.py"], &[]),
            Err(ApplyFailure::NoEdits)
        ));
    }

    #[test]
    fn engine_orders_candidates_and_marks_failures() {
        let backend = FnBackend(|request: &CompletionRequest| {
            let n = request.n_samples;
            if n == 1 {
                Ok(vec![
                    "### util.py\n<<<<<<< SEARCH\nx = 1\n=======\nx = 2\n>>>>>>> REPLACE\n".into(),
                ])
            } else {
                Ok((0..n)
                    .map(|i| {
                        if i % 2 == 0 {
                            "### util.py\n<<<<<<< SEARCH\nx = 1\n=======\nx = 3\n>>>>>>> REPLACE\n"
                                .to_string()
                        } else {
                            "I cannot find a fix.".to_string()
                        }
                    })
                    .collect())
            }
        });
        let gateway = Gateway::new(
            Box::new(backend),
            BTreeMap::from([("m".to_string(), ModelPrices::default())]),
        );
        let engine = RepairEngine {
            gateway: &gateway,
            model_name: "m".into(),
            max_output_tokens: 256,
            n_samples_per_set: 4,
            sample_temperature: 0.8,
            context_pad: 2,
            prompts: PromptTemplates::default(),
        };
        let issue = IssueReport {
            task_id: "t".into(),
            title: "x wrong".into(),
            body: "x should be 2".into(),
        };
        let sets = vec![vec![location("util.py", 1, 1)], vec![location("util.py", 2, 2)]];
        let candidates = engine.run(&issue, &snapshot(), &sets).unwrap();
        assert_eq!(candidates.len(), 10);
        let keys: Vec<(usize, usize)> = candidates.iter().map(|c| c.order_key()).collect();
        let mut sorted = keys.clone();
        sorted.sort_unstable();
        assert_eq!(keys, sorted);
        assert_eq!(candidates[0].status, CandidateStatus::Applied);
        assert!(candidates[0].unified_diff.as_deref().unwrap().contains("-x = 1"));
        assert_eq!(candidates[2].status, CandidateStatus::ApplyFailed);
        assert!(candidates[2].unified_diff.is_none());
    }

    #[test]
    fn noop_edit_keeps_empty_diff() {
        let snap = snapshot();
        let edits = vec![SearchReplaceEdit {
            path: "util.py".into(),
            search: "x = 1".into(),
            replace: "x = 1".into(),
        }];
        let (patched, _) = apply_edits(&snap, &["util.py"], &edits).unwrap();
        let paths: Vec<&str> = patched.keys().map(String::as_str).collect();
        let old = snap.text_map(&paths);
        let diff = render_file_map_diff(&old, &patched, DIFF_CONTEXT_LINES);
        assert_eq!(diff, "");
    }
}
