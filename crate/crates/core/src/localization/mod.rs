//! Hierarchical fault localization: narrow an issue to files, then to
//! declarations inside those files, then to concrete edit locations, each
//! step driven by one model call over the previous step's output.

pub mod wire;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::gateway::{CompletionRequest, Gateway, GatewayError};
use crate::prompts::{fill, PromptTemplates};
use crate::python::{
    build_skeleton, element_source, render_skeleton, CodeElement, ElementIndex,
};
use crate::snapshot::RepoSnapshot;
use crate::structure::build_repo_structure;
use wire::{parse_targets, RawTarget};

/// How many raw lines of an unparseable file are shown in place of a skeleton.
const RAW_FALLBACK_MAX_LINES: usize = 120;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IssueReport {
    pub task_id: String,
    pub title: String,
    pub body: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocationKind {
    Element,
    Line,
}

/// One resolved edit location: a declaration or a single line, with the span
/// it covers in the current file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditLocation {
    pub path: String,
    pub kind: LocationKind,
    pub target: String,
    pub start_line: usize,
    pub end_line: usize,
}

impl EditLocation {
    pub fn dedupe_key(&self) -> (String, LocationKind, String) {
        (self.path.clone(), self.kind, self.target.clone())
    }
}

/// An entry the model emitted that validation discarded, kept for the
/// per-task artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DroppedEntry {
    pub step: String,
    pub raw: String,
    pub reason: String,
}

/// Lines of code surviving each narrowing step.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct FunnelLoc {
    pub repo_loc: usize,
    pub file_loc: usize,
    pub element_loc: usize,
    pub location_loc: usize,
}

impl FunnelLoc {
    pub fn is_monotone(&self) -> bool {
        self.repo_loc >= self.file_loc
            && self.file_loc >= self.element_loc
            && self.element_loc >= self.location_loc
    }
}

/// Everything localization produced for one task, persisted as
/// `localization.json` in the task's run directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalizationArtifact {
    pub task_id: String,
    pub files: Vec<String>,
    pub elements: Vec<CodeElement>,
    pub location_samples: Vec<Vec<EditLocation>>,
    pub location_sets: Vec<Vec<EditLocation>>,
    pub dropped: Vec<DroppedEntry>,
    pub funnel: FunnelLoc,
}

#[derive(Debug, thiserror::Error)]
pub enum LocalizationError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("model returned no usable entries at the {step} step")]
    EmptyLocalization { step: &'static str },
    #[error("every edit-location sample was empty after validation")]
    AllSamplesEmpty,
}

pub struct Localizer<'a> {
    pub gateway: &'a Gateway,
    pub model_name: String,
    pub max_output_tokens: u32,
    pub top_n_files: usize,
    pub k_location_samples: u32,
    pub sample_temperature: f64,
    pub prompts: PromptTemplates,
}

impl<'a> Localizer<'a> {
    pub fn run(
        &self,
        issue: &IssueReport,
        snapshot: &RepoSnapshot,
    ) -> Result<LocalizationArtifact, LocalizationError> {
        let mut dropped = Vec::new();
        let files = self.localize_files(issue, snapshot, &mut dropped)?;
        let elements = self.localize_elements(issue, snapshot, &files, &mut dropped)?;
        let location_samples =
            self.localize_edit_locations(issue, snapshot, &elements, &mut dropped)?;
        let location_sets = merge_samples(&location_samples);
        let funnel = compute_funnel(snapshot, &files, &elements, &location_sets);
        Ok(LocalizationArtifact {
            task_id: issue.task_id.clone(),
            files,
            elements,
            location_samples,
            location_sets,
            dropped,
            funnel,
        })
    }

    fn greedy_request(&self, prompt: String) -> CompletionRequest {
        CompletionRequest::greedy(&self.model_name, self.max_output_tokens)
            .section("instructions", prompt)
    }

    /// Step one: rank suspicious files from the repository structure.
    pub fn localize_files(
        &self,
        issue: &IssueReport,
        snapshot: &RepoSnapshot,
        dropped: &mut Vec<DroppedEntry>,
    ) -> Result<Vec<String>, LocalizationError> {
        let structure = build_repo_structure(snapshot);
        let prompt = fill(
            self.prompts.file_localization,
            &[
                ("issue_title", &issue.title),
                ("issue_body", &issue.body),
                ("structure", &structure.text),
                ("top_n", &self.top_n_files.to_string()),
            ],
        );
        let result = self
            .gateway
            .complete(&issue.task_id, &self.greedy_request(prompt))?;
        let parsed = parse_targets(&result.texts[0]);
        record_rejects(dropped, "files", parsed.rejected);

        let mut files = Vec::new();
        for target in parsed.targets {
            let path = target.path().to_string();
            if !snapshot.is_source_file(&path) {
                drop_entry(dropped, "files", &path, "not a source file in the snapshot");
            } else if !files.contains(&path) {
                files.push(path);
            }
        }
        files.truncate(self.top_n_files);
        if files.is_empty() {
            return Err(LocalizationError::EmptyLocalization { step: "file" });
        }
        Ok(files)
    }

    /// Step two: pick declarations to inspect, from skeletons of the selected
    /// files sent in a single prompt.
    pub fn localize_elements(
        &self,
        issue: &IssueReport,
        snapshot: &RepoSnapshot,
        files: &[String],
        dropped: &mut Vec<DroppedEntry>,
    ) -> Result<Vec<CodeElement>, LocalizationError> {
        let mut skeletons = String::new();
        let mut indexes: BTreeMap<&str, ElementIndex> = BTreeMap::new();
        for path in files {
            skeletons.push_str(&format!("### {path}\n```python\n"));
            match build_skeleton(snapshot, path) {
                Ok(skeleton) => {
                    skeletons.push_str(&render_skeleton(&skeleton));
                    if let Ok(index) = ElementIndex::build(snapshot, path) {
                        indexes.insert(path, index);
                    }
                }
                Err(failure) => {
                    log::warn!("{path}: no skeleton, sending raw head: {failure}");
                    skeletons.push_str(&raw_head(snapshot, path));
                }
            }
            skeletons.push_str("```\n\n");
        }

        let prompt = fill(
            self.prompts.element_localization,
            &[
                ("issue_title", &issue.title),
                ("issue_body", &issue.body),
                ("skeletons", skeletons.trim_end()),
            ],
        );
        let result = self
            .gateway
            .complete(&issue.task_id, &self.greedy_request(prompt))?;
        let parsed = parse_targets(&result.texts[0]);
        record_rejects(dropped, "elements", parsed.rejected);

        let mut elements: Vec<CodeElement> = Vec::new();
        let push = |elements: &mut Vec<CodeElement>, e: &CodeElement| {
            if !elements.contains(e) {
                elements.push(e.clone());
            }
        };
        for target in parsed.targets {
            let path = target.path();
            let Some(index) = indexes.get(path) else {
                drop_entry(dropped, "elements", &describe(&target), "path not among selected files");
                continue;
            };
            match &target {
                RawTarget::File { .. } => {
                    drop_entry(dropped, "elements", path, "file-level entry at the element step");
                }
                RawTarget::Element { name, .. } => {
                    let matches = index.resolve(name);
                    if matches.is_empty() {
                        drop_entry(dropped, "elements", &describe(&target), "no declaration with this name");
                    }
                    for e in matches {
                        push(&mut elements, e);
                    }
                }
                RawTarget::Line { line, .. } => match index.enclosing(*line) {
                    Some(e) => push(&mut elements, e),
                    None => {
                        drop_entry(dropped, "elements", &describe(&target), "line outside every declaration");
                    }
                },
            }
        }
        if elements.is_empty() {
            return Err(LocalizationError::EmptyLocalization { step: "element" });
        }
        Ok(elements)
    }

    /// Step three: sample k edit-location lists over the selected element
    /// sources in one request; each sample is validated independently.
    pub fn localize_edit_locations(
        &self,
        issue: &IssueReport,
        snapshot: &RepoSnapshot,
        elements: &[CodeElement],
        dropped: &mut Vec<DroppedEntry>,
    ) -> Result<Vec<Vec<EditLocation>>, LocalizationError> {
        let mut contexts = String::new();
        for element in elements {
            if let Some(source) = element_source(snapshot, element) {
                contexts.push_str(&format!(
                    "### {}: {}\n```python\n{source}```\n\n",
                    element.path, element.qualified_name
                ));
            }
        }
        let prompt = fill(
            self.prompts.edit_localization,
            &[
                ("issue_title", &issue.title),
                ("issue_body", &issue.body),
                ("contexts", contexts.trim_end()),
            ],
        );
        let request = CompletionRequest::sampled(
            &self.model_name,
            self.sample_temperature,
            self.k_location_samples,
            self.max_output_tokens,
        )
        .section("instructions", prompt);
        let result = self.gateway.complete(&issue.task_id, &request)?;

        let mut indexes: BTreeMap<&str, ElementIndex> = BTreeMap::new();
        for element in elements {
            if !indexes.contains_key(element.path.as_str()) {
                if let Ok(index) = ElementIndex::build(snapshot, &element.path) {
                    indexes.insert(&element.path, index);
                }
            }
        }

        let mut samples = Vec::new();
        for (sample_idx, text) in result.texts.iter().enumerate() {
            let step = format!("locations[{sample_idx}]");
            let parsed = parse_targets(text);
            for reject in parsed.rejected {
                dropped.push(DroppedEntry {
                    step: step.clone(),
                    raw: reject.raw,
                    reason: reject.reason,
                });
            }
            let mut locations = Vec::new();
            for target in parsed.targets {
                match resolve_location(&target, elements, &indexes) {
                    Ok(mut resolved) => locations.append(&mut resolved),
                    Err(reason) => dropped.push(DroppedEntry {
                        step: step.clone(),
                        raw: describe(&target),
                        reason: reason.to_string(),
                    }),
                }
            }
            samples.push(locations);
        }
        if samples.iter().all(|s| s.is_empty()) {
            return Err(LocalizationError::AllSamplesEmpty);
        }
        Ok(samples)
    }
}

/// Maps a raw step-three target onto concrete spans, enforcing containment
/// in the step-two elements.
fn resolve_location(
    target: &RawTarget,
    elements: &[CodeElement],
    indexes: &BTreeMap<&str, ElementIndex>,
) -> Result<Vec<EditLocation>, &'static str> {
    let path = target.path();
    let within = |start: usize, end: usize| {
        elements
            .iter()
            .any(|e| e.path == path && e.contains_span(start, end))
    };
    match target {
        RawTarget::File { .. } => Err("file-level entry at the edit-location step"),
        RawTarget::Element { name, .. } => {
            let index = indexes.get(path).ok_or("path not among selected files")?;
            let resolved: Vec<EditLocation> = index
                .resolve(name)
                .into_iter()
                .filter(|e| within(e.start_line, e.end_line))
                .map(|e| EditLocation {
                    path: e.path.clone(),
                    kind: LocationKind::Element,
                    target: e.qualified_name.clone(),
                    start_line: e.start_line,
                    end_line: e.end_line,
                })
                .collect();
            if resolved.is_empty() {
                Err("no matching declaration inside the selected elements")
            } else {
                Ok(resolved)
            }
        }
        RawTarget::Line { line, .. } => {
            if within(*line, *line) {
                Ok(vec![EditLocation {
                    path: path.to_string(),
                    kind: LocationKind::Line,
                    target: line.to_string(),
                    start_line: *line,
                    end_line: *line,
                }])
            } else {
                Err("line outside the selected elements")
            }
        }
    }
}

/// Pairs consecutive samples in draw order and deduplicates each pair by
/// (path, kind, target). Sets stay independent of each other.
pub fn merge_samples(samples: &[Vec<EditLocation>]) -> Vec<Vec<EditLocation>> {
    samples
        .chunks(2)
        .map(|pair| {
            let mut seen = Vec::new();
            let mut merged = Vec::new();
            for location in pair.iter().flatten() {
                let key = location.dedupe_key();
                if !seen.contains(&key) {
                    seen.push(key);
                    merged.push(location.clone());
                }
            }
            merged
        })
        .collect()
}

pub fn compute_funnel(
    snapshot: &RepoSnapshot,
    files: &[String],
    elements: &[CodeElement],
    location_sets: &[Vec<EditLocation>],
) -> FunnelLoc {
    let repo_loc = snapshot
        .source_paths()
        .iter()
        .filter_map(|p| snapshot.line_count(p))
        .sum();
    let file_loc = files.iter().filter_map(|p| snapshot.line_count(p)).sum();
    let element_loc = union_loc(elements.iter().map(|e| (e.path.as_str(), e.start_line, e.end_line)));
    let location_loc = union_loc(
        location_sets
            .iter()
            .flatten()
            .map(|l| (l.path.as_str(), l.start_line, l.end_line)),
    );
    FunnelLoc {
        repo_loc,
        file_loc,
        element_loc,
        location_loc,
    }
}

/// Total lines covered by the union of (path, start, end) spans.
fn union_loc<'a>(spans: impl Iterator<Item = (&'a str, usize, usize)>) -> usize {
    let mut by_path: BTreeMap<&str, Vec<(usize, usize)>> = BTreeMap::new();
    for (path, start, end) in spans {
        by_path.entry(path).or_default().push((start, end));
    }
    let mut total = 0;
    for spans in by_path.values_mut() {
        spans.sort_unstable();
        let mut current: Option<(usize, usize)> = None;
        for &(start, end) in spans.iter() {
            match current {
                Some((cs, ce)) if start <= ce + 1 => current = Some((cs, ce.max(end))),
                Some((cs, ce)) => {
                    total += ce - cs + 1;
                    current = Some((start, end));
                }
                None => current = Some((start, end)),
            }
        }
        if let Some((cs, ce)) = current {
            total += ce - cs + 1;
        }
    }
    total
}

fn raw_head(snapshot: &RepoSnapshot, path: &str) -> String {
    let Some(text) = snapshot.text(path) else {
        return String::new();
    };
    let mut head: String = text
        .lines()
        .take(RAW_FALLBACK_MAX_LINES)
        .collect::<Vec<_>>()
        .join("\n");
    if !head.ends_with('\n') {
        head.push('\n');
    }
    head
}

fn describe(target: &RawTarget) -> String {
    match target {
        RawTarget::File { path } => path.clone(),
        RawTarget::Element { path, name } => format!("{path}: {name}"),
        RawTarget::Line { path, line } => format!("{path}: line {line}"),
    }
}

fn drop_entry(dropped: &mut Vec<DroppedEntry>, step: &str, raw: &str, reason: &str) {
    log::warn!("{step} localization dropped {raw:?}: {reason}");
    dropped.push(DroppedEntry {
        step: step.to_string(),
        raw: raw.to_string(),
        reason: reason.to_string(),
    });
}

fn record_rejects(dropped: &mut Vec<DroppedEntry>, step: &str, rejects: Vec<wire::RejectedLine>) {
    for reject in rejects {
        drop_entry(dropped, step, &reject.raw, &reject.reason);
    }
}
