//! Judges predictions: did the patch resolve the issue, and did it edit the
//! places the reference patch edits, at line, function, and file granularity.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use repomend_core::diffs::{apply_unified, parse_unified, LineTag};
use repomend_core::python::ElementIndex;
use repomend_core::selection::{CommandRunner, TestRunner};
use repomend_core::snapshot::RepoSnapshot;
use serde::{Deserialize, Serialize};

pub const MODULE_LEVEL: &str = "<module>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationMatch {
    pub line: bool,
    pub function: bool,
    pub file: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub task_id: String,
    pub resolved: bool,
    pub apply_status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct_location: Option<LocationMatch>,
}

/// Everywhere a patch touches the pristine checkout. Functions and files are
/// derived from the edited-line set, so line containment implies function
/// containment implies file containment.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PatchLocations {
    pub files: BTreeSet<String>,
    pub functions: BTreeSet<(String, String)>,
    pub lines: BTreeSet<(String, usize)>,
}

/// Edited lines of a unified diff against the pristine snapshot: old-file
/// numbers of removed lines, and for hunks that only add, the line the
/// insertion anchors to (the one before it, clamped to 1). Created files
/// anchor to line 1 of the new path.
pub fn patch_locations(
    snapshot: &RepoSnapshot,
    patch_text: &str,
) -> anyhow::Result<PatchLocations> {
    let mut locations = PatchLocations::default();
    if patch_text.trim().is_empty() {
        return Ok(locations);
    }
    let diffs = parse_unified(patch_text).map_err(|e| anyhow::anyhow!("{e}"))?;
    for diff in &diffs {
        let path = diff.target_path().to_string();
        locations.files.insert(path.clone());
        if diff.is_creation() {
            locations.functions.insert((path.clone(), MODULE_LEVEL.to_string()));
            locations.lines.insert((path.clone(), 1));
            continue;
        }
        let index = ElementIndex::build(snapshot, &path).ok();
        for hunk in &diff.hunks {
            let mut cursor = hunk.old_start;
            let mut edited: Vec<usize> = Vec::new();
            let mut first_add_anchor: Option<usize> = None;
            for line in &hunk.lines {
                match line.tag {
                    LineTag::Context => cursor += 1,
                    LineTag::Del => {
                        edited.push(cursor);
                        cursor += 1;
                    }
                    LineTag::Add => {
                        if first_add_anchor.is_none() {
                            first_add_anchor = Some(cursor.saturating_sub(1).max(1));
                        }
                    }
                }
            }
            if edited.is_empty() {
                if let Some(anchor) = first_add_anchor {
                    edited.push(anchor);
                }
            }
            for line in edited {
                locations.lines.insert((path.clone(), line));
                let function = index
                    .as_ref()
                    .and_then(|i| i.enclosing(line))
                    .map(|e| e.qualified_name.clone())
                    .unwrap_or_else(|| MODULE_LEVEL.to_string());
                locations.functions.insert((path.clone(), function));
            }
        }
    }
    Ok(locations)
}

/// Superset containment at each granularity: the prediction localizes
/// correctly when it edits everywhere the reference patch edits. The result
/// satisfies line implies function implies file.
pub fn correct_location(
    snapshot: &RepoSnapshot,
    gold_patch: &str,
    predicted_patch: &str,
) -> anyhow::Result<LocationMatch> {
    let gold = patch_locations(snapshot, gold_patch)?;
    let predicted = patch_locations(snapshot, predicted_patch)?;
    let file = gold.files.is_subset(&predicted.files);
    let function = file && gold.functions.is_subset(&predicted.functions);
    let line = function && gold.lines.is_subset(&predicted.lines);
    Ok(LocationMatch { line, function, file })
}

pub struct ResolutionJudgment {
    pub resolved: bool,
    pub apply_status: String,
    pub log: String,
}

/// Applies the patch to a pristine checkout and runs the evaluation command;
/// resolved means every test passes. A patch that does not apply is
/// unresolved by definition.
pub fn evaluate_resolution(
    snapshot: &RepoSnapshot,
    patch_text: &str,
    command: &str,
    timeout: Duration,
) -> anyhow::Result<ResolutionJudgment> {
    let patched = match apply_patch_text(snapshot, patch_text) {
        Ok(map) => map,
        Err(reason) => {
            return Ok(ResolutionJudgment {
                resolved: false,
                apply_status: format!("apply_failed: {reason}"),
                log: String::new(),
            });
        }
    };
    let dir = tempfile::tempdir()?;
    snapshot.materialize(dir.path())?;
    for (path, content) in &patched {
        let target = dir.path().join(path);
        if let Some(parent) = target.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(target, content)?;
    }
    let runner = CommandRunner {
        command: command.to_string(),
        timeout,
    };
    let outcome = runner.run(dir.path()).map_err(|e| anyhow::anyhow!("{e}"))?;
    Ok(ResolutionJudgment {
        resolved: outcome.passed(),
        apply_status: if patch_text.trim().is_empty() {
            "empty_patch".to_string()
        } else {
            "applied".to_string()
        },
        log: outcome.output,
    })
}

/// Applies a unified diff to the snapshot's text files, returning only the
/// files the patch changed (deleted files map to an empty marker removal).
fn apply_patch_text(
    snapshot: &RepoSnapshot,
    patch_text: &str,
) -> Result<BTreeMap<String, String>, String> {
    if patch_text.trim().is_empty() {
        return Ok(BTreeMap::new());
    }
    let diffs = parse_unified(patch_text).map_err(|e| e.to_string())?;
    let mut files: BTreeMap<String, String> = BTreeMap::new();
    for path in snapshot.paths() {
        if let Some(text) = snapshot.text(path) {
            files.insert(path.to_string(), text.to_string());
        }
    }
    let patched = apply_unified(&files, &diffs).map_err(|e| e.to_string())?;
    let mut changed = BTreeMap::new();
    for (path, content) in &patched {
        if files.get(path) != Some(content) {
            changed.insert(path.clone(), content.clone());
        }
    }
    Ok(changed)
}
