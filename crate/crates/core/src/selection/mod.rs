//! Candidate filtering and winner selection: drop patches that break parsing
//! or regress the test suite, normalize the rest into semantic equivalence
//! classes, and majority-vote across the classes.

pub mod regression;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::diffs::render_file_diff;
use crate::gateway::sha256_hex;
use crate::python::{canonicalize_module, check_syntax};
use crate::repair::{CandidatePatch, CandidateStatus, DIFF_CONTEXT_LINES};
use crate::snapshot::RepoSnapshot;

pub use regression::{
    parse_failed_tests, CommandRunner, RegressionSuite, RegressionVerdict, SandboxError,
    TestOutcome, TestRunner,
};

/// Equivalence key for one applied candidate: the unified diff between the
/// canonicalized old and new forms of every changed file, concatenated in
/// path order. Cosmetic differences cancel out in canonical form, so patches
/// with the same semantic effect share a key. When canonicalization fails the
/// key falls back to a digest of the patched bytes, which still maps
/// byte-identical patched states to the same key.
pub fn normalize_key(snapshot: &RepoSnapshot, candidate: &CandidatePatch) -> String {
    match canonical_diff(snapshot, candidate) {
        Ok(key) => key,
        Err(reason) => {
            log::warn!(
                "normalization fell back to content digest for {}[{}][{}]: {reason}",
                candidate.task_id,
                candidate.location_set_index,
                candidate.sample_index
            );
            format!(
                "fallback:{}",
                sha256_hex(regression::patched_digest(&candidate.patched_files).as_bytes())
            )
        }
    }
}

fn canonical_diff(snapshot: &RepoSnapshot, candidate: &CandidatePatch) -> Result<String, String> {
    let mut key = String::new();
    for (path, new_text) in &candidate.patched_files {
        let old_text = snapshot
            .text(path)
            .ok_or_else(|| format!("{path} missing from snapshot"))?;
        let old_canonical = canonicalize_module(old_text, path).map_err(|e| e.to_string())?;
        let new_canonical = canonicalize_module(new_text, path).map_err(|e| e.to_string())?;
        if let Some(diff) = render_file_diff(path, &old_canonical, &new_canonical, DIFF_CONTEXT_LINES)
        {
            key.push_str(&diff);
        }
    }
    Ok(key)
}

/// Survival counts through the filter chain for one task.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterCounts {
    pub total: usize,
    pub applied: usize,
    pub syntax_passed: usize,
    pub survivors: usize,
}

pub fn filter_counts(candidates: &[CandidatePatch]) -> FilterCounts {
    let mut counts = FilterCounts {
        total: candidates.len(),
        ..FilterCounts::default()
    };
    for candidate in candidates {
        if candidate.status != CandidateStatus::ApplyFailed {
            counts.applied += 1;
        }
        match candidate.status {
            CandidateStatus::Survivor | CandidateStatus::RegressionFailed => {
                counts.syntax_passed += 1
            }
            _ => {}
        }
        if candidate.status == CandidateStatus::Survivor {
            counts.survivors += 1;
        }
    }
    counts
}

/// Marks applied candidates whose patched files no longer parse.
pub fn syntax_filter(candidates: &mut [CandidatePatch]) {
    for candidate in candidates.iter_mut() {
        if candidate.status != CandidateStatus::Applied {
            continue;
        }
        let broken = candidate
            .patched_files
            .iter()
            .find(|(_, text)| !check_syntax(text));
        if let Some((path, _)) = broken {
            candidate.failure = Some(format!("{path} no longer parses"));
            candidate.status = CandidateStatus::SyntaxFailed;
        }
    }
}

/// Judges every syntax-passing candidate against the baseline suite and
/// returns the verdicts keyed by (location_set_index, sample_index). A
/// sandbox failure leaves the candidate a survivor with its verdict flagged
/// unjudged.
pub fn regression_filter(
    snapshot: &RepoSnapshot,
    candidates: &mut [CandidatePatch],
    suite: &RegressionSuite,
) -> BTreeMap<(usize, usize), RegressionVerdict> {
    let mut verdicts = BTreeMap::new();
    for candidate in candidates.iter_mut() {
        if candidate.status != CandidateStatus::Applied {
            continue;
        }
        let verdict = suite.judge(snapshot, &candidate.patched_files);
        if verdict.pass {
            candidate.status = CandidateStatus::Survivor;
        } else {
            candidate.failure = Some(if verdict.timed_out {
                "test suite timed out".to_string()
            } else {
                format!("new test failures: {}", verdict.new_failures.join(", "))
            });
            candidate.status = CandidateStatus::RegressionFailed;
        }
        verdicts.insert(candidate.order_key(), verdict);
    }
    verdicts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionTier {
    Survivors,
    SyntaxPassing,
    Applied,
    Unresolved,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VoteClass {
    pub key: String,
    pub members: Vec<(usize, usize)>,
    pub count: usize,
    pub contains_greedy: bool,
    pub has_nonempty_member: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub tier: SelectionTier,
    pub winner: Option<(usize, usize)>,
    pub winner_key: Option<String>,
    pub classes: Vec<VoteClass>,
}

/// Picks the final candidate. Voting runs over the best non-empty tier of
/// the fallback chain (survivors, then syntax-passing, then anything that
/// applied). The winning class has the most members; ties prefer a class
/// containing the greedy draw, then the lexicographically smallest key.
/// Classes whose members are all empty diffs lose to any non-empty class,
/// and the emitted member is the lowest (location_set_index, sample_index),
/// preferring non-empty members.
pub fn select(snapshot: &RepoSnapshot, candidates: &[CandidatePatch]) -> SelectionOutcome {
    let keys: BTreeMap<(usize, usize), String> = candidates
        .iter()
        .filter(|c| c.applied())
        .map(|c| (c.order_key(), normalize_key(snapshot, c)))
        .collect();

    for (tier, statuses) in [
        (SelectionTier::Survivors, vec![CandidateStatus::Survivor]),
        (
            SelectionTier::SyntaxPassing,
            vec![CandidateStatus::Survivor, CandidateStatus::RegressionFailed],
        ),
        (
            SelectionTier::Applied,
            vec![
                CandidateStatus::Survivor,
                CandidateStatus::RegressionFailed,
                CandidateStatus::SyntaxFailed,
                CandidateStatus::Applied,
            ],
        ),
    ] {
        let members: Vec<&CandidatePatch> = candidates
            .iter()
            .filter(|c| statuses.contains(&c.status))
            .collect();
        if members.is_empty() {
            continue;
        }
        let classes = build_classes(&members, &keys);
        let winner_class = pick_class(&classes);
        let winner = pick_member(&members, winner_class);
        return SelectionOutcome {
            tier,
            winner: Some(winner),
            winner_key: Some(winner_class.key.clone()),
            classes,
        };
    }
    SelectionOutcome {
        tier: SelectionTier::Unresolved,
        winner: None,
        winner_key: None,
        classes: Vec::new(),
    }
}

fn build_classes(
    members: &[&CandidatePatch],
    keys: &BTreeMap<(usize, usize), String>,
) -> Vec<VoteClass> {
    let mut by_key: BTreeMap<&str, VoteClass> = BTreeMap::new();
    for candidate in members {
        let order_key = candidate.order_key();
        let key = keys[&order_key].as_str();
        let class = by_key.entry(key).or_insert_with(|| VoteClass {
            key: key.to_string(),
            members: Vec::new(),
            count: 0,
            contains_greedy: false,
            has_nonempty_member: false,
        });
        class.members.push(order_key);
        class.count += 1;
        class.contains_greedy |= candidate.sample_index == 0;
        class.has_nonempty_member |= !candidate.is_noop();
    }
    let mut classes: Vec<VoteClass> = by_key.into_values().collect();
    for class in &mut classes {
        class.members.sort_unstable();
    }
    classes.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.key.cmp(&b.key)));
    classes
}

fn pick_class(classes: &[VoteClass]) -> &VoteClass {
    let eligible: Vec<&VoteClass> = if classes.iter().any(|c| c.has_nonempty_member) {
        classes.iter().filter(|c| c.has_nonempty_member).collect()
    } else {
        classes.iter().collect()
    };
    let best_count = eligible.iter().map(|c| c.count).max().unwrap();
    let top: Vec<&&VoteClass> = eligible.iter().filter(|c| c.count == best_count).collect();
    if let Some(greedy) = top.iter().find(|c| c.contains_greedy) {
        return greedy;
    }
    top.iter().min_by_key(|c| &c.key).unwrap()
}

fn pick_member(members: &[&CandidatePatch], class: &VoteClass) -> (usize, usize) {
    let in_class = |c: &&&CandidatePatch| class.members.contains(&c.order_key());
    members
        .iter()
        .filter(in_class)
        .filter(|c| !c.is_noop())
        .map(|c| c.order_key())
        .min()
        .or_else(|| {
            members
                .iter()
                .filter(in_class)
                .map(|c| c.order_key())
                .min()
        })
        .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn snapshot() -> RepoSnapshot {
        RepoSnapshot::from_files("demo", [("app.py", "def f():\n    return 1\n")])
    }

    fn candidate(
        set_index: usize,
        sample_index: usize,
        new_text: &str,
        status: CandidateStatus,
    ) -> CandidatePatch {
        let snap = snapshot();
        let old = snap.text("app.py").unwrap();
        let diff = render_file_diff("app.py", old, new_text, DIFF_CONTEXT_LINES)
            .unwrap_or_default();
        CandidatePatch {
            task_id: "t".into(),
            location_set_index: set_index,
            sample_index,
            status,
            edits: Vec::new(),
            unified_diff: Some(diff),
            patched_files: BTreeMap::from([("app.py".to_string(), new_text.to_string())]),
            ambiguous_match: false,
            failure: None,
        }
    }

    #[test]
    fn cosmetic_variants_share_a_key_and_semantic_changes_do_not() {
        let snap = snapshot();
        let spaced = candidate(0, 1, "def f():\n    return (2)\n", CandidateStatus::Survivor);
        let plain = candidate(0, 2, "def f():\n    return 2\n", CandidateStatus::Survivor);
        let commented = candidate(
            0,
            3,
            "def f():\n    # doubled\n    return 2\n",
            CandidateStatus::Survivor,
        );
        let different = candidate(0, 4, "def f():\n    return 3\n", CandidateStatus::Survivor);
        let k1 = normalize_key(&snap, &spaced);
        assert_eq!(k1, normalize_key(&snap, &plain));
        assert_eq!(k1, normalize_key(&snap, &commented));
        assert_ne!(k1, normalize_key(&snap, &different));
    }

    #[test]
    fn normalization_is_idempotent_on_the_key() {
        let snap = snapshot();
        let c = candidate(0, 1, "def f():\n    return 2\n", CandidateStatus::Survivor);
        assert_eq!(normalize_key(&snap, &c), normalize_key(&snap, &c));
    }

    #[test]
    fn syntax_filter_rejects_unparseable_patches() {
        let mut candidates = vec![
            candidate(0, 0, "def f():\n    return 2\n", CandidateStatus::Applied),
            candidate(0, 1, "def f(:\n    return 2\n", CandidateStatus::Applied),
        ];
        syntax_filter(&mut candidates);
        assert_eq!(candidates[0].status, CandidateStatus::Applied);
        assert_eq!(candidates[1].status, CandidateStatus::SyntaxFailed);
    }

    #[test]
    fn majority_wins_and_greedy_breaks_ties() {
        let snap = snapshot();
        let candidates = vec![
            candidate(0, 0, "def f():\n    return 2\n", CandidateStatus::Survivor),
            candidate(0, 1, "def f():\n    return 3\n", CandidateStatus::Survivor),
            candidate(1, 2, "def f():\n    return (3)\n", CandidateStatus::Survivor),
            candidate(1, 5, "def f():\n    return 2\n", CandidateStatus::Survivor),
        ];
        let outcome = select(&snap, &candidates);
        assert_eq!(outcome.tier, SelectionTier::Survivors);
        assert_eq!(outcome.winner, Some((0, 0)));
        assert_eq!(outcome.classes.len(), 2);
        assert!(outcome.classes.iter().all(|c| c.count == 2));
    }

    #[test]
    fn vote_is_invariant_under_input_order() {
        let snap = snapshot();
        let mut candidates = vec![
            candidate(0, 1, "def f():\n    return 3\n", CandidateStatus::Survivor),
            candidate(0, 2, "def f():\n    return (3)\n", CandidateStatus::Survivor),
            candidate(1, 1, "def f():\n    return 2\n", CandidateStatus::Survivor),
        ];
        let a = select(&snap, &candidates);
        candidates.reverse();
        let b = select(&snap, &candidates);
        assert_eq!(a.winner, b.winner);
        assert_eq!(a.winner_key, b.winner_key);
    }

    #[test]
    fn noop_never_beats_a_nonempty_survivor() {
        let snap = snapshot();
        let noop = |set: usize, sample: usize| {
            candidate(set, sample, "def f():\n    return 1\n", CandidateStatus::Survivor)
        };
        let candidates = vec![
            noop(0, 0),
            noop(0, 1),
            noop(0, 2),
            candidate(1, 1, "def f():\n    return 2\n", CandidateStatus::Survivor),
        ];
        let outcome = select(&snap, &candidates);
        assert_eq!(outcome.winner, Some((1, 1)));
    }

    #[test]
    fn fallback_chain_descends_tiers() {
        let snap = snapshot();
        let only_syntax_passing = vec![
            candidate(0, 0, "def f():\n    return 9\n", CandidateStatus::RegressionFailed),
            candidate(0, 1, "def f(:\n", CandidateStatus::SyntaxFailed),
        ];
        let outcome = select(&snap, &only_syntax_passing);
        assert_eq!(outcome.tier, SelectionTier::SyntaxPassing);
        assert_eq!(outcome.winner, Some((0, 0)));

        let only_applied = vec![candidate(0, 1, "def f(:\n", CandidateStatus::SyntaxFailed)];
        let outcome = select(&snap, &only_applied);
        assert_eq!(outcome.tier, SelectionTier::Applied);

        let outcome = select(&snap, &[]);
        assert_eq!(outcome.tier, SelectionTier::Unresolved);
        assert!(outcome.winner.is_none());
    }

    #[test]
    fn filter_counts_track_the_funnel() {
        let candidates = vec![
            candidate(0, 0, "def f():\n    return 2\n", CandidateStatus::Survivor),
            candidate(0, 1, "def f():\n    return 3\n", CandidateStatus::RegressionFailed),
            candidate(0, 2, "def f(:\n", CandidateStatus::SyntaxFailed),
            CandidatePatch {
                task_id: "t".into(),
                location_set_index: 0,
                sample_index: 3,
                status: CandidateStatus::ApplyFailed,
                edits: Vec::new(),
                unified_diff: None,
                patched_files: BTreeMap::new(),
                ambiguous_match: false,
                failure: Some("x".into()),
            },
        ];
        let counts = filter_counts(&candidates);
        assert_eq!(
            counts,
            FilterCounts {
                total: 4,
                applied: 3,
                syntax_passed: 2,
                survivors: 1
            }
        );
    }
}
