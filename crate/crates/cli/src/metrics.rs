//! Report aggregation over one or more finished runs: resolution rate, cost,
//! localization funnel, candidate filtering funnel, and selection tiers,
//! rendered as JSON and as text tables. Aggregation is a deterministic fold
//! over sorted task ids and never includes wall-clock timing.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use repomend_core::localization::LocalizationArtifact;
use serde::{Deserialize, Serialize};

use crate::dataset::read_jsonl;
use crate::evaluate::EvaluationRecord;
use crate::pipeline::{PredictionRecord, VerdictsArtifact};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocationPercentages {
    pub graded_tasks: usize,
    pub line_pct: f64,
    pub function_pct: f64,
    pub file_pct: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunnelReport {
    pub tasks_with_localization: usize,
    pub avg_repo_loc: f64,
    pub avg_file_loc: f64,
    pub avg_element_loc: f64,
    pub avg_location_loc: f64,
    pub file_pct_of_repo: f64,
    pub element_pct_of_repo: f64,
    pub location_pct_of_repo: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateReport {
    pub total: usize,
    pub applied: usize,
    pub syntax_passed: usize,
    pub survivors: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub tasks: usize,
    pub failed_tasks: usize,
    pub resolved: usize,
    pub resolved_pct: f64,
    pub avg_cost_dollars: f64,
    pub avg_tokens: f64,
    pub correct_location: LocationPercentages,
    pub funnel: FunnelReport,
    pub candidates: CandidateReport,
    pub tiers: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub runs: BTreeMap<String, RunReport>,
}

pub fn build_report(runs: &[(String, std::path::PathBuf)]) -> anyhow::Result<Report> {
    let mut report = Report {
        runs: BTreeMap::new(),
    };
    for (label, dir) in runs {
        let run = summarize_run(dir)
            .with_context(|| format!("summarizing run {label} at {}", dir.display()))?;
        report.runs.insert(label.clone(), run);
    }
    Ok(report)
}

fn summarize_run(dir: &Path) -> anyhow::Result<RunReport> {
    let predictions: Vec<PredictionRecord> = read_jsonl(&dir.join("predictions.jsonl"))
        .context("reading predictions.jsonl (produce it with `run`)")?;
    let evaluations: Vec<EvaluationRecord> = read_jsonl(&dir.join("evaluations.jsonl"))
        .context("reading evaluations.jsonl (produce it with `evaluate`)")?;

    let by_id: BTreeMap<&str, &PredictionRecord> = predictions
        .iter()
        .map(|p| (p.task_id.as_str(), p))
        .collect();
    let evaluations_by_id: BTreeMap<&str, &EvaluationRecord> = evaluations
        .iter()
        .map(|e| (e.task_id.as_str(), e))
        .collect();

    let tasks = by_id.len();
    anyhow::ensure!(tasks > 0, "run has no predictions");
    let failed_tasks = by_id.values().filter(|p| p.error.is_some()).count();
    let mut resolved = 0;
    let mut cost = 0.0;
    let mut tokens = 0u64;
    let mut graded = 0usize;
    let (mut line_ok, mut function_ok, mut file_ok) = (0usize, 0usize, 0usize);

    for (task_id, prediction) in &by_id {
        cost += prediction.usage.dollar_cost;
        tokens += prediction.usage.total_tokens();
        if let Some(evaluation) = evaluations_by_id.get(task_id) {
            if evaluation.resolved {
                resolved += 1;
            }
            if let Some(location) = &evaluation.correct_location {
                graded += 1;
                line_ok += location.line as usize;
                function_ok += location.function as usize;
                file_ok += location.file as usize;
            }
        }
    }

    let mut funnel = FunnelReport {
        tasks_with_localization: 0,
        avg_repo_loc: 0.0,
        avg_file_loc: 0.0,
        avg_element_loc: 0.0,
        avg_location_loc: 0.0,
        file_pct_of_repo: 0.0,
        element_pct_of_repo: 0.0,
        location_pct_of_repo: 0.0,
    };
    let mut candidates = CandidateReport {
        total: 0,
        applied: 0,
        syntax_passed: 0,
        survivors: 0,
    };
    let mut tiers: BTreeMap<String, usize> = BTreeMap::new();
    let (mut repo_loc, mut file_loc, mut element_loc, mut location_loc) = (0usize, 0usize, 0usize, 0usize);

    for task_id in by_id.keys() {
        let task_dir = dir.join("tasks").join(task_id);
        if let Ok(raw) = std::fs::read_to_string(task_dir.join("localization.json")) {
            let artifact: LocalizationArtifact =
                serde_json::from_str(&raw).context("parsing localization.json")?;
            funnel.tasks_with_localization += 1;
            repo_loc += artifact.funnel.repo_loc;
            file_loc += artifact.funnel.file_loc;
            element_loc += artifact.funnel.element_loc;
            location_loc += artifact.funnel.location_loc;
        }
        if let Ok(raw) = std::fs::read_to_string(task_dir.join("verdicts.json")) {
            let artifact: VerdictsArtifact =
                serde_json::from_str(&raw).context("parsing verdicts.json")?;
            candidates.total += artifact.filter_counts.total;
            candidates.applied += artifact.filter_counts.applied;
            candidates.syntax_passed += artifact.filter_counts.syntax_passed;
            candidates.survivors += artifact.filter_counts.survivors;
            let tier = serde_json::to_value(artifact.selection.tier)?
                .as_str()
                .unwrap_or("unknown")
                .to_string();
            *tiers.entry(tier).or_default() += 1;
        }
    }
    if funnel.tasks_with_localization > 0 {
        let n = funnel.tasks_with_localization as f64;
        funnel.avg_repo_loc = repo_loc as f64 / n;
        funnel.avg_file_loc = file_loc as f64 / n;
        funnel.avg_element_loc = element_loc as f64 / n;
        funnel.avg_location_loc = location_loc as f64 / n;
        if repo_loc > 0 {
            funnel.file_pct_of_repo = percent(file_loc, repo_loc);
            funnel.element_pct_of_repo = percent(element_loc, repo_loc);
            funnel.location_pct_of_repo = percent(location_loc, repo_loc);
        }
    }

    Ok(RunReport {
        tasks,
        failed_tasks,
        resolved,
        resolved_pct: percent(resolved, tasks),
        avg_cost_dollars: cost / tasks as f64,
        avg_tokens: tokens as f64 / tasks as f64,
        correct_location: LocationPercentages {
            graded_tasks: graded,
            line_pct: percent_or_zero(line_ok, graded),
            function_pct: percent_or_zero(function_ok, graded),
            file_pct: percent_or_zero(file_ok, graded),
        },
        funnel,
        candidates,
        tiers,
    })
}

fn percent(part: usize, whole: usize) -> f64 {
    part as f64 * 100.0 / whole as f64
}

fn percent_or_zero(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        percent(part, whole)
    }
}

pub fn render_text(report: &Report) -> String {
    let mut out = String::new();
    let width = report
        .runs
        .keys()
        .map(|label| label.len())
        .max()
        .unwrap_or(4)
        .max(4);

    out.push_str("== Results ==\n");
    out.push_str(&format!(
        "{:width$}  {:>6}  {:>8}  {:>10}  {:>10}  {:>12}\n",
        "run", "tasks", "resolved", "% resolved", "avg $ cost", "avg # tokens"
    ));
    for (label, run) in &report.runs {
        out.push_str(&format!(
            "{label:width$}  {:>6}  {:>8}  {:>10.2}  {:>10.4}  {:>12.1}\n",
            run.tasks, run.resolved, run.resolved_pct, run.avg_cost_dollars, run.avg_tokens
        ));
    }

    out.push_str("\n== Correct location (% of graded tasks) ==\n");
    out.push_str(&format!(
        "{:width$}  {:>6}  {:>6}  {:>8}  {:>6}\n",
        "run", "graded", "line", "function", "file"
    ));
    for (label, run) in &report.runs {
        let location = &run.correct_location;
        out.push_str(&format!(
            "{label:width$}  {:>6}  {:>6.2}  {:>8.2}  {:>6.2}\n",
            location.graded_tasks, location.line_pct, location.function_pct, location.file_pct
        ));
    }

    out.push_str("\n== Localization funnel (avg LoC, % of repository) ==\n");
    out.push_str(&format!(
        "{:width$}  {:>10}  {:>16}  {:>16}  {:>16}\n",
        "run", "repo", "files", "elements", "locations"
    ));
    for (label, run) in &report.runs {
        let funnel = &run.funnel;
        out.push_str(&format!(
            "{label:width$}  {:>10.1}  {:>9.1} {:>5.1}%  {:>9.1} {:>5.1}%  {:>9.1} {:>5.1}%\n",
            funnel.avg_repo_loc,
            funnel.avg_file_loc,
            funnel.file_pct_of_repo,
            funnel.avg_element_loc,
            funnel.element_pct_of_repo,
            funnel.avg_location_loc,
            funnel.location_pct_of_repo,
        ));
    }

    out.push_str("\n== Candidate filtering (totals across tasks) ==\n");
    out.push_str(&format!(
        "{:width$}  {:>6}  {:>8}  {:>10}  {:>10}\n",
        "run", "drawn", "applied", "syntax ok", "survivors"
    ));
    for (label, run) in &report.runs {
        let c = &run.candidates;
        out.push_str(&format!(
            "{label:width$}  {:>6}  {:>8}  {:>10}  {:>10}\n",
            c.total, c.applied, c.syntax_passed, c.survivors
        ));
    }

    out.push_str("\n== Selection tiers (tasks) ==\n");
    for (label, run) in &report.runs {
        let tiers: Vec<String> = run
            .tiers
            .iter()
            .map(|(tier, count)| format!("{tier}={count}"))
            .collect();
        out.push_str(&format!("{label:width$}  {}\n", tiers.join("  ")));
        if run.failed_tasks > 0 {
            out.push_str(&format!(
                "{:width$}  ({} task(s) failed with errors)\n",
                "", run.failed_tasks
            ));
        }
    }
    out
}
