//! Batch orchestration: run the localize, repair, filter, select pipeline
//! over every task in a dataset, persisting per-task artifacts under the run
//! directory. Task failures are captured in the prediction record and never
//! abort the batch.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use anyhow::Context;
use repomend_core::gateway::{Gateway, TokenUsage};
use repomend_core::localization::Localizer;
use repomend_core::prompts::{PromptTemplates, PROMPT_VERSION};
use repomend_core::repair::{CandidatePatch, CandidateStatus, RepairEngine};
use repomend_core::selection::{
    filter_counts, regression_filter, select, syntax_filter, CommandRunner, FilterCounts,
    RegressionSuite, RegressionVerdict, SelectionOutcome,
};
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::dataset::{Dataset, TaskRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum RunMode {
    /// Sampled repair plus syntax and regression filtering.
    Full,
    /// Only the greedy repair draw per location set.
    GreedyOnly,
    /// All applied candidates go to the vote unfiltered.
    NoFiltering,
}

impl RunMode {
    pub fn label(&self) -> &'static str {
        match self {
            RunMode::Full => "full",
            RunMode::GreedyOnly => "greedy-only",
            RunMode::NoFiltering => "no-filtering",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub task_id: String,
    pub model_patch: String,
    pub usage: TokenUsage,
    pub timing_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Filter and selection artifact for one task, written as `verdicts.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerdictsArtifact {
    pub filter_counts: FilterCounts,
    pub selection: SelectionOutcome,
    pub baseline_failures: Vec<String>,
    pub regression: BTreeMap<String, RegressionVerdict>,
}

pub struct RunOutcome {
    pub predictions: Vec<PredictionRecord>,
}

pub fn run_batch(
    dataset: &Dataset,
    config: &Config,
    gateway: &Gateway,
    mode: RunMode,
    workers: usize,
    out_dir: &Path,
) -> anyhow::Result<RunOutcome> {
    std::fs::create_dir_all(out_dir)?;
    let next_task = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<PredictionRecord>>> =
        Mutex::new(vec![None; dataset.tasks.len()]);

    std::thread::scope(|scope| {
        for _ in 0..workers.max(1) {
            scope.spawn(|| loop {
                let index = next_task.fetch_add(1, Ordering::SeqCst);
                let Some(task) = dataset.tasks.get(index) else {
                    break;
                };
                let prediction = run_task_captured(dataset, task, config, gateway, mode, out_dir);
                results.lock().unwrap()[index] = Some(prediction);
            });
        }
    });

    let predictions: Vec<PredictionRecord> = results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|p| p.expect("every task produces a prediction"))
        .collect();

    crate::dataset::write_jsonl(&out_dir.join("predictions.jsonl"), &predictions)?;
    write_json(&out_dir.join("ledger.json"), &gateway.ledger())?;
    write_json(
        &out_dir.join("run.json"),
        &serde_json::json!({
            "backend": gateway.backend_name(),
            "mode": mode.label(),
            "prompt_version": PROMPT_VERSION,
            "config": config,
        }),
    )?;
    Ok(RunOutcome { predictions })
}

/// Runs one task, converting every failure (including panics) into a
/// prediction record with an error and an empty patch.
fn run_task_captured(
    dataset: &Dataset,
    task: &TaskRecord,
    config: &Config,
    gateway: &Gateway,
    mode: RunMode,
    out_dir: &Path,
) -> PredictionRecord {
    let started = Instant::now();
    let attempt = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
        run_task(dataset, task, config, gateway, mode, out_dir)
    }));
    let flattened = match attempt {
        Ok(Ok(patch)) => Ok(patch),
        Ok(Err(e)) => Err(format!("{e:#}")),
        Err(panic) => Err(format!(
            "panicked: {}",
            panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string())
        )),
    };
    let usage = gateway.ledger().task_usage(&task.task_id);
    let timing_seconds = started.elapsed().as_secs_f64();
    match flattened {
        Ok(model_patch) => PredictionRecord {
            task_id: task.task_id.clone(),
            model_patch,
            usage,
            timing_seconds,
            error: None,
        },
        Err(error) => {
            log::error!("{}: {error}", task.task_id);
            PredictionRecord {
                task_id: task.task_id.clone(),
                model_patch: String::new(),
                usage,
                timing_seconds,
                error: Some(error),
            }
        }
    }
}

fn run_task(
    dataset: &Dataset,
    task: &TaskRecord,
    config: &Config,
    gateway: &Gateway,
    mode: RunMode,
    out_dir: &Path,
) -> anyhow::Result<String> {
    let task_dir = out_dir.join("tasks").join(&task.task_id);
    std::fs::create_dir_all(task_dir.join("candidates"))?;
    let snapshot = dataset.snapshot(task).context("loading repository")?;
    let issue = task.issue_report();

    let localizer = Localizer {
        gateway,
        model_name: config.model.name.clone(),
        max_output_tokens: config.model.max_output_tokens,
        top_n_files: config.pipeline.top_n_files,
        k_location_samples: config.pipeline.k_location_samples,
        sample_temperature: config.pipeline.temperature,
        prompts: PromptTemplates::default(),
    };
    let localization = localizer.run(&issue, &snapshot).context("localization")?;
    write_json(&task_dir.join("localization.json"), &localization)?;

    let engine = RepairEngine {
        gateway,
        model_name: config.model.name.clone(),
        max_output_tokens: config.model.max_output_tokens,
        n_samples_per_set: match mode {
            RunMode::GreedyOnly => 0,
            _ => config.pipeline.n_samples_per_set,
        },
        sample_temperature: config.pipeline.temperature,
        context_pad: config.pipeline.context_pad,
        prompts: PromptTemplates::default(),
    };
    let mut candidates = engine
        .run(&issue, &snapshot, &localization.location_sets)
        .context("repair")?;

    let mut baseline_failures = Vec::new();
    let mut regression = BTreeMap::new();
    if mode != RunMode::NoFiltering {
        syntax_filter(&mut candidates);
        if candidates.iter().any(|c| c.status == CandidateStatus::Applied) {
            let runner = CommandRunner {
                command: dataset.resolve_command(&task.test_command),
                timeout: Duration::from_secs(config.run.test_timeout_seconds),
            };
            match RegressionSuite::establish(Box::new(runner), &snapshot) {
                Ok(suite) => {
                    baseline_failures = suite.baseline_failures().iter().cloned().collect();
                    for (key, verdict) in regression_filter(&snapshot, &mut candidates, &suite) {
                        regression.insert(format!("{}:{}", key.0, key.1), verdict);
                    }
                }
                Err(e) => {
                    log::warn!(
                        "{}: baseline suite unavailable, candidates left unjudged: {e}",
                        task.task_id
                    );
                    for candidate in candidates.iter_mut() {
                        if candidate.status == CandidateStatus::Applied {
                            candidate.status = CandidateStatus::Survivor;
                            regression.insert(
                                format!(
                                    "{}:{}",
                                    candidate.location_set_index, candidate.sample_index
                                ),
                                RegressionVerdict {
                                    pass: true,
                                    absolute_pass: false,
                                    new_failures: Vec::new(),
                                    timed_out: false,
                                    unjudged: true,
                                    log: e.to_string(),
                                },
                            );
                        }
                    }
                }
            }
        }
    }

    for candidate in &candidates {
        let name = format!(
            "set{}_sample{:02}.json",
            candidate.location_set_index, candidate.sample_index
        );
        write_json(&task_dir.join("candidates").join(name), candidate)?;
    }

    let selection = select(&snapshot, &candidates);
    let model_patch = winner_patch(&candidates, &selection);
    write_json(
        &task_dir.join("verdicts.json"),
        &VerdictsArtifact {
            filter_counts: filter_counts(&candidates),
            selection: selection.clone(),
            baseline_failures,
            regression,
        },
    )?;

    let usage = gateway.ledger().task_usage(&task.task_id);
    write_json(
        &task_dir.join("prediction.json"),
        &serde_json::json!({
            "task_id": task.task_id,
            "model_patch": model_patch,
            "usage": usage,
            "selection_tier": selection.tier,
        }),
    )?;
    Ok(model_patch)
}

fn winner_patch(candidates: &[CandidatePatch], selection: &SelectionOutcome) -> String {
    let Some(winner) = selection.winner else {
        return String::new();
    };
    candidates
        .iter()
        .find(|c| c.order_key() == winner)
        .and_then(|c| c.unified_diff.clone())
        .unwrap_or_default()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
