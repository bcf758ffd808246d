//! Command-line front end: run the pipeline over a dataset, evaluate the
//! predictions, aggregate reports, and import external benchmark records.

use std::path::PathBuf;
use std::time::Duration;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use repomend_core::gateway::{CompletionBackend, Gateway, RecordingBackend, ReplayBackend};

use repomend_cli::config::Config;
use repomend_cli::dataset::Dataset;
use repomend_cli::pipeline::RunMode;
use repomend_cli::{backend, dataset, evaluate, import_bench, metrics, pipeline};

#[derive(Parser)]
#[command(
    name = "repomend",
    about = "Resolves repository issue reports by localizing the fault and voting over model-sampled patches"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendKind {
    /// Call the configured completions API.
    Live,
    /// Call the API and persist every completion as a transcript.
    Record,
    /// Serve completions from recorded transcripts only; no network.
    Replay,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline over every task in a dataset.
    Run {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = BackendKind::Replay)]
        backend: BackendKind,
        #[arg(long, value_enum, default_value_t = RunMode::Full)]
        mode: RunMode,
        #[arg(long, default_value_t = 4)]
        workers: usize,
        #[arg(long)]
        output: PathBuf,
        /// Transcript directory; defaults to the configured directory next to
        /// the dataset file.
        #[arg(long)]
        transcripts: Option<PathBuf>,
    },
    /// Judge a run's predictions for resolution and edit-location overlap.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        /// Run directory produced by `run`.
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value_t = 120)]
        timeout_seconds: u64,
    },
    /// Aggregate one or more evaluated runs into a report.
    Report {
        /// Run directory, optionally labeled as `label=dir`. Repeatable.
        #[arg(long, required = true)]
        run: Vec<String>,
        /// Directory for report.json and report.txt; defaults to the first
        /// run directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Convert published benchmark records into a task dataset.
    ImportBench {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Directory containing per-repo checkouts named owner__name,
        /// recorded relative to the output dataset.
        #[arg(long, default_value = "repos")]
        repos_dir: String,
        #[arg(long, default_value = "python -m pytest -x -q")]
        test_command: String,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = dispatch(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run {
            dataset,
            config,
            backend,
            mode,
            workers,
            output,
            transcripts,
        } => run(dataset, config, backend, mode, workers, output, transcripts),
        Command::Evaluate {
            dataset,
            run,
            timeout_seconds,
        } => evaluate(dataset, run, timeout_seconds),
        Command::Report { run, output } => report(run, output),
        Command::ImportBench {
            input,
            output,
            repos_dir,
            test_command,
        } => {
            let imported = import_bench::import_bench(&input, &output, &repos_dir, &test_command)?;
            println!("imported {imported} task(s) into {}", output.display());
            Ok(())
        }
    }
}

fn run(
    dataset_path: PathBuf,
    config_path: Option<PathBuf>,
    backend_kind: BackendKind,
    mode: RunMode,
    workers: usize,
    output: PathBuf,
    transcripts: Option<PathBuf>,
) -> anyhow::Result<()> {
    let config = match &config_path {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let dataset = Dataset::load(&dataset_path)?;
    let transcript_dir =
        transcripts.unwrap_or_else(|| dataset.base_dir.join(&config.run.transcript_dir));

    let backend: Box<dyn CompletionBackend> = match backend_kind {
        BackendKind::Live => Box::new(backend::HttpBackend::new(
            &config.model.api_base,
            &config.model.api_key_env,
        )?),
        BackendKind::Record => Box::new(RecordingBackend::new(
            Box::new(backend::HttpBackend::new(
                &config.model.api_base,
                &config.model.api_key_env,
            )?),
            transcript_dir,
        )),
        BackendKind::Replay => Box::new(ReplayBackend::new(transcript_dir)),
    };
    let gateway = Gateway::new(backend, config.model.prices.clone())
        .with_dollar_cap(config.run.dollar_cap);

    let outcome = pipeline::run_batch(&dataset, &config, &gateway, mode, workers, &output)?;
    for prediction in &outcome.predictions {
        match &prediction.error {
            None => println!(
                "{}: ok ({} diff bytes, ${:.4})",
                prediction.task_id,
                prediction.model_patch.len(),
                prediction.usage.dollar_cost
            ),
            Some(error) => println!("{}: FAILED: {error}", prediction.task_id),
        }
    }
    let ledger = gateway.ledger();
    println!(
        "run complete: {} task(s), {} request(s), {} tokens, ${:.4}",
        outcome.predictions.len(),
        ledger.requests.len(),
        ledger.total.total_tokens(),
        ledger.total.dollar_cost
    );
    Ok(())
}

fn evaluate(dataset_path: PathBuf, run_dir: PathBuf, timeout_seconds: u64) -> anyhow::Result<()> {
    let dataset = Dataset::load(&dataset_path)?;
    let predictions: Vec<pipeline::PredictionRecord> =
        dataset::read_jsonl(&run_dir.join("predictions.jsonl"))
            .context("reading predictions.jsonl")?;
    let mut evaluations = Vec::new();
    for task in &dataset.tasks {
        let Some(prediction) = predictions.iter().find(|p| p.task_id == task.task_id) else {
            log::warn!("{}: no prediction in run, skipping", task.task_id);
            continue;
        };
        let snapshot = dataset.snapshot(task)?;
        let command = dataset.resolve_command(task.evaluation_command());
        let judged = evaluate::evaluate_resolution(
            &snapshot,
            &prediction.model_patch,
            &command,
            Duration::from_secs(timeout_seconds),
        )?;
        let correct_location = match &task.gold_patch {
            Some(gold) => {
                Some(evaluate::correct_location(&snapshot, gold, &prediction.model_patch)?)
            }
            None => None,
        };
        let task_dir = run_dir.join("tasks").join(&task.task_id);
        if task_dir.is_dir() {
            std::fs::write(task_dir.join("evaluation_log.txt"), &judged.log)?;
        }
        println!(
            "{}: {} ({})",
            task.task_id,
            if judged.resolved { "resolved" } else { "unresolved" },
            judged.apply_status
        );
        evaluations.push(evaluate::EvaluationRecord {
            task_id: task.task_id.clone(),
            resolved: judged.resolved,
            apply_status: judged.apply_status,
            correct_location,
        });
    }
    dataset::write_jsonl(&run_dir.join("evaluations.jsonl"), &evaluations)?;
    let resolved = evaluations.iter().filter(|e| e.resolved).count();
    println!("evaluated {} task(s): {resolved} resolved", evaluations.len());
    Ok(())
}

fn report(run_args: Vec<String>, output: Option<PathBuf>) -> anyhow::Result<()> {
    let mut runs = Vec::new();
    for arg in &run_args {
        let (label, dir) = match arg.split_once('=') {
            Some((label, dir)) => (label.to_string(), PathBuf::from(dir)),
            None => {
                let dir = PathBuf::from(arg);
                let label = dir
                    .file_name()
                    .map(|n| n.to_string_lossy().to_string())
                    .unwrap_or_else(|| "run".to_string());
                (label, dir)
            }
        };
        runs.push((label, dir));
    }
    let report = metrics::build_report(&runs)?;
    let text = metrics::render_text(&report);
    let out_dir = output.unwrap_or_else(|| runs[0].1.clone());
    std::fs::create_dir_all(&out_dir)?;
    pipeline::write_json(&out_dir.join("report.json"), &report)?;
    std::fs::write(out_dir.join("report.txt"), &text)?;
    print!("{text}");
    println!("report written to {}", out_dir.display());
    Ok(())
}
