//! Adapter from published issue-resolution benchmark records (one JSON object
//! per line with instance_id, repo, problem_statement, patch, and test
//! fields) into this tool's task schema. Repository checkouts are expected
//! under a local directory, one per repo, named `owner__name`.

use std::path::Path;

use anyhow::Context;
use serde_json::Value;

use crate::dataset::{IssueSpec, TaskRecord};

pub fn import_bench(
    input: &Path,
    output: &Path,
    repos_dir: &str,
    test_command: &str,
) -> anyhow::Result<usize> {
    let raw = std::fs::read_to_string(input)
        .with_context(|| format!("reading {}", input.display()))?;
    let mut tasks = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(line)
            .with_context(|| format!("{}:{}", input.display(), i + 1))?;
        tasks.push(convert(&value, repos_dir, test_command).with_context(|| {
            format!("{}:{}: converting record", input.display(), i + 1)
        })?);
    }
    crate::dataset::write_jsonl(output, &tasks)?;
    Ok(tasks.len())
}

fn convert(value: &Value, repos_dir: &str, test_command: &str) -> anyhow::Result<TaskRecord> {
    let field = |name: &str| -> anyhow::Result<&str> {
        value[name]
            .as_str()
            .ok_or_else(|| anyhow::anyhow!("missing field {name}"))
    };
    let task_id = field("instance_id")?.to_string();
    let repo = field("repo")?;
    let statement = field("problem_statement")?;
    let (title, body) = split_statement(statement);

    let fail_to_pass = test_list(&value["FAIL_TO_PASS"]);
    let evaluation_tests = if fail_to_pass.is_empty() {
        None
    } else {
        Some(format!("python -m pytest -q {}", fail_to_pass.join(" ")))
    };

    Ok(TaskRecord {
        task_id,
        repo_root: Some(format!("{repos_dir}/{}", repo.replace('/', "__"))),
        repo_archive: None,
        base_commit: field("base_commit")?.to_string(),
        issue: IssueSpec { title, body },
        test_command: test_command.to_string(),
        gold_patch: value["patch"].as_str().map(str::to_string),
        evaluation_tests,
    })
}

/// First non-empty line becomes the title; the full statement stays the body.
fn split_statement(statement: &str) -> (String, String) {
    let title = statement
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("untitled issue")
        .chars()
        .take(120)
        .collect::<String>();
    (title, statement.to_string())
}

/// Benchmark test lists arrive either as arrays or JSON-encoded strings.
fn test_list(value: &Value) -> Vec<String> {
    let from_array = |array: &Vec<Value>| {
        array
            .iter()
            .filter_map(|v| v.as_str())
            .map(str::to_string)
            .collect::<Vec<_>>()
    };
    match value {
        Value::Array(array) => from_array(array),
        Value::String(s) => match serde_json::from_str::<Value>(s) {
            Ok(Value::Array(array)) => from_array(&array),
            _ => Vec::new(),
        },
        _ => Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn converts_a_benchmark_record() {
        let value = serde_json::json!({
            "instance_id": "owner__proj-123",
            "repo": "owner/proj",
            "base_commit": "abc123",
            "problem_statement": "Crash on empty input\n\nSteps to reproduce: pass []",
            "patch": "diff text",
            "FAIL_TO_PASS": "[\"tests/test_a.py::test_empty\"]",
        });
        let task = convert(&value, "repos", "python -m pytest -x -q").unwrap();
        assert_eq!(task.task_id, "owner__proj-123");
        assert_eq!(task.repo_root.as_deref(), Some("repos/owner__proj"));
        assert_eq!(task.issue.title, "Crash on empty input");
        assert!(task.issue.body.contains("Steps to reproduce"));
        assert_eq!(
            task.evaluation_tests.as_deref(),
            Some("python -m pytest -q tests/test_a.py::test_empty")
        );
        assert_eq!(task.gold_patch.as_deref(), Some("diff text"));
    }

    #[test]
    fn missing_fields_are_reported() {
        let value = serde_json::json!({"instance_id": "x"});
        assert!(convert(&value, "repos", "cmd").is_err());
    }
}
