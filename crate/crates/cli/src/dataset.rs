//! Task datasets as line-delimited JSON, one task per line, with schema
//! validation that reports the offending line number.

use std::fs;
use std::path::{Path, PathBuf};

use repomend_core::localization::IssueReport;
use repomend_core::snapshot::{RepoSnapshot, SnapshotOptions};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IssueSpec {
    pub title: String,
    pub body: String,
}

/// One resolvable task: a repository state, an issue report, and commands to
/// exercise the repository's tests.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskRecord {
    pub task_id: String,
    /// Checkout directory, relative to the dataset file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repo_root: Option<String>,
    /// Tar archive of the checkout, relative to the dataset file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repo_archive: Option<String>,
    pub base_commit: String,
    pub issue: IssueSpec,
    /// Regression suite command, run from the checkout root.
    pub test_command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_patch: Option<String>,
    /// Resolution check command; falls back to `test_command` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation_tests: Option<String>,
}

impl TaskRecord {
    pub fn issue_report(&self) -> IssueReport {
        IssueReport {
            task_id: self.task_id.clone(),
            title: self.issue.title.clone(),
            body: self.issue.body.clone(),
        }
    }

    pub fn evaluation_command(&self) -> &str {
        self.evaluation_tests.as_deref().unwrap_or(&self.test_command)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("{path}:{line}: {message}")]
    Invalid {
        path: String,
        line: usize,
        message: String,
    },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug)]
pub struct Dataset {
    pub tasks: Vec<TaskRecord>,
    /// Directory of the dataset file; repo paths resolve against it.
    pub base_dir: PathBuf,
}

impl Dataset {
    pub fn load(path: &Path) -> Result<Dataset, SchemaError> {
        let display = path.display().to_string();
        let raw = fs::read_to_string(path).map_err(|source| SchemaError::Io {
            path: display.clone(),
            source,
        })?;
        let base_dir = path.parent().unwrap_or(Path::new("."));
        let base_dir = base_dir.canonicalize().unwrap_or_else(|_| base_dir.to_path_buf());
        let mut tasks = Vec::new();
        let mut seen_ids = Vec::new();
        for (i, line) in raw.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let invalid = |message: String| SchemaError::Invalid {
                path: display.clone(),
                line: line_no,
                message,
            };
            let task: TaskRecord =
                serde_json::from_str(line).map_err(|e| invalid(e.to_string()))?;
            validate(&task).map_err(invalid)?;
            if seen_ids.contains(&task.task_id) {
                return Err(invalid(format!("duplicate task_id {:?}", task.task_id)));
            }
            seen_ids.push(task.task_id.clone());
            tasks.push(task);
        }
        Ok(Dataset { tasks, base_dir })
    }

    /// Expands `{dataset_dir}` in a task command to the dataset's absolute
    /// directory, letting datasets reference held-out scripts next to the
    /// task file.
    pub fn resolve_command(&self, command: &str) -> String {
        command.replace("{dataset_dir}", &self.base_dir.display().to_string())
    }

    /// Loads the task's repository into a snapshot, from its checkout
    /// directory or by unpacking its archive.
    pub fn snapshot(&self, task: &TaskRecord) -> anyhow::Result<RepoSnapshot> {
        let options = SnapshotOptions::default();
        if let Some(root) = &task.repo_root {
            let dir = self.base_dir.join(root);
            return Ok(RepoSnapshot::from_dir(&dir, &task.task_id, options)?);
        }
        let archive = task.repo_archive.as_ref().expect("validated");
        let archive_path = self.base_dir.join(archive);
        let unpack = tempfile::tempdir()?;
        let status = std::process::Command::new("tar")
            .arg("-xf")
            .arg(&archive_path)
            .arg("-C")
            .arg(unpack.path())
            .status()?;
        anyhow::ensure!(status.success(), "unpacking {} failed", archive_path.display());
        let mut entries: Vec<_> = fs::read_dir(unpack.path())?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .collect();
        let root = if entries.len() == 1 && entries[0].is_dir() {
            entries.remove(0)
        } else {
            unpack.path().to_path_buf()
        };
        Ok(RepoSnapshot::from_dir(&root, &task.task_id, options)?)
    }
}

fn validate(task: &TaskRecord) -> Result<(), String> {
    if task.task_id.trim().is_empty() {
        return Err("task_id is empty".into());
    }
    match (&task.repo_root, &task.repo_archive) {
        (None, None) => return Err("one of repo_root or repo_archive is required".into()),
        (Some(_), Some(_)) => {
            return Err("repo_root and repo_archive are mutually exclusive".into())
        }
        _ => {}
    }
    if task.issue.title.trim().is_empty() {
        return Err("issue.title is empty".into());
    }
    if task.issue.body.trim().is_empty() {
        return Err("issue.body is empty".into());
    }
    if task.test_command.trim().is_empty() {
        return Err("test_command is empty".into());
    }
    Ok(())
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> anyhow::Result<()> {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record)?);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<Vec<T>> {
    let raw = fs::read_to_string(path)?;
    let mut records = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(line)
            .map_err(|e| anyhow::anyhow!("{}:{}: {e}", path.display(), i + 1))?;
        records.push(record);
    }
    Ok(records)
}
