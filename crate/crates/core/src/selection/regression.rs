//! Regression judgment for candidate patches: run the repository's test
//! command against a patched checkout and compare failures against the
//! pristine baseline, which is computed exactly once per task.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::gateway::sha256_hex;
use crate::snapshot::RepoSnapshot;

/// Failure id recorded when a suite fails without any parseable test ids.
pub const WHOLE_SUITE: &str = "<suite>";
/// Failure id recorded when the suite hits the timeout.
pub const TIMEOUT: &str = "<timeout>";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestOutcome {
    pub exit_code: Option<i32>,
    pub timed_out: bool,
    pub failed_tests: BTreeSet<String>,
    pub output: String,
}

impl TestOutcome {
    pub fn passed(&self) -> bool {
        !self.timed_out && self.exit_code == Some(0)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SandboxError {
    #[error("failed to run test command: {0}")]
    Spawn(String),
    #[error("failed to materialize checkout: {0}")]
    Materialize(String),
}

pub trait TestRunner: Send + Sync {
    fn run(&self, repo_dir: &Path) -> Result<TestOutcome, SandboxError>;
}

/// Runs a shell command in the checkout with a wall-clock timeout, killing
/// the process group when it expires.
pub struct CommandRunner {
    pub command: String,
    pub timeout: Duration,
}

impl TestRunner for CommandRunner {
    fn run(&self, repo_dir: &Path) -> Result<TestOutcome, SandboxError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .current_dir(repo_dir)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| SandboxError::Spawn(format!("{}: {e}", self.command)))?;

        let started = Instant::now();
        let mut timed_out = false;
        let exit_code = loop {
            match child.try_wait() {
                Ok(Some(status)) => break status.code(),
                Ok(None) => {
                    if started.elapsed() >= self.timeout {
                        timed_out = true;
                        let _ = child.kill();
                        let _ = child.wait();
                        break None;
                    }
                    std::thread::sleep(Duration::from_millis(20));
                }
                Err(e) => return Err(SandboxError::Spawn(e.to_string())),
            }
        };

        let mut output = String::new();
        if let Some(mut stdout) = child.stdout.take() {
            let _ = stdout.read_to_string(&mut output);
        }
        if let Some(mut stderr) = child.stderr.take() {
            let _ = stderr.read_to_string(&mut output);
        }
        let failed_tests = if timed_out {
            BTreeSet::from([TIMEOUT.to_string()])
        } else if exit_code == Some(0) {
            BTreeSet::new()
        } else {
            let mut failed = parse_failed_tests(&output);
            if failed.is_empty() {
                failed.insert(WHOLE_SUITE.to_string());
            }
            failed
        };
        Ok(TestOutcome {
            exit_code,
            timed_out,
            failed_tests,
            output,
        })
    }
}

/// Collects failing test ids from pytest or unittest output. Pytest summary
/// lines (`FAILED path::test - reason`) keep the node id; unittest verbose
/// lines (`FAIL: test_x (module.Class)`) keep the whole designation.
pub fn parse_failed_tests(output: &str) -> BTreeSet<String> {
    let mut failed = BTreeSet::new();
    for line in output.lines() {
        let line = line.trim();
        for prefix in ["FAILED ", "ERROR "] {
            if let Some(rest) = line.strip_prefix(prefix) {
                if let Some(id) = rest.split_whitespace().next() {
                    if id.contains("::") || id.contains('.') {
                        failed.insert(id.trim_end_matches(':').to_string());
                    }
                }
            }
        }
        for prefix in ["FAIL: ", "ERROR: "] {
            if let Some(rest) = line.strip_prefix(prefix) {
                if rest.contains('(') || rest.starts_with("test") {
                    failed.insert(rest.to_string());
                }
            }
        }
    }
    failed
}

/// Outcome of judging one patched state against the baseline. `pass` is
/// baseline-relative; `absolute_pass` records whether the whole suite passed.
/// `unjudged` marks candidates the sandbox could not evaluate at all.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionVerdict {
    pub pass: bool,
    pub absolute_pass: bool,
    pub new_failures: Vec<String>,
    pub timed_out: bool,
    pub unjudged: bool,
    pub log: String,
}

pub struct RegressionSuite {
    runner: Box<dyn TestRunner>,
    baseline_failures: BTreeSet<String>,
    baseline_log: String,
    cache: Mutex<BTreeMap<String, RegressionVerdict>>,
}

impl RegressionSuite {
    /// Runs the pristine snapshot once to establish the failure baseline.
    pub fn establish(
        runner: Box<dyn TestRunner>,
        snapshot: &RepoSnapshot,
    ) -> Result<Self, SandboxError> {
        let dir = tempfile::tempdir().map_err(|e| SandboxError::Materialize(e.to_string()))?;
        snapshot
            .materialize(dir.path())
            .map_err(|e| SandboxError::Materialize(e.to_string()))?;
        let outcome = runner.run(dir.path())?;
        Ok(RegressionSuite {
            runner,
            baseline_failures: outcome.failed_tests,
            baseline_log: outcome.output,
            cache: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn baseline_failures(&self) -> &BTreeSet<String> {
        &self.baseline_failures
    }

    pub fn baseline_log(&self) -> &str {
        &self.baseline_log
    }

    /// Judges a patched state: a candidate fails iff some test outside the
    /// baseline failures fails, or the suite times out. Verdicts are memoized
    /// by patched-content digest, and sandbox errors yield a flagged
    /// `unjudged` verdict rather than an error.
    pub fn judge(
        &self,
        snapshot: &RepoSnapshot,
        patched_files: &BTreeMap<String, String>,
    ) -> RegressionVerdict {
        let digest = patched_digest(patched_files);
        if let Some(hit) = self.cache.lock().unwrap().get(&digest) {
            return hit.clone();
        }
        let verdict = match self.run_patched(snapshot, patched_files) {
            Ok(outcome) => {
                let new_failures: Vec<String> = outcome
                    .failed_tests
                    .difference(&self.baseline_failures)
                    .cloned()
                    .collect();
                RegressionVerdict {
                    pass: !outcome.timed_out && new_failures.is_empty(),
                    absolute_pass: outcome.passed(),
                    new_failures,
                    timed_out: outcome.timed_out,
                    unjudged: false,
                    log: outcome.output,
                }
            }
            Err(e) => {
                log::warn!("regression run failed, candidate left unjudged: {e}");
                RegressionVerdict {
                    pass: true,
                    absolute_pass: false,
                    new_failures: Vec::new(),
                    timed_out: false,
                    unjudged: true,
                    log: e.to_string(),
                }
            }
        };
        self.cache
            .lock()
            .unwrap()
            .insert(digest, verdict.clone());
        verdict
    }

    fn run_patched(
        &self,
        snapshot: &RepoSnapshot,
        patched_files: &BTreeMap<String, String>,
    ) -> Result<TestOutcome, SandboxError> {
        let dir = tempfile::tempdir().map_err(|e| SandboxError::Materialize(e.to_string()))?;
        snapshot
            .materialize(dir.path())
            .map_err(|e| SandboxError::Materialize(e.to_string()))?;
        for (path, content) in patched_files {
            let target = dir.path().join(path);
            if let Some(parent) = target.parent() {
                std::fs::create_dir_all(parent)
                    .map_err(|e| SandboxError::Materialize(e.to_string()))?;
            }
            std::fs::write(&target, content)
                .map_err(|e| SandboxError::Materialize(e.to_string()))?;
        }
        self.runner.run(dir.path())
    }
}

pub fn patched_digest(patched_files: &BTreeMap<String, String>) -> String {
    let mut blob = String::new();
    for (path, content) in patched_files {
        blob.push_str(path);
        blob.push('\0');
        blob.push_str(content);
        blob.push('\0');
    }
    sha256_hex(blob.as_bytes())
}
