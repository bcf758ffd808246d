//! Immutable view of a repository checkout at one commit.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

/// Contents of one file in a snapshot. Non-UTF-8 files are kept as raw bytes;
/// they show up in the repository structure but are excluded from parsing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FileContent {
    Text(String),
    Binary(Vec<u8>),
}

impl FileContent {
    pub fn as_text(&self) -> Option<&str> {
        match self {
            FileContent::Text(s) => Some(s),
            FileContent::Binary(_) => None,
        }
    }

    pub fn byte_len(&self) -> usize {
        match self {
            FileContent::Text(s) => s.len(),
            FileContent::Binary(b) => b.len(),
        }
    }
}

/// Controls which files a snapshot loads and which are treated as source.
#[derive(Debug, Clone)]
pub struct SnapshotOptions {
    /// Extensions (with leading dot) considered source files for parsing.
    pub source_extensions: Vec<String>,
    /// Directory names skipped entirely during the walk.
    pub ignored_dirs: Vec<String>,
    /// Name of the analyzed language. Single-language analysis only.
    pub source_language: String,
}

impl Default for SnapshotOptions {
    fn default() -> Self {
        SnapshotOptions {
            source_extensions: vec![".py".to_string()],
            ignored_dirs: vec![
                ".git".to_string(),
                ".hg".to_string(),
                ".svn".to_string(),
                "__pycache__".to_string(),
                ".tox".to_string(),
                ".venv".to_string(),
                "node_modules".to_string(),
            ],
            source_language: "python".to_string(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("repository root {0} is not a directory")]
    NotADirectory(PathBuf),
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("path {0} escapes the repository root")]
    PathEscapes(String),
}

/// Immutable file map for one repository checkout. Paths are relative,
/// normalized with forward slashes, and unique. Contents never change after
/// construction, so a snapshot is safe to share across threads.
#[derive(Debug, Clone)]
pub struct RepoSnapshot {
    root_id: String,
    files: BTreeMap<String, FileContent>,
    options: SnapshotOptions,
}

impl RepoSnapshot {
    /// Builds a snapshot from an in-memory file list. Intended for tests and
    /// for synthetic repositories.
    pub fn from_files<I, P, C>(root_id: &str, files: I) -> Self
    where
        I: IntoIterator<Item = (P, C)>,
        P: Into<String>,
        C: Into<String>,
    {
        let files = files
            .into_iter()
            .map(|(p, c)| (normalize_path(&p.into()), FileContent::Text(c.into())))
            .collect();
        RepoSnapshot {
            root_id: root_id.to_string(),
            files,
            options: SnapshotOptions::default(),
        }
    }

    /// Reads a repository checkout from disk.
    pub fn from_dir(root: &Path, root_id: &str, options: SnapshotOptions) -> Result<Self, SnapshotError> {
        if !root.is_dir() {
            return Err(SnapshotError::NotADirectory(root.to_path_buf()));
        }
        let mut files = BTreeMap::new();
        walk(root, root, &options, &mut files)?;
        Ok(RepoSnapshot {
            root_id: root_id.to_string(),
            files,
            options,
        })
    }

    pub fn root_id(&self) -> &str {
        &self.root_id
    }

    pub fn source_language(&self) -> &str {
        &self.options.source_language
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    /// All paths in deterministic (sorted) order.
    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(|s| s.as_str())
    }

    pub fn contains(&self, path: &str) -> bool {
        self.files.contains_key(path)
    }

    pub fn content(&self, path: &str) -> Option<&FileContent> {
        self.files.get(path)
    }

    /// Text of a file, or `None` if the path is absent or binary.
    pub fn text(&self, path: &str) -> Option<&str> {
        self.files.get(path).and_then(|c| c.as_text())
    }

    /// Whether a path participates in parsing operations: it must match a
    /// configured source extension and hold UTF-8 text.
    pub fn is_source_file(&self, path: &str) -> bool {
        self.text(path).is_some()
            && self
                .options
                .source_extensions
                .iter()
                .any(|ext| path.ends_with(ext.as_str()))
    }

    /// Source paths in deterministic order.
    pub fn source_paths(&self) -> Vec<&str> {
        self.paths().filter(|p| self.is_source_file(p)).collect()
    }

    /// Number of lines in a text file. A trailing newline does not start an
    /// extra empty line.
    pub fn line_count(&self, path: &str) -> Option<usize> {
        self.text(path).map(count_lines)
    }

    /// Writes every file of the snapshot under `dir`, creating directories as
    /// needed. Used to materialize disposable working copies for test runs.
    pub fn materialize(&self, dir: &Path) -> io::Result<()> {
        for (path, content) in &self.files {
            let target = dir.join(path);
            if let Some(parent) = target.parent() {
                fs::create_dir_all(parent)?;
            }
            match content {
                FileContent::Text(s) => fs::write(&target, s)?,
                FileContent::Binary(b) => fs::write(&target, b)?,
            }
        }
        Ok(())
    }

    /// Copy of the text contents of the given paths, used as the mutable base
    /// for patch application.
    pub fn text_map(&self, paths: &[&str]) -> BTreeMap<String, String> {
        paths
            .iter()
            .filter_map(|p| self.text(p).map(|t| (p.to_string(), t.to_string())))
            .collect()
    }
}

/// Lines in a string, counting a final fragment without trailing newline.
pub fn count_lines(s: &str) -> usize {
    if s.is_empty() {
        return 0;
    }
    let n = s.matches('\n').count();
    if s.ends_with('\n') {
        n
    } else {
        n + 1
    }
}

fn normalize_path(path: &str) -> String {
    path.trim_start_matches("./").replace('\\', "/")
}

fn walk(
    root: &Path,
    dir: &Path,
    options: &SnapshotOptions,
    files: &mut BTreeMap<String, FileContent>,
) -> Result<(), SnapshotError> {
    let entries = fs::read_dir(dir).map_err(|source| SnapshotError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for entry in entries {
        let entry = entry.map_err(|source| SnapshotError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let path = entry.path();
        let name = entry.file_name().to_string_lossy().to_string();
        let ftype = entry.file_type().map_err(|source| SnapshotError::Io {
            path: path.clone(),
            source,
        })?;
        if ftype.is_dir() {
            if options.ignored_dirs.iter().any(|d| d == &name) || name.starts_with('.') {
                continue;
            }
            walk(root, &path, options, files)?;
        } else if ftype.is_file() {
            let rel = path
                .strip_prefix(root)
                .map_err(|_| SnapshotError::PathEscapes(path.display().to_string()))?;
            let rel = rel.to_string_lossy().replace('\\', "/");
            let bytes = fs::read(&path).map_err(|source| SnapshotError::Io {
                path: path.clone(),
                source,
            })?;
            let content = match String::from_utf8(bytes) {
                Ok(text) => FileContent::Text(text),
                Err(e) => FileContent::Binary(e.into_bytes()),
            };
            files.insert(rel, content);
        }
        // Symlinks are skipped: a snapshot is a plain file map.
    }
    Ok(())
}
