//! Rendering of a repository's file tree as prompt text.

use std::collections::BTreeMap;

use crate::snapshot::RepoSnapshot;

/// Rendered tree plus a lookup from rendered entry to its depth. Entries are
/// repository-relative paths; directories carry a trailing slash.
#[derive(Debug, Clone)]
pub struct RepoStructureText {
    pub text: String,
    pub depth_map: BTreeMap<String, usize>,
}

#[derive(Default)]
struct DirNode {
    dirs: BTreeMap<String, DirNode>,
    files: Vec<String>,
}

impl DirNode {
    fn insert(&mut self, components: &[&str]) {
        match components {
            [] => {}
            [file] => self.files.push((*file).to_string()),
            [dir, rest @ ..] => self.dirs.entry((*dir).to_string()).or_default().insert(rest),
        }
    }

    fn render(&self, prefix: &str, depth: usize, out: &mut String, depths: &mut BTreeMap<String, usize>) {
        let indent = "  ".repeat(depth);
        for (name, node) in &self.dirs {
            let path = format!("{prefix}{name}/");
            out.push_str(&indent);
            out.push_str(name);
            out.push_str("/\n");
            depths.insert(path.clone(), depth);
            node.render(&path, depth + 1, out, depths);
        }
        let mut files = self.files.clone();
        files.sort();
        for name in files {
            out.push_str(&indent);
            out.push_str(&name);
            out.push('\n');
            depths.insert(format!("{prefix}{name}"), depth);
        }
    }
}

/// Renders the full tree of a snapshot. The first line is `{root_id}/`; each
/// level below indents by two spaces, listing subdirectories (with trailing
/// slash) before files, both in lexicographic order.
pub fn build_repo_structure(snapshot: &RepoSnapshot) -> RepoStructureText {
    let mut root = DirNode::default();
    for path in snapshot.paths() {
        let components: Vec<&str> = path.split('/').filter(|c| !c.is_empty()).collect();
        root.insert(&components);
    }
    let mut text = format!("{}/\n", snapshot.root_id());
    let mut depth_map = BTreeMap::new();
    root.render("", 1, &mut text, &mut depth_map);
    RepoStructureText { text, depth_map }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snapshot::RepoSnapshot;

    fn snap(paths: &[&str]) -> RepoSnapshot {
        RepoSnapshot::from_files("demo", paths.iter().map(|p| (*p, "")))
    }

    #[test]
    fn empty_snapshot_renders_root_only() {
        let s = build_repo_structure(&snap(&[]));
        assert_eq!(s.text, "demo/\n");
        assert!(s.depth_map.is_empty());
    }

    #[test]
    fn golden_rendering() {
        let s = build_repo_structure(&snap(&[
            "setup.py",
            "src/pkg/__init__.py",
            "src/pkg/core.py",
            "src/pkg/util/text.py",
            "README.md",
        ]));
        let expected = "\
demo/
  src/
    pkg/
      util/
        text.py
      __init__.py
      core.py
  README.md
  setup.py
";
        assert_eq!(s.text, expected);
        assert_eq!(s.depth_map["src/"], 1);
        assert_eq!(s.depth_map["src/pkg/"], 2);
        assert_eq!(s.depth_map["src/pkg/core.py"], 3);
        assert_eq!(s.depth_map["README.md"], 1);
    }

    #[test]
    fn dirs_sort_before_files_at_every_level() {
        let s = build_repo_structure(&snap(&["a.py", "z/b.py", "b.py"]));
        let lines: Vec<&str> = s.text.lines().collect();
        assert_eq!(lines, vec!["demo/", "  z/", "    b.py", "  a.py", "  b.py"]);
    }

    #[test]
    fn every_file_appears_exactly_once_with_walk_depth() {
        let paths = ["x/y/z/deep.py", "x/a.py", "top.py", "x/y/q.py"];
        let s = build_repo_structure(&snap(&paths));
        for p in paths {
            let depth = p.split('/').count();
            assert_eq!(s.depth_map.get(p), Some(&depth), "missing or wrong depth for {p}");
            let name = p.rsplit('/').next().unwrap();
            let line = format!("{}{}", "  ".repeat(depth), name);
            assert!(s.text.lines().any(|l| l == line), "no rendered line {line:?}");
        }
    }
}
