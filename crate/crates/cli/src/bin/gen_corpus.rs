//! Regenerates the bundled scripted corpus. Writes `tasks.jsonl` with gold
//! patches computed from the checked-in repositories, then records completion
//! transcripts for every request the pipeline makes, so `repomend run
//! --backend replay` works offline against the corpus.

use std::fs;
use std::path::{Path, PathBuf};

use repomend_cli::config::Config;
use repomend_cli::dataset::{write_jsonl, Dataset, IssueSpec, TaskRecord};
use repomend_cli::pipeline::{run_batch, RunMode};
use repomend_core::diffs::render_file_diff;
use repomend_core::gateway::{
    CompletionRequest, FnBackend, Gateway, GatewayError, RecordingBackend,
};

const DIFF_CONTEXT: usize = 3;

/// The single edit that resolves a task, used to derive its gold patch.
struct GoldEdit {
    path: &'static str,
    search: &'static str,
    replace: &'static str,
}

/// Scripted model behavior for one task: one canned answer per pipeline
/// stage, plus line-number pins that fail fast if the repository files drift
/// from the answers.
struct Scenario {
    name: &'static str,
    base_commit: &'static str,
    title: &'static str,
    body: &'static str,
    gold: Option<GoldEdit>,
    files_answer: Vec<&'static str>,
    elements_answer: Vec<&'static str>,
    location_samples: [Vec<&'static str>; 4],
    repair_greedy: String,
    repair_samples: Vec<String>,
    pinned_lines: Vec<(&'static str, usize, &'static str)>,
}

fn fenced(lines: &[&str]) -> String {
    format!("```\n{}\n```\n", lines.join("\n"))
}

/// One search/replace block in the exact shape the repair prompt requests.
fn edit(path: &str, search: &str, replace: &str) -> String {
    format!(
        "```python\n### {path}\n<<<<<<< SEARCH\n{search}\n=======\n{replace}\n>>>>>>> REPLACE\n```\n"
    )
}

fn repeat(n: usize, text: &str) -> Vec<String> {
    std::iter::repeat_n(text.to_string(), n).collect()
}

const CALC_SEARCH: &str = r#"    return a // b"#;
const CALC_FIX: &str = r#"    return a / b"#;
const CALC_FIX_PARENS: &str = r#"    return (a / b)"#;
const CALC_FIX_COMMENT: &str = r#"    return a / b  # true division"#;
const CALC_WRONG: &str = r#"    return round(a / b, 2)"#;
const CALC_BAD_SEARCH: &str = r#"    return a // b  # floor"#;
const CALC_DEDENT: &str = r#"return a / b"#;
const CALC_MUL_SEARCH: &str = r#"    return a * b"#;
const CALC_MUL_BREAK: &str = r#"    return a + b"#;

fn calc() -> Scenario {
    let correct = edit("calc/core.py", CALC_SEARCH, CALC_FIX);
    let mut samples = Vec::new();
    samples.extend(repeat(6, &correct));
    samples.extend(repeat(3, &edit("calc/core.py", CALC_SEARCH, CALC_FIX_PARENS)));
    samples.extend(repeat(2, &edit("calc/core.py", CALC_SEARCH, CALC_FIX_COMMENT)));
    samples.extend(repeat(2, &edit("calc/core.py", CALC_SEARCH, CALC_WRONG)));
    samples.extend(repeat(2, &edit("calc/core.py", CALC_BAD_SEARCH, CALC_FIX)));
    samples.push(edit("calc/core.py", CALC_SEARCH, CALC_DEDENT));
    samples.push(format!(
        "{}{}",
        edit("calc/core.py", CALC_SEARCH, CALC_FIX),
        edit("calc/core.py", CALC_MUL_SEARCH, CALC_MUL_BREAK)
    ));
    samples.push(edit("calc/core.py", CALC_SEARCH, CALC_SEARCH));
    samples.extend(repeat(
        2,
        "The division helper already guards against zero; the caller is at fault.\n",
    ));
    assert_eq!(samples.len(), 20);
    Scenario {
        name: "calc",
        base_commit: "3e1f2a9c5b40",
        title: "div() truncates fractional results",
        body: "Calling div(7, 2) returns 3, but the docstring promises the true \
               quotient. Every caller that divides measurements ends up with \
               silently floored values.\n\nExpected: div(7, 2) == 3.5.\nActual: \
               div(7, 2) == 3.",
        gold: Some(GoldEdit {
            path: "calc/core.py",
            search: CALC_SEARCH,
            replace: CALC_FIX,
        }),
        files_answer: vec!["calc/core.py", "calc/__init__.py"],
        elements_answer: vec!["calc/core.py: div"],
        location_samples: [
            vec!["calc/core.py: div"],
            vec!["calc/core.py: line 23"],
            vec!["calc/core.py: line 23"],
            vec!["calc/core.py: line 21"],
        ],
        repair_greedy: correct,
        repair_samples: samples,
        pinned_lines: vec![
            ("calc/core.py", 21, "    if b == 0:"),
            ("calc/core.py", 23, CALC_SEARCH),
        ],
    }
}

const TEXT_SEARCH: &str = r#"    return "".join(p.title() for p in parts)"#;
const TEXT_FIX: &str = r#"    return parts[0].lower() + "".join(p.title() for p in parts[1:])"#;
const TEXT_FIX_QUOTES: &str = r#"    return parts[0].lower() + ''.join(p.title() for p in parts[1:])"#;
const TEXT_WRONG: &str = r#"    return parts[0] + "".join(p.title() for p in parts[1:])"#;
const TEXT_BAD_SEARCH: &str = r#"return "".join(p.title() for p in parts)"#;
const TEXT_BROKEN: &str = r#"    return parts[0].lower() + "".join(p.title() for p in parts[1:]"#;
const TEXT_SNAKE_SEARCH: &str = r#"        out.append(ch.lower())"#;
const TEXT_SNAKE_BREAK: &str = r#"        out.append(ch)"#;

fn textutils() -> Scenario {
    let correct = edit("textutils/case.py", TEXT_SEARCH, TEXT_FIX);
    let mut samples = Vec::new();
    samples.extend(repeat(7, &correct));
    samples.extend(repeat(3, &edit("textutils/case.py", TEXT_SEARCH, TEXT_FIX_QUOTES)));
    samples.extend(repeat(3, &edit("textutils/case.py", TEXT_SEARCH, TEXT_WRONG)));
    samples.extend(repeat(2, &edit("textutils/case.py", TEXT_BAD_SEARCH, TEXT_FIX)));
    samples.push(edit("textutils/case.py", TEXT_SEARCH, TEXT_BROKEN));
    samples.push(format!(
        "{}{}",
        edit("textutils/case.py", TEXT_SEARCH, TEXT_FIX),
        edit("textutils/case.py", TEXT_SNAKE_SEARCH, TEXT_SNAKE_BREAK)
    ));
    samples.push(edit("textutils/case.py", TEXT_SEARCH, TEXT_SEARCH));
    samples.extend(repeat(
        2,
        "Title casing each part is intentional; consumers should lowercase the result.\n",
    ));
    assert_eq!(samples.len(), 20);
    Scenario {
        name: "textutils",
        base_commit: "7c8d9e0f1a2b",
        title: "snake_to_camel returns PascalCase instead of camelCase",
        body: "snake_to_camel(\"hello_world\") produces \"HelloWorld\". The first \
               word must stay lowercase for camelCase identifiers, so the \
               expected output is \"helloWorld\". Single words are affected \
               too: snake_to_camel(\"hello\") should be \"hello\".",
        gold: Some(GoldEdit {
            path: "textutils/case.py",
            search: TEXT_SEARCH,
            replace: TEXT_FIX,
        }),
        files_answer: vec!["textutils/case.py"],
        elements_answer: vec!["textutils/case.py: snake_to_camel"],
        location_samples: [
            vec!["textutils/case.py: line 9"],
            vec!["textutils/case.py: line 9"],
            vec!["textutils/case.py: line 9"],
            vec!["textutils/case.py: line 9"],
        ],
        repair_greedy: correct,
        repair_samples: samples,
        pinned_lines: vec![("textutils/case.py", 9, TEXT_SEARCH)],
    }
}

const INV_SEARCH: &str = r#"        self._counts[name] = self._counts.get(name, 0) - count"#;
const INV_FIX: &str = r#"        have = self._counts.get(name, 0)
        if count > have:
            raise ValueError("insufficient stock")
        self._counts[name] = have - count"#;
const INV_FIX_PARENS: &str = r#"        have = self._counts.get(name, 0)
        if (count > have):
            raise ValueError("insufficient stock")
        self._counts[name] = have - count"#;
const INV_CLAMP: &str = r#"        have = self._counts.get(name, 0)
        self._counts[name] = max(have - count, 0)"#;
const INV_BAD_SEARCH: &str = r#"        self._counts[name] -= count"#;
const INV_BROKEN: &str = r#"        have = self._counts.get(name, 0)
        if count > have
            raise ValueError("insufficient stock")
        self._counts[name] = have - count"#;
const INV_OFF_BY_ONE: &str = r#"        have = self._counts.get(name, 0)
        if count > have:
            raise ValueError("insufficient stock")
        self._counts[name] = have - count - 1"#;

fn inventory() -> Scenario {
    let correct = edit("inventory/store.py", INV_SEARCH, INV_FIX);
    let mut samples = Vec::new();
    samples.extend(repeat(8, &correct));
    samples.extend(repeat(2, &edit("inventory/store.py", INV_SEARCH, INV_FIX_PARENS)));
    samples.extend(repeat(3, &edit("inventory/store.py", INV_SEARCH, INV_CLAMP)));
    samples.extend(repeat(2, &edit("inventory/store.py", INV_BAD_SEARCH, INV_FIX)));
    samples.push(edit("inventory/store.py", INV_SEARCH, INV_BROKEN));
    samples.push(edit("inventory/store.py", INV_SEARCH, INV_OFF_BY_ONE));
    samples.push(edit("inventory/store.py", INV_SEARCH, INV_SEARCH));
    samples.extend(repeat(
        2,
        "Negative quantities are a bookkeeping feature, not a bug.\n",
    ));
    assert_eq!(samples.len(), 20);
    Scenario {
        name: "inventory",
        base_commit: "5a6b7c8d9e0f",
        title: "Store.remove_item lets stock go negative",
        body: "Removing more units than a store holds silently drives the count \
               below zero:\n\n    s = Store()\n    s.add_item(\"bolt\", 1)\n    \
               s.remove_item(\"bolt\", 2)\n    s.quantity(\"bolt\")  # -1\n\n\
               remove_item should raise ValueError when count exceeds the \
               current quantity, and the stock must stay unchanged.",
        gold: Some(GoldEdit {
            path: "inventory/store.py",
            search: INV_SEARCH,
            replace: INV_FIX,
        }),
        files_answer: vec!["inventory/store.py"],
        elements_answer: vec!["inventory/store.py: remove_item"],
        location_samples: [
            vec!["inventory/store.py: line 20"],
            vec!["inventory/store.py: Store.remove_item"],
            vec!["inventory/store.py: line 20"],
            vec!["inventory/store.py: line 20"],
        ],
        repair_greedy: correct,
        repair_samples: samples,
        pinned_lines: vec![("inventory/store.py", 20, INV_SEARCH)],
    }
}

const PARSE_SEARCH: &str = r#"        elif ch.isdigit():
            tokens.append(Token("num", ch))
            i += 1"#;
const PARSE_FIX: &str = r#"        elif ch.isdigit():
            j = i
            while j < len(source) and source[j].isdigit():
                j += 1
            tokens.append(Token("num", source[i:j]))
            i = j"#;
const PARSE_FIX_QUOTES: &str = r#"        elif ch.isdigit():
            j = i
            while j < len(source) and source[j].isdigit():
                j += 1
            tokens.append(Token('num', source[i:j]))
            i = j"#;
const PARSE_FIX_PARENS: &str = r#"        elif ch.isdigit():
            j = i
            while (j < len(source)) and (source[j].isdigit()):
                j += 1
            tokens.append(Token("num", source[i:j]))
            i = j"#;
const PARSE_FIX_COMMENT: &str = r#"        elif ch.isdigit():
            j = i
            while j < len(source) and source[j].isdigit():
                j += 1
            tokens.append(Token("num", source[i:j]))
            i = j  # skip past the digit run"#;
const PARSE_REGEX: &str = r#"        elif ch.isdigit():
            import re
            m = re.match(r"\d+", source[i:])
            tokens.append(Token("num", m.group(0)))
            i += len(m.group(0))"#;
const PARSE_BAD_SEARCH: &str = r#"        elif ch.isnumeric():
            tokens.append(Token("num", ch))
            i += 1"#;
const PARSE_BROKEN: &str = r#"        elif ch.isdigit():
            j = i
            while j < len(source) and source[j].isdigit(:
                j += 1
            tokens.append(Token("num", source[i:j]))
            i = j"#;

fn parserlib() -> Scenario {
    let correct = edit("parserlib/tokenizer.py", PARSE_SEARCH, PARSE_FIX);
    let mut samples = Vec::new();
    samples.extend(repeat(3, &correct));
    samples.extend(repeat(3, &edit("parserlib/tokenizer.py", PARSE_SEARCH, PARSE_FIX_QUOTES)));
    samples.extend(repeat(3, &edit("parserlib/tokenizer.py", PARSE_SEARCH, PARSE_FIX_PARENS)));
    samples.extend(repeat(2, &edit("parserlib/tokenizer.py", PARSE_SEARCH, PARSE_FIX_COMMENT)));
    samples.extend(repeat(6, &edit("parserlib/tokenizer.py", PARSE_SEARCH, PARSE_REGEX)));
    samples.push(edit("parserlib/tokenizer.py", PARSE_BAD_SEARCH, PARSE_FIX));
    samples.push(edit("parserlib/tokenizer.py", PARSE_SEARCH, PARSE_BROKEN));
    samples.push(edit("parserlib/tokenizer.py", PARSE_SEARCH, PARSE_SEARCH));
    assert_eq!(samples.len(), 20);
    Scenario {
        name: "parserlib",
        base_commit: "9f0e1d2c3b4a",
        title: "tokenize splits multi-digit numbers into single-digit tokens",
        body: "tokenize(\"12+3\") returns [num '1', num '2', op '+', num '3'] \
               instead of [num '12', op '+', num '3']. A number token must \
               cover the whole maximal run of digits.",
        gold: Some(GoldEdit {
            path: "parserlib/tokenizer.py",
            search: PARSE_SEARCH,
            replace: PARSE_FIX,
        }),
        files_answer: vec!["parserlib/tokenizer.py"],
        elements_answer: vec!["parserlib/tokenizer.py: tokenize"],
        location_samples: [
            vec!["parserlib/tokenizer.py: line 36"],
            vec!["parserlib/tokenizer.py: line 37"],
            vec!["parserlib/tokenizer.py: tokenize"],
            vec!["parserlib/tokenizer.py: line 36"],
        ],
        repair_greedy: correct,
        repair_samples: samples,
        pinned_lines: vec![
            ("parserlib/tokenizer.py", 36, r#"            tokens.append(Token("num", ch))"#),
            ("parserlib/tokenizer.py", 37, "            i += 1"),
        ],
    }
}

const FLAKY_SEARCH: &str = r#"    return sum(xs) // len(xs)"#;
const FLAKY_FIX: &str = r#"    return sum(xs) / len(xs)"#;
const FLAKY_FIX_PARENS: &str = r#"    return (sum(xs)) / (len(xs))"#;
const FLAKY_GUARD_SEARCH: &str = r#"    if not xs:
        raise ValueError("mean of empty sequence")
    return sum(xs) // len(xs)"#;
const FLAKY_GUARD_GONE: &str = r#"    return sum(xs) / len(xs)"#;
const FLAKY_BAD_SEARCH: &str = r#"    return sum(xs) // max(len(xs), 1)"#;
const FLAKY_BROKEN: &str = r#"    return sum(xs) / len(xs"#;

fn flaky() -> Scenario {
    let correct = edit("flaky/stats.py", FLAKY_SEARCH, FLAKY_FIX);
    let mut samples = Vec::new();
    samples.extend(repeat(9, &correct));
    samples.extend(repeat(3, &edit("flaky/stats.py", FLAKY_SEARCH, FLAKY_FIX_PARENS)));
    samples.extend(repeat(3, &edit("flaky/stats.py", FLAKY_GUARD_SEARCH, FLAKY_GUARD_GONE)));
    samples.extend(repeat(2, &edit("flaky/stats.py", FLAKY_BAD_SEARCH, FLAKY_FIX)));
    samples.push(edit("flaky/stats.py", FLAKY_SEARCH, FLAKY_BROKEN));
    samples.push(edit("flaky/stats.py", FLAKY_SEARCH, FLAKY_SEARCH));
    samples.push("Integer division keeps the statistics exact; leave it as is.\n".to_string());
    assert_eq!(samples.len(), 20);
    Scenario {
        name: "flaky",
        base_commit: "1b2c3d4e5f6a",
        title: "mean() floors the average to an integer",
        body: "mean([1, 2]) returns 1 rather than 1.5, so every downstream \
               statistic is biased low. The mean of integers is not an \
               integer in general; the function must return the exact \
               average.\n\nNote the variance suite has one long-standing \
               failing expectation that is tracked separately.",
        gold: Some(GoldEdit {
            path: "flaky/stats.py",
            search: FLAKY_SEARCH,
            replace: FLAKY_FIX,
        }),
        files_answer: vec!["flaky/stats.py"],
        elements_answer: vec!["flaky/stats.py: mean"],
        location_samples: [
            vec!["flaky/stats.py: line 8"],
            vec!["flaky/stats.py: line 8"],
            vec!["flaky/stats.py: line 8"],
            vec!["flaky/stats.py: line 8"],
        ],
        repair_greedy: correct,
        repair_samples: samples,
        pinned_lines: vec![("flaky/stats.py", 8, FLAKY_SEARCH)],
    }
}

const GARBAGE_BAD_SEARCH: &str = r#"    label = "<" + name + ">""#;
const GARBAGE_REPLACE: &str = r#"    label = "[" + name + "]".ljust(width)"#;
const GARBAGE_HEADERLESS: &str = "```python\n<<<<<<< SEARCH\n    return label.center(width)\n=======\n    return label.ljust(width)\n>>>>>>> REPLACE\n```\n";

fn garbage() -> Scenario {
    let mut samples = Vec::new();
    samples.extend(repeat(8, &edit("garbage/widget.py", GARBAGE_BAD_SEARCH, GARBAGE_REPLACE)));
    samples.extend(repeat(6, GARBAGE_HEADERLESS));
    samples.extend(repeat(
        6,
        "The alignment depends on the terminal font, so no code change applies.\n",
    ));
    assert_eq!(samples.len(), 20);
    Scenario {
        name: "garbage",
        base_commit: "0a9b8c7d6e5f",
        title: "render misaligns labels at odd widths",
        body: "At odd widths the rendered label drifts by one column relative \
               to the design mock. render(\"ok\", 7) should butt the label \
               against the left edge of the cell.",
        gold: None,
        files_answer: vec!["garbage/widget.py"],
        elements_answer: vec!["garbage/widget.py: render"],
        location_samples: [
            vec!["garbage/widget.py: line 7"],
            vec!["garbage/widget.py: line 7"],
            vec!["garbage/widget.py: line 7"],
            vec!["garbage/widget.py: line 7"],
        ],
        repair_greedy:
            "The centering logic matches its docstring; the issue is not actionable.\n".to_string(),
        repair_samples: samples,
        pinned_lines: vec![("garbage/widget.py", 7, "    return label.center(width)")],
    }
}

/// Asserts that every pinned (path, line, content) triple still matches the
/// checked-in repositories, so stale scripted answers fail loudly here
/// instead of producing confusing localization drops later.
fn verify_pins(corpus: &Path, scenarios: &[Scenario]) -> anyhow::Result<()> {
    for sc in scenarios {
        for (path, line, want) in &sc.pinned_lines {
            let full = corpus.join("repos").join(sc.name).join(path);
            let text = fs::read_to_string(&full)?;
            let got = text.lines().nth(line - 1).unwrap_or("");
            anyhow::ensure!(
                got == *want,
                "{} line {line}: scripted answers expect {want:?}, file has {got:?}",
                full.display()
            );
        }
    }
    Ok(())
}

fn gold_patch(corpus: &Path, sc: &Scenario) -> anyhow::Result<Option<String>> {
    let Some(gold) = &sc.gold else {
        return Ok(None);
    };
    let full = corpus.join("repos").join(sc.name).join(gold.path);
    let old = fs::read_to_string(&full)?;
    anyhow::ensure!(
        old.matches(gold.search).count() == 1,
        "gold search text must appear exactly once in {}",
        full.display()
    );
    let new = old.replacen(gold.search, gold.replace, 1);
    let diff = render_file_diff(gold.path, &old, &new, DIFF_CONTEXT)
        .expect("gold edit changes the file");
    Ok(Some(diff))
}

fn task_record(corpus: &Path, sc: &Scenario) -> anyhow::Result<TaskRecord> {
    Ok(TaskRecord {
        task_id: sc.name.to_string(),
        repo_root: Some(format!("repos/{}", sc.name)),
        repo_archive: None,
        base_commit: sc.base_commit.to_string(),
        issue: IssueSpec {
            title: sc.title.to_string(),
            body: sc.body.to_string(),
        },
        test_command: "python3 -m pytest -q tests".to_string(),
        gold_patch: gold_patch(corpus, sc)?,
        evaluation_tests: Some(format!(
            "python3 -m pytest -q {{dataset_dir}}/eval_tests/test_eval_{}.py",
            sc.name
        )),
    })
}

/// Serves canned answers keyed by the issue title and the prompt stage.
fn scripted_answer(
    scenarios: &[Scenario],
    request: &CompletionRequest,
) -> Result<Vec<String>, GatewayError> {
    let prompt = request.prompt_text();
    let unknown = |what: &str| GatewayError::Transport {
        message: format!("scripted backend has no answer for {what}"),
        transient: false,
    };
    let sc = scenarios
        .iter()
        .find(|sc| prompt.contains(sc.title))
        .ok_or_else(|| unknown("this issue"))?;
    if prompt.contains("### Repository structure") {
        Ok(vec![fenced(&sc.files_answer)])
    } else if prompt.contains("### File skeletons") {
        Ok(vec![fenced(&sc.elements_answer)])
    } else if prompt.contains("### Candidate code") {
        Ok(sc.location_samples.iter().map(|s| fenced(s)).collect())
    } else if prompt.contains("### Code excerpts") {
        if request.n_samples == 1 {
            Ok(vec![sc.repair_greedy.clone()])
        } else {
            Ok(sc.repair_samples.clone())
        }
    } else {
        Err(unknown("this prompt shape"))
    }
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let corpus = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "corpus/mini".to_string()),
    );
    anyhow::ensure!(
        corpus.join("config.toml").is_file(),
        "{} does not look like a corpus directory (missing config.toml)",
        corpus.display()
    );

    let scenarios = vec![calc(), textutils(), inventory(), parserlib(), flaky(), garbage()];
    verify_pins(&corpus, &scenarios)?;

    let tasks = scenarios
        .iter()
        .map(|sc| task_record(&corpus, sc))
        .collect::<anyhow::Result<Vec<_>>>()?;
    write_jsonl(&corpus.join("tasks.jsonl"), &tasks)?;
    println!("wrote {} tasks to {}", tasks.len(), corpus.join("tasks.jsonl").display());

    let transcript_dir = corpus.join("transcripts");
    if transcript_dir.exists() {
        fs::remove_dir_all(&transcript_dir)?;
    }
    fs::create_dir_all(&transcript_dir)?;

    let dataset = Dataset::load(&corpus.join("tasks.jsonl"))?;
    let config = Config::load(&corpus.join("config.toml"))?;
    let backend = FnBackend(move |request: &CompletionRequest| {
        scripted_answer(&scenarios, request)
    });
    let recording = RecordingBackend::new(Box::new(backend), &transcript_dir);
    let gateway = Gateway::new(Box::new(recording), config.model.prices.clone());

    let out = tempfile::tempdir()?;
    let outcome = run_batch(&dataset, &config, &gateway, RunMode::Full, 1, out.path())?;
    for p in &outcome.predictions {
        let status = match (&p.error, p.model_patch.is_empty()) {
            (Some(e), _) => format!("error: {e}"),
            (None, true) => "no patch selected".to_string(),
            (None, false) => format!("patch with {} lines", p.model_patch.lines().count()),
        };
        println!("  {}: {status}", p.task_id);
    }
    let count = fs::read_dir(&transcript_dir)?.count();
    println!("recorded {count} transcript files in {}", transcript_dir.display());
    Ok(())
}
