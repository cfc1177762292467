#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::time::Duration;

use scribe_forge::runtime::{ExecutionLimits, ExtractionScript};
use scribe_forge::Triple;

pub const INTERPRETER: &str = "python3 {adapter}";

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn fixture_script(name: &str) -> ExtractionScript {
    let path = fixtures().join("scripts").join(name);
    let source = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    ExtractionScript::new(name, source, INTERPRETER, "https://fixture.test/page").unwrap()
}

pub fn limits(secs: f64) -> ExecutionLimits {
    ExecutionLimits::with_timeout(Duration::from_secs_f64(secs))
}

/// True when the process is gone or only a zombie entry remains.
pub fn process_gone(pid: u32) -> bool {
    match std::fs::read_to_string(format!("/proc/{pid}/stat")) {
        Err(_) => true,
        Ok(stat) => stat
            .rsplit_once(')')
            .and_then(|(_, rest)| rest.split_whitespace().next())
            .is_some_and(|state| state == "Z" || state == "X"),
    }
}

/// Pids the hang fixture reports on stderr: the script itself and its child.
pub fn reported_pids(stderr: &str) -> Vec<u32> {
    stderr
        .lines()
        .find_map(|l| l.strip_prefix("pids "))
        .map(|rest| rest.split_whitespace().filter_map(|p| p.parse().ok()).collect())
        .unwrap_or_default()
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_scribe-forge")
}

/// Runs the binary and returns (exit code, stdout, stderr).
pub fn run_cli<I, S>(args: I) -> (i32, String, String)
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out = std::process::Command::new(bin())
        .args(args)
        .env_remove("SCRIBE_FORGE_CONFIG")
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn ok_cli(args: &[&str]) -> String {
    let (code, stdout, stderr) = run_cli(args);
    assert_eq!(code, 0, "{args:?} failed: {stderr}");
    stdout
}

/// The fixture corpus through pipeline, generate, run-script and eval; every
/// intermediate file lands in `work`. Returns the eval report.
pub fn e2e_chain(work: &Path) -> String {
    let e2e = fixtures().join("e2e");
    let f = |name: &str| e2e.join(name).to_string_lossy().into_owned();
    let w = |name: &str| work.join(name).to_string_lossy().into_owned();
    let config = f("run.toml");
    ok_cli(&[
        "pipeline", "--config", &config, "--in", &f("pages.jsonl"), "--classifier", "classifier",
        "--extractor", "extractor", "--blacklist", &f("blacklist.txt"), "--output-dir", &w(""),
    ]);
    ok_cli(&[
        "generate", "--config", &config, "--examples", &w("examples.jsonl"), "--generator", "generator",
        "--out", &w("transcripts.jsonl"),
    ]);
    ok_cli(&[
        "run-script", "--config", &config, "--scripts", &w("transcripts.jsonl"), "--examples",
        &w("examples.jsonl"), "--out", &w("runs.jsonl"),
    ]);
    ok_cli(&["eval", "--config", &config, "--runs", &w("runs.jsonl"), "--judge", "judge"])
}

pub fn golden_report() -> String {
    std::fs::read_to_string(fixtures().join("e2e/golden_report.json")).expect("golden report")
}

/// Plain two-row Levenshtein over chars.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.chars().enumerate() {
        let mut cur = vec![i + 1];
        for (j, cb) in b.iter().enumerate() {
            cur.push((prev[j + 1] + 1).min(cur[j] + 1).min(prev[j] + usize::from(ca != *cb)));
        }
        prev = cur;
    }
    prev[b.len()]
}

pub fn oracle_similarity(g: &Triple, p: &Triple) -> f64 {
    let a = format!("{} | {} | {}", g.subject, g.predicate, g.object);
    let b = format!("{} | {} | {}", p.subject, p.predicate, p.object);
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        1.0
    } else {
        1.0 - edit_distance(&a, &b) as f64 / longest as f64
    }
}

/// Maximum over injective maps from the smaller side into the larger one.
pub fn brute_force_max(w: &[Vec<f64>]) -> f64 {
    fn go(w: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
        if row == w.len() {
            return 0.0;
        }
        let mut best = f64::NEG_INFINITY;
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                best = best.max(w[row][c] + go(w, row + 1, used));
                used[c] = false;
            }
        }
        best
    }
    if w.is_empty() || w[0].is_empty() {
        return 0.0;
    }
    let (rows, cols) = (w.len(), w[0].len());
    let m: Vec<Vec<f64>> = if rows <= cols {
        w.to_vec()
    } else {
        (0..cols).map(|c| (0..rows).map(|r| w[r][c]).collect()).collect()
    };
    go(&m, 0, &mut vec![false; m[0].len()])
}
