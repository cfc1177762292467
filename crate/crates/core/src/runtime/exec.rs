use std::io::Read;
use std::os::unix::process::CommandExt;
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{ExecutionLimits, ExtractionScript, RuntimeError};
use crate::html::RawHtmlDocument;
use crate::triple::Triple;

const ADAPTER_SOURCE: &str = include_str!("adapter.py");
const ADAPTER_FILE: &str = "adapter.py";
const SCRIPT_FILE: &str = "script.py";
const PAGE_FILE: &str = "page.html";
const POLL: Duration = Duration::from_millis(5);

/// Bytes of stderr kept in [`ExecutionResult::stderr_tail`].
pub const STDERR_TAIL_BYTES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionStatus {
    Ok,
    Empty,
    Error,
    Timeout,
    MalformedOutput,
}

impl ExecutionStatus {
    pub fn is_ok(self) -> bool {
        self == ExecutionStatus::Ok
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ExecutionStatus::Ok => "ok",
            ExecutionStatus::Empty => "empty",
            ExecutionStatus::Error => "error",
            ExecutionStatus::Timeout => "timeout",
            ExecutionStatus::MalformedOutput => "malformed_output",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub status: ExecutionStatus,
    #[serde(default)]
    pub triples: Vec<Triple>,
    #[serde(default)]
    pub exit_code: Option<i32>,
    #[serde(default)]
    pub stderr_tail: String,
    #[serde(
        rename = "wall_time_ms",
        with = "millis",
        default,
        skip_serializing_if = "Duration::is_zero"
    )]
    pub wall_time: Duration,
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

impl ExecutionResult {
    pub(crate) fn failed(status: ExecutionStatus, message: impl Into<String>) -> Self {
        ExecutionResult {
            status,
            triples: Vec::new(),
            exit_code: None,
            stderr_tail: message.into(),
            wall_time: Duration::ZERO,
        }
    }

    /// Drops the timing so serialized results are reproducible.
    pub fn without_timing(mut self) -> Self {
        self.wall_time = Duration::ZERO;
        self
    }
}

/// What became of the script's stdout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OutputParse {
    /// Parsed; rows of the wrong arity already dropped.
    Triples(Vec<Triple>),
    Malformed,
    Overflow,
}

/// Everything the status depends on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub timed_out: bool,
    pub exit_code: Option<i32>,
    pub output: OutputParse,
}

/// Timeout beats everything, then oversized output, then a non-zero or
/// missing exit code, then an unparseable line; otherwise the triple count
/// decides between ok and empty.
pub fn classify(obs: &Observation) -> ExecutionStatus {
    if obs.timed_out {
        return ExecutionStatus::Timeout;
    }
    if obs.output == OutputParse::Overflow {
        return ExecutionStatus::MalformedOutput;
    }
    if obs.exit_code != Some(0) {
        return ExecutionStatus::Error;
    }
    match &obs.output {
        OutputParse::Triples(t) if t.is_empty() => ExecutionStatus::Empty,
        OutputParse::Triples(_) => ExecutionStatus::Ok,
        _ => ExecutionStatus::MalformedOutput,
    }
}

/// Parses the wire format: exactly one non-blank line holding a JSON array
/// of string arrays. Rows not of length 3 are dropped.
pub fn parse_output(stdout: &[u8]) -> OutputParse {
    let Ok(text) = std::str::from_utf8(stdout) else {
        return OutputParse::Malformed;
    };
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let (Some(line), None) = (lines.next(), lines.next()) else {
        return OutputParse::Malformed;
    };
    let Ok(rows) = serde_json::from_str::<Vec<Vec<Value>>>(line) else {
        return OutputParse::Malformed;
    };
    let mut triples = Vec::with_capacity(rows.len());
    for row in rows {
        let Some(fields) = row
            .iter()
            .map(|v| v.as_str().map(str::to_owned))
            .collect::<Option<Vec<String>>>()
        else {
            return OutputParse::Malformed;
        };
        match <[String; 3]>::try_from(fields) {
            Ok(arr) => triples.push(Triple::from(arr)),
            Err(f) => log::warn!("dropping output row of length {} (expected 3)", f.len()),
        }
    }
    OutputParse::Triples(triples)
}

fn tail(bytes: &[u8], limit: usize) -> String {
    let start = bytes.len().saturating_sub(limit);
    let text = String::from_utf8_lossy(&bytes[start..]);
    // A cut through a multi-byte char shows up as a leading replacement char.
    text.trim_start_matches('\u{FFFD}').to_string()
}

/// Interpreters may report absolute paths inside the run directory; strip
/// the directory so feedback and transcripts do not vary between runs.
fn relative_paths(text: &str, dir: &Path) -> String {
    let mut out = text.to_string();
    for d in [dir.canonicalize().ok(), Some(dir.to_path_buf())].into_iter().flatten() {
        let prefix = format!("{}/", d.display());
        out = out.replace(&prefix, "");
    }
    out
}

fn kill_group(pgid: i32) {
    // SAFETY: plain syscall; a stale group id just yields ESRCH.
    unsafe {
        libc::kill(-pgid, libc::SIGKILL);
    }
}

fn spawn_reader<R: Read + Send + 'static>(
    mut src: R,
    cap: Option<usize>,
    pgid: i32,
    overflow: Arc<AtomicBool>,
) -> JoinHandle<Vec<u8>> {
    std::thread::spawn(move || {
        let mut buf = Vec::new();
        let mut chunk = [0u8; 8192];
        loop {
            let n = match src.read(&mut chunk) {
                Ok(0) | Err(_) => break,
                Ok(n) => n,
            };
            match cap {
                Some(cap) if buf.len() + n > cap => {
                    overflow.store(true, Ordering::SeqCst);
                    kill_group(pgid);
                    break;
                }
                Some(_) => buf.extend_from_slice(&chunk[..n]),
                None => {
                    buf.extend_from_slice(&chunk[..n]);
                    if buf.len() > 2 * STDERR_TAIL_BYTES {
                        buf.drain(..buf.len() - STDERR_TAIL_BYTES);
                    }
                }
            }
        }
        buf
    })
}

/// Expands the interpreter template into argv, with the adapter, script and
/// page paths relative to the working directory.
fn command_line(template: &str) -> Result<Vec<String>, RuntimeError> {
    let mut argv: Vec<String> = template
        .split_whitespace()
        .map(|t| t.replace("{adapter}", ADAPTER_FILE))
        .collect();
    if argv.is_empty() {
        return Err(RuntimeError::InterpreterNotConfigured);
    }
    if !template.contains("{adapter}") {
        return Err(RuntimeError::InvalidInterpreter(template.to_string()));
    }
    argv.push(SCRIPT_FILE.into());
    argv.push(PAGE_FILE.into());
    Ok(argv)
}

fn prepare_dir(dir: &Path, script: &ExtractionScript, page: &RawHtmlDocument) -> Result<(), RuntimeError> {
    let io = |e: std::io::Error| RuntimeError::SpawnFailure(e.to_string());
    std::fs::write(dir.join(ADAPTER_FILE), ADAPTER_SOURCE).map_err(io)?;
    std::fs::write(dir.join(SCRIPT_FILE), &script.source).map_err(io)?;
    std::fs::write(dir.join(PAGE_FILE), &page.html).map_err(io)?;
    Ok(())
}

fn wait_with_deadline(child: &mut Child, pgid: i32, deadline: Instant) -> (bool, Option<i32>) {
    loop {
        match child.try_wait() {
            Ok(Some(status)) => return (false, status.code()),
            Ok(None) if Instant::now() >= deadline => {
                kill_group(pgid);
                let status = child.wait().ok();
                return (true, status.and_then(|s| s.code()));
            }
            Ok(None) => std::thread::sleep(POLL),
            Err(_) => {
                kill_group(pgid);
                return (false, child.wait().ok().and_then(|s| s.code()));
            }
        }
    }
}

/// Runs `script` on `page` in a fresh temporary directory and process group.
/// The whole group is killed at the deadline and again after exit, so no
/// descendant outlives the call.
pub fn execute_script(
    script: &ExtractionScript,
    page: &RawHtmlDocument,
    limits: &ExecutionLimits,
) -> Result<ExecutionResult, RuntimeError> {
    if script.interpreter.trim().is_empty() {
        return Err(RuntimeError::InterpreterNotConfigured);
    }
    let argv = command_line(&script.interpreter)?;
    let dir = tempfile::Builder::new()
        .prefix("scribe-run-")
        .tempdir()
        .map_err(|e| RuntimeError::SpawnFailure(e.to_string()))?;
    prepare_dir(dir.path(), script, page)?;

    let started = Instant::now();
    let mut child = Command::new(&argv[0])
        .args(&argv[1..])
        .current_dir(dir.path())
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0)
        .spawn()
        .map_err(|e| RuntimeError::SpawnFailure(format!("{}: {e}", argv[0])))?;
    let pgid = child.id() as i32;
    let overflow = Arc::new(AtomicBool::new(false));
    let out = spawn_reader(
        child.stdout.take().expect("piped"),
        Some(limits.max_output_bytes),
        pgid,
        overflow.clone(),
    );
    let err = spawn_reader(child.stderr.take().expect("piped"), None, pgid, Arc::default());

    let (timed_out, exit_code) = wait_with_deadline(&mut child, pgid, started + limits.wall_timeout());
    kill_group(pgid);
    let wall_time = started.elapsed();
    let stdout = out.join().unwrap_or_default();
    let stderr = err.join().unwrap_or_default();

    let output = if overflow.load(Ordering::SeqCst) {
        OutputParse::Overflow
    } else {
        parse_output(&stdout)
    };
    let obs = Observation {
        timed_out,
        exit_code,
        output,
    };
    let status = classify(&obs);
    let triples = match (status, obs.output) {
        (ExecutionStatus::Ok, OutputParse::Triples(t)) => t,
        _ => Vec::new(),
    };
    Ok(ExecutionResult {
        status,
        triples,
        exit_code,
        stderr_tail: relative_paths(&tail(&stderr, STDERR_TAIL_BYTES), dir.path()),
        wall_time,
    })
}
