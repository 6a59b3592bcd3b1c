//! QBF backends: the internal expansion evaluator or an external solver run
//! as a subprocess.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use ahltl_core::qbf::{eval_expand_with, to_qcir, to_qdimacs, ExpandConfig, ExpandResult, QbfQuery, Var, Witness};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum QbfFormat {
    Qcir,
    Qdimacs,
}

impl QbfFormat {
    pub fn extension(self) -> &'static str {
        match self {
            QbfFormat::Qcir => "qcir",
            QbfFormat::Qdimacs => "qdimacs",
        }
    }

    pub fn render(self, q: &QbfQuery) -> String {
        match self {
            QbfFormat::Qcir => to_qcir(q),
            QbfFormat::Qdimacs => to_qdimacs(q),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendKind {
    /// Expansion evaluator with a node budget.
    Internal { budget: usize },
    External { path: PathBuf, format: QbfFormat },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverBackend {
    pub kind: BackendKind,
    pub timeout: Option<Duration>,
    /// Keep query files written for external solvers.
    pub keep_artifacts: bool,
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("solver `{0}` does not exist")]
    Missing(PathBuf),
    #[error("solver `{0}` is not executable")]
    NotExecutable(PathBuf),
}

pub const DEFAULT_BUDGET: usize = 20_000_000;

impl SolverBackend {
    pub fn internal(budget: usize) -> Self {
        SolverBackend {
            kind: BackendKind::Internal { budget },
            timeout: None,
            keep_artifacts: false,
        }
    }

    /// An external backend; fails if `path` is not an executable file.
    pub fn external(path: impl Into<PathBuf>, format: QbfFormat) -> Result<Self, BackendError> {
        let path = path.into();
        let meta = std::fs::metadata(&path).map_err(|_| BackendError::Missing(path.clone()))?;
        if !meta.is_file() || !is_executable(&meta) {
            return Err(BackendError::NotExecutable(path));
        }
        Ok(SolverBackend {
            kind: BackendKind::External { path, format },
            timeout: None,
            keep_artifacts: false,
        })
    }

    pub fn with_timeout(mut self, timeout: Option<Duration>) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn name(&self) -> String {
        match &self.kind {
            BackendKind::Internal { .. } => "internal".into(),
            BackendKind::External { path, format } => {
                format!("{} ({})", path.display(), format.extension())
            }
        }
    }
}

#[cfg(unix)]
fn is_executable(meta: &std::fs::Metadata) -> bool {
    use std::os::unix::fs::PermissionsExt;
    meta.permissions().mode() & 0o111 != 0
}

#[cfg(not(unix))]
fn is_executable(_: &std::fs::Metadata) -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Sat,
    Unsat,
    Timeout,
    SolverError(String),
}

impl Verdict {
    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Verdict::Sat => Some(true),
            Verdict::Unsat => Some(false),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Sat => "sat",
            Verdict::Unsat => "unsat",
            Verdict::Timeout => "timeout",
            Verdict::SolverError(_) => "error",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub verdict: Verdict,
    /// Assignment of the leading existential block, when the backend
    /// reports one and the verdict is `Sat`.
    pub witness: Option<Witness>,
    /// Query file kept for inspection.
    pub artifact: Option<PathBuf>,
}

impl SolveResult {
    fn bare(verdict: Verdict) -> Self {
        SolveResult {
            verdict,
            witness: None,
            artifact: None,
        }
    }
}

pub fn solve(q: &QbfQuery, backend: &SolverBackend) -> SolveResult {
    match &backend.kind {
        BackendKind::Internal { budget } => solve_internal(q, *budget, backend.timeout),
        BackendKind::External { path, format } => solve_external(q, path, *format, backend),
    }
}

fn solve_internal(q: &QbfQuery, budget: usize, timeout: Option<Duration>) -> SolveResult {
    let start = Instant::now();
    let stop = move || timeout.is_some_and(|t| start.elapsed() > t);
    let cfg = ExpandConfig {
        budget,
        interrupt: Some(&stop),
    };
    match eval_expand_with(q, &cfg) {
        ExpandResult::Sat(w) => SolveResult {
            verdict: Verdict::Sat,
            witness: Some(w),
            artifact: None,
        },
        ExpandResult::Unsat(_) => SolveResult::bare(Verdict::Unsat),
        ExpandResult::Interrupted => SolveResult::bare(Verdict::Timeout),
        ExpandResult::BudgetExceeded => SolveResult::bare(Verdict::SolverError(format!(
            "internal evaluator exceeded its budget of {budget} nodes; configure an external solver"
        ))),
    }
}

fn solve_external(q: &QbfQuery, exe: &Path, format: QbfFormat, backend: &SolverBackend) -> SolveResult {
    let file = tempfile::Builder::new()
        .prefix("ahltl-")
        .suffix(&format!(".{}", format.extension()))
        .tempfile();
    let mut file = match file {
        Ok(f) => f,
        Err(e) => return SolveResult::bare(Verdict::SolverError(format!("temp file: {e}"))),
    };
    if let Err(e) = file.write_all(format.render(q).as_bytes()).and_then(|_| file.flush()) {
        return SolveResult::bare(Verdict::SolverError(format!("writing query: {e}")));
    }
    let mut result = run_process(exe, file.path(), backend.timeout);
    if backend.keep_artifacts {
        if let Ok((_, path)) = file.keep() {
            result.artifact = Some(path);
        }
    }
    result
}

fn run_process(exe: &Path, query: &Path, timeout: Option<Duration>) -> SolveResult {
    let mut cmd = Command::new(exe);
    cmd.arg(query)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    #[cfg(unix)]
    {
        use std::os::unix::process::CommandExt;
        cmd.process_group(0);
    }
    let child = cmd.spawn();
    let mut child = match child {
        Ok(c) => c,
        Err(e) => return SolveResult::bare(Verdict::SolverError(format!("spawning {}: {e}", exe.display()))),
    };
    let mut out_pipe = child.stdout.take().unwrap();
    let mut err_pipe = child.stderr.take().unwrap();
    let out_reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = out_pipe.read_to_string(&mut s);
        s
    });
    let err_reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = err_pipe.read_to_string(&mut s);
        s
    });
    let start = Instant::now();
    let status = loop {
        match child.try_wait() {
            Ok(Some(st)) => break Some(st),
            Ok(None) => {}
            Err(e) => return SolveResult::bare(Verdict::SolverError(format!("waiting for solver: {e}"))),
        }
        if timeout.is_some_and(|t| start.elapsed() > t) {
            kill_group(&child);
            let _ = child.kill();
            let _ = child.wait();
            break None;
        }
        std::thread::sleep(Duration::from_millis(5));
    };
    let stdout = out_reader.join().unwrap_or_default();
    let stderr = err_reader.join().unwrap_or_default();
    let Some(status) = status else {
        return SolveResult::bare(Verdict::Timeout);
    };
    let verdict = match status.code() {
        Some(10) => Verdict::Sat,
        Some(20) => Verdict::Unsat,
        code => match scan_output(&stdout) {
            Some(v) => v,
            None => Verdict::SolverError(format!(
                "solver exited with {} and no verdict: {}",
                code.map_or("a signal".to_string(), |c| format!("code {c}")),
                stderr.trim()
            )),
        },
    };
    let witness = (verdict == Verdict::Sat).then(|| parse_certificate(&stdout)).flatten();
    SolveResult {
        verdict,
        witness,
        artifact: None,
    }
}

/// Kills the solver's process group so helpers it spawned release the pipes.
#[cfg(unix)]
fn kill_group(child: &std::process::Child) {
    if let Ok(pid) = libc::pid_t::try_from(child.id()) {
        // SAFETY: plain syscall on the group created for this child
        unsafe {
            libc::kill(-pid, libc::SIGKILL);
        }
    }
}

#[cfg(not(unix))]
fn kill_group(_: &std::process::Child) {}

/// Looks for `s cnf 1`/`s cnf 0` or a bare `SAT`/`UNSAT` token.
fn scan_output(stdout: &str) -> Option<Verdict> {
    for line in stdout.lines() {
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["s", "cnf", "1", ..] => return Some(Verdict::Sat),
            ["s", "cnf", "0", ..] => return Some(Verdict::Unsat),
            _ => {}
        }
        for w in &words {
            match w.to_ascii_uppercase().as_str() {
                "UNSAT" | "UNSATISFIABLE" => return Some(Verdict::Unsat),
                "SAT" | "SATISFIABLE" => return Some(Verdict::Sat),
                _ => {}
            }
        }
    }
    None
}

/// Reads QDIMACS-style `V <lit> ... 0` lines.
fn parse_certificate(stdout: &str) -> Option<Witness> {
    let mut assignment = Vec::new();
    for line in stdout.lines() {
        let mut words = line.split_whitespace();
        if words.next() != Some("V") {
            continue;
        }
        for w in words {
            let lit: i64 = w.parse().ok()?;
            if lit != 0 {
                assignment.push((Var(lit.unsigned_abs() as u32), lit > 0));
            }
        }
    }
    (!assignment.is_empty()).then_some(Witness { assignment })
}
