//! Running scripts under an external LAMMPS executable.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Name of the input file written into the scratch directory.
pub const INPUT_NAME: &str = "in.lammps";
pub const LOG_NAME: &str = "log.lammps";

/// Scripts run three levels deep so `../../../potentials/` resolves to the
/// potentials directory placed at the scratch root.
const WORK_SUBDIR: &str = "a/b/c";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecOutcome {
    pub success: bool,
    pub exit_code: Option<i32>,
    pub timed_out: bool,
    pub wall_time_ms: u64,
    /// Final non-empty line of the log (stdout/stderr when there is no log).
    pub last_log_line: String,
    /// Kept only when the scratch directory is retained.
    pub log_path: Option<PathBuf>,
}

impl ExecOutcome {
    /// Copy with run-to-run varying fields cleared.
    pub fn without_timing(&self) -> Self {
        ExecOutcome { wall_time_ms: 0, ..self.clone() }
    }
}

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("runner unavailable: {0}")]
    Unavailable(String),
    #[error("runner i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Anything that can execute a script and report how it went.
pub trait Runner: Send + Sync {
    /// `label` names the script, for scratch directory naming.
    fn run(&self, script: &str, label: &str) -> Result<ExecOutcome, RunnerError>;
}

#[derive(Debug, Clone)]
pub struct ExternalRunner {
    exe: PathBuf,
    timeout: Duration,
    potentials: Option<PathBuf>,
    scratch_root: Option<PathBuf>,
}

impl ExternalRunner {
    /// Resolve `exe` on PATH or as a path; fails when it cannot be found.
    pub fn new(exe: impl AsRef<Path>, timeout: Duration) -> Result<Self, RunnerError> {
        let exe = which::which(exe.as_ref())
            .map_err(|e| RunnerError::Unavailable(format!("{}: {e}", exe.as_ref().display())))?;
        Ok(ExternalRunner { exe, timeout, potentials: None, scratch_root: None })
    }

    /// Directory whose files are copied to `<scratch>/potentials`.
    pub fn with_potentials(mut self, dir: impl Into<PathBuf>) -> Self {
        self.potentials = Some(dir.into());
        self
    }

    /// Keep scratch directories under `root` instead of deleting them.
    pub fn with_scratch_root(mut self, root: impl Into<PathBuf>) -> Self {
        self.scratch_root = Some(root.into());
        self
    }

    pub fn executable(&self) -> &Path {
        &self.exe
    }

    fn stage(&self, root: &Path, script: &str) -> Result<PathBuf, RunnerError> {
        let work = root.join(WORK_SUBDIR);
        fs::create_dir_all(&work)?;
        let pots = root.join("potentials");
        fs::create_dir_all(&pots)?;
        if let Some(src) = &self.potentials {
            for entry in fs::read_dir(src)? {
                let entry = entry?;
                if entry.file_type()?.is_file() {
                    fs::copy(entry.path(), pots.join(entry.file_name()))?;
                }
            }
        }
        fs::write(work.join(INPUT_NAME), script)?;
        Ok(work)
    }

    fn execute(&self, work: &Path) -> Result<ExecOutcome, RunnerError> {
        let stdout = fs::File::create(work.join("stdout.txt"))?;
        let stderr = fs::File::create(work.join("stderr.txt"))?;
        let start = Instant::now();
        let mut child = Command::new(&self.exe)
            .args(["-in", INPUT_NAME, "-log", LOG_NAME])
            .current_dir(work)
            .stdin(Stdio::null())
            .stdout(stdout)
            .stderr(stderr)
            .spawn()
            .map_err(|e| RunnerError::Unavailable(format!("{}: {e}", self.exe.display())))?;
        let mut timed_out = false;
        let status = loop {
            if let Some(status) = child.try_wait()? {
                break Some(status);
            }
            if start.elapsed() >= self.timeout {
                let _ = child.kill();
                let _ = child.wait();
                timed_out = true;
                break None;
            }
            std::thread::sleep(Duration::from_millis(5));
        };
        let wall_time_ms = start.elapsed().as_millis() as u64;
        let last_log_line = [LOG_NAME, "stdout.txt", "stderr.txt"]
            .iter()
            .find_map(|name| last_line(&work.join(name)))
            .unwrap_or_default();
        let exit_code = status.and_then(|s| s.code());
        let clean_exit = status.is_some_and(|s| s.success());
        let success = clean_exit && !timed_out && !last_log_line.starts_with("ERROR");
        let last_log_line = if timed_out && last_log_line.is_empty() {
            format!("timeout after {} ms", self.timeout.as_millis())
        } else {
            last_log_line
        };
        Ok(ExecOutcome { success, exit_code, timed_out, wall_time_ms, last_log_line, log_path: None })
    }
}

/// The last `ERROR` line if there is one, else the last non-empty line.
/// LAMMPS follows its error message with an echo of the offending input.
fn last_line(path: &Path) -> Option<String> {
    let bytes = fs::read(path).ok()?;
    let text = String::from_utf8_lossy(&bytes);
    let mut lines = text.lines().rev().map(str::trim).filter(|l| !l.is_empty());
    let last = lines.clone().next()?;
    Some(lines.find(|l| l.starts_with("ERROR")).unwrap_or(last).to_string())
}

fn sanitize(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
}

impl Runner for ExternalRunner {
    fn run(&self, script: &str, label: &str) -> Result<ExecOutcome, RunnerError> {
        match &self.scratch_root {
            Some(root) => {
                let dir = root.join(sanitize(label));
                if dir.exists() {
                    fs::remove_dir_all(&dir)?;
                }
                let work = self.stage(&dir, script)?;
                let mut out = self.execute(&work)?;
                out.log_path = Some(work.join(LOG_NAME));
                Ok(out)
            }
            None => {
                let tmp = tempfile::tempdir()?;
                let work = self.stage(tmp.path(), script)?;
                self.execute(&work)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_executable_is_unavailable() {
        let err = ExternalRunner::new("/definitely/not/a/lammps", Duration::from_secs(1)).unwrap_err();
        assert!(matches!(err, RunnerError::Unavailable(_)));
    }

    #[test]
    fn error_line_wins_over_input_echo() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("log");
        fs::write(&log, "Created 108 atoms\nERROR: Could not find velocity group ID mobile\nLast input line: velocity mobile create 300 1\n\n").unwrap();
        assert_eq!(last_line(&log).unwrap(), "ERROR: Could not find velocity group ID mobile");
        fs::write(&log, "Loop time of 0.01\nTotal wall time: 0:00:00\n").unwrap();
        assert_eq!(last_line(&log).unwrap(), "Total wall time: 0:00:00");
        fs::write(&log, "\n\n").unwrap();
        assert_eq!(last_line(&log), None);
    }

    #[test]
    fn label_sanitizing() {
        assert_eq!(sanitize("gpt-4o/prompt1/3.in"), "gpt-4o_prompt1_3.in");
    }
}
