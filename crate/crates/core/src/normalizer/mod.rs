//! Canonical normalization of raw LAMMPS input.
//!
//! The passes run in a fixed order: comment and noise stripping,
//! continuation merging, loop unrolling, and variable resolution. Each
//! canonical line remembers which raw lines produced it.

pub mod expr;
mod loops;
mod resolve;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexical::{self, QuoteState};

pub use loops::expand_loops;
pub use resolve::{resolve_variables, resolve_with_environment, Binding, Redefinition, VarStyle, VariableEnvironment};

/// Commands dropped before anything else looks at the script.
pub const DEFAULT_NOISE_COMMANDS: &[&str] = &["print", "log", "echo", "shell"];

/// Default ceiling on the number of lines loop unrolling may produce.
pub const DEFAULT_LOOP_BUDGET: usize = 100_000;

/// Commands that may never appear in canonical output.
pub const FORBIDDEN_CANONICAL_COMMANDS: &[&str] =
    &["variable", "print", "log", "echo", "shell", "label", "jump", "next"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawScript {
    source: String,
    origin: String,
}

impl RawScript {
    /// CRLF line endings are folded to LF here.
    pub fn new(source: impl Into<String>, origin: impl Into<String>) -> Self {
        let source: String = source.into();
        let source = if source.contains('\r') { source.replace("\r\n", "\n") } else { source };
        RawScript { source, origin: origin.into() }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn origin(&self) -> &str {
        &self.origin
    }

    /// Raw lines with 1-based provenance.
    pub fn lines(&self) -> Vec<SourceLine> {
        self.source.lines().enumerate().map(|(i, text)| SourceLine::new(text, vec![i + 1])).collect()
    }

    pub fn line_count(&self) -> usize {
        self.source.lines().count()
    }
}

/// A line of text plus the raw line numbers it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceLine {
    pub text: String,
    pub provenance: Vec<usize>,
}

impl SourceLine {
    pub fn new(text: impl Into<String>, provenance: Vec<usize>) -> Self {
        SourceLine { text: text.into(), provenance }
    }

    /// First raw line, used when reporting.
    pub fn line(&self) -> usize {
        self.provenance.first().copied().unwrap_or(0)
    }

    pub(crate) fn command(&self) -> Option<&str> {
        lexical::first_word(&self.text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalScript {
    pub origin: String,
    pub lines: Vec<SourceLine>,
    pub steps_applied: Vec<String>,
}

impl CanonicalScript {
    pub fn new(origin: impl Into<String>, lines: Vec<SourceLine>) -> Self {
        CanonicalScript { origin: origin.into(), lines, steps_applied: Vec::new() }
    }

    /// Lines joined with LF, with a trailing LF when non-empty.
    pub fn text(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            out.push_str(&line.text);
            out.push('\n');
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    /// Every violated canonical-form rule, one message per violation.
    pub fn invariant_violations(&self, raw_line_count: Option<usize>) -> Vec<String> {
        let mut out = Vec::new();
        for (i, line) in self.lines.iter().enumerate() {
            let n = i + 1;
            if lexical::unquoted_hash(&line.text).is_some() {
                out.push(format!("line {n}: unquoted `#`"));
            }
            if line.text.trim_end().ends_with('&') {
                out.push(format!("line {n}: trailing continuation"));
            }
            if lexical::contains_unquoted(&line.text, b'$') {
                out.push(format!("line {n}: unresolved `$` reference"));
            }
            if let Some(cmd) = line.command() {
                if FORBIDDEN_CANONICAL_COMMANDS.contains(&cmd) {
                    out.push(format!("line {n}: `{cmd}` command survived"));
                }
            }
            if line.provenance.is_empty() {
                out.push(format!("line {n}: empty provenance"));
            }
            if let Some(max) = raw_line_count {
                if line.provenance.iter().any(|&p| p == 0 || p > max) {
                    out.push(format!("line {n}: provenance out of range"));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormalizeErrorKind {
    UnresolvableVariable,
    MalformedExpression,
    UnterminatedLoop,
    LoopBudgetExceeded,
    UnknownContinuation,
}

impl fmt::Display for NormalizeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{}line {line}: {kind}: {message}", .pass.as_ref().map(|p| format!("[{p}] ")).unwrap_or_default())]
pub struct NormalizeError {
    pub kind: NormalizeErrorKind,
    /// Raw source line (1-based).
    pub line: usize,
    pub message: String,
    pub pass: Option<String>,
}

impl NormalizeError {
    pub(crate) fn new(kind: NormalizeErrorKind, line: usize, message: impl Into<String>) -> Self {
        NormalizeError { kind, line, message: message.into(), pass: None }
    }

    fn in_pass(mut self, pass: &str) -> Self {
        self.pass = Some(pass.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizeConfig {
    pub noise_commands: Vec<String>,
    pub loop_budget: usize,
}

impl Default for NormalizeConfig {
    fn default() -> Self {
        NormalizeConfig {
            noise_commands: DEFAULT_NOISE_COMMANDS.iter().map(|s| s.to_string()).collect(),
            loop_budget: DEFAULT_LOOP_BUDGET,
        }
    }
}

pub const PASS_STRIP: &str = "strip_comments_and_noise";
pub const PASS_MERGE: &str = "merge_continuations";
pub const PASS_LOOPS: &str = "expand_loops";
pub const PASS_RESOLVE: &str = "resolve_variables";

/// Drop comments, noise commands and blank lines; trim trailing blanks.
///
/// A noise command that continues onto following lines takes those
/// lines with it.
pub fn strip_comments_and_noise(lines: &[SourceLine], noise: &[String]) -> Vec<SourceLine> {
    let mut out = Vec::with_capacity(lines.len());
    let mut swallowing = false;
    for line in lines {
        let text = match lexical::unquoted_hash(&line.text) {
            Some(i) => &line.text[..i],
            None => line.text.as_str(),
        };
        let text = text.trim_end();
        if swallowing {
            swallowing = text.ends_with('&');
            continue;
        }
        if text.trim().is_empty() {
            continue;
        }
        if let Some(cmd) = lexical::first_word(text) {
            if noise.iter().any(|n| n == cmd) {
                swallowing = text.ends_with('&');
                continue;
            }
        }
        out.push(SourceLine::new(text, line.provenance.clone()));
    }
    out
}

/// Join every line ending in `&` with its successor.
pub fn merge_continuations(lines: &[SourceLine]) -> Result<Vec<SourceLine>, NormalizeError> {
    let mut out: Vec<SourceLine> = Vec::with_capacity(lines.len());
    let mut pending: Option<SourceLine> = None;
    for line in lines {
        let mut current = match pending.take() {
            Some(mut acc) => {
                acc.text.push(' ');
                acc.text.push_str(line.text.trim_start());
                acc.provenance.extend(line.provenance.iter().copied());
                acc
            }
            None => line.clone(),
        };
        if ends_with_continuation(&current.text) {
            let trimmed = current.text.trim_end();
            current.text = trimmed[..trimmed.len() - 1].trim_end().to_string();
            pending = Some(current);
        } else {
            out.push(current);
        }
    }
    if let Some(dangling) = pending {
        let last = dangling.provenance.last().copied().unwrap_or(0);
        return Err(NormalizeError::new(
            NormalizeErrorKind::UnknownContinuation,
            last,
            "script ends with a continuation `&`",
        ));
    }
    Ok(out)
}

fn ends_with_continuation(text: &str) -> bool {
    let trimmed = text.trim_end();
    if !trimmed.ends_with('&') {
        return false;
    }
    let mut state = QuoteState::default();
    for b in trimmed.bytes() {
        state.step(b);
    }
    // an `&` that closes inside an open quote is literal text
    !state.is_open()
}

/// Run every pass in order.
pub fn normalize(raw: &RawScript, config: &NormalizeConfig) -> Result<CanonicalScript, NormalizeError> {
    normalize_with_environment(raw, config).map(|(script, _)| script)
}

/// [`normalize`], also returning the final variable bindings.
pub fn normalize_with_environment(
    raw: &RawScript,
    config: &NormalizeConfig,
) -> Result<(CanonicalScript, VariableEnvironment), NormalizeError> {
    let lines = raw.lines();
    let lines = strip_comments_and_noise(&lines, &config.noise_commands);
    let lines = merge_continuations(&lines).map_err(|e| e.in_pass(PASS_MERGE))?;
    let lines = expand_loops(&lines, config.loop_budget).map_err(|e| e.in_pass(PASS_LOOPS))?;
    let (mut script, env) = resolve_with_environment(&lines, raw.origin()).map_err(|e| e.in_pass(PASS_RESOLVE))?;
    script.steps_applied = [PASS_STRIP, PASS_MERGE, PASS_LOOPS, PASS_RESOLVE].iter().map(|s| s.to_string()).collect();
    Ok((script, env))
}
