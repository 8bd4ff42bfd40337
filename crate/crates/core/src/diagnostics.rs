//! Diagnostics shared by the parser and the analyzer.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Code {
    P001,
    P002,
    P003,
    P004,
    P005,
    P006,
    S001,
    S002,
    S003,
    S004,
}

impl Code {
    pub fn as_str(&self) -> &'static str {
        match self {
            Code::P001 => "P001",
            Code::P002 => "P002",
            Code::P003 => "P003",
            Code::P004 => "P004",
            Code::P005 => "P005",
            Code::P006 => "P006",
            Code::S001 => "S001",
            Code::S002 => "S002",
            Code::S003 => "S003",
            Code::S004 => "S004",
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Code::P001 => "UnknownCommand",
            Code::P002 => "ArityMismatch",
            Code::P003 => "TypeMismatch",
            Code::P004 => "UnknownKeyword",
            Code::P005 => "BadEnumValue",
            Code::P006 => "UnterminatedQuote",
            Code::S001 => "UndefinedReference",
            Code::S002 => "DuplicateDefinition",
            Code::S003 => "DanglingUnfix",
            Code::S004 => "ReferenceBeforeDefinition",
        }
    }

    pub fn default_severity(&self) -> Severity {
        match self {
            Code::S002 | Code::S004 => Severity::Warning,
            _ => Severity::Error,
        }
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where a diagnostic points: canonical line index, the raw line it came
/// from, and a 1-based column range within the canonical line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Location {
    pub line_index: usize,
    pub raw_line: usize,
    pub column: usize,
    pub end_column: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: Code,
    pub location: Location,
    pub message: String,
}

impl Diagnostic {
    pub fn new(code: Code, location: Location, message: impl Into<String>) -> Self {
        Diagnostic { severity: code.default_severity(), code, location, message: message.into() }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {}:{} {}",
            self.severity, self.code, self.location.raw_line, self.location.column, self.message
        )
    }
}
