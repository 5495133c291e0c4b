//! Source locations and diagnostics.

use std::fmt;
use std::path::PathBuf;

use serde::Serialize;

/// A 1-based line/column range in a source text.
///
/// Spans are metadata: two spans always compare equal, so AST equality is
/// structural. Use [`Span::same_location`] to compare positions.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Span {
    pub start_line: u32,
    pub start_col: u32,
    pub end_line: u32,
    pub end_col: u32,
}

impl Span {
    pub fn new(start_line: u32, start_col: u32, end_line: u32, end_col: u32) -> Self {
        Span { start_line, start_col, end_line, end_col }
    }

    /// Smallest span covering both `self` and `other`.
    pub fn to(self, other: Span) -> Span {
        if self.is_dummy() {
            return other;
        }
        if other.is_dummy() {
            return self;
        }
        let start = (self.start_line, self.start_col).min((other.start_line, other.start_col));
        let end = (self.end_line, self.end_col).max((other.end_line, other.end_col));
        Span::new(start.0, start.1, end.0, end.1)
    }

    pub fn is_dummy(&self) -> bool {
        self.start_line == 0
    }

    pub fn same_location(&self, other: &Span) -> bool {
        (self.start_line, self.start_col, self.end_line, self.end_col)
            == (other.start_line, other.start_col, other.end_line, other.end_col)
    }
}

impl PartialEq for Span {
    fn eq(&self, _other: &Span) -> bool {
        true
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.start_line, self.start_col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// A located message with a stable code such as `scope.unbound-variable`.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: &'static str,
    pub message: String,
    pub span: Span,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

impl Diagnostic {
    pub fn error(code: &'static str, message: impl Into<String>, span: Span) -> Self {
        Diagnostic { severity: Severity::Error, code, message: message.into(), span, file: None }
    }

    pub fn warning(code: &'static str, message: impl Into<String>, span: Span) -> Self {
        Diagnostic { severity: Severity::Warning, code, message: message.into(), span, file: None }
    }

    pub fn with_file(mut self, file: impl Into<PathBuf>) -> Self {
        self.file = Some(file.into());
        self
    }

    /// Same code, message and location.
    pub fn same_finding(&self, other: &Diagnostic) -> bool {
        self.code == other.code && self.message == other.message && self.span.same_location(&other.span)
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        match &self.file {
            Some(file) => write!(f, "{}:{}: {sev}[{}]: {}", file.display(), self.span, self.code, self.message),
            None => write!(f, "{}: {sev}[{}]: {}", self.span, self.code, self.message),
        }
    }
}
