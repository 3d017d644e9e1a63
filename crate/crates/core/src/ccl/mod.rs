//! Thorn declaration files and run-time parameter files.
//!
//! Each thorn ships `interface.ccl` (implemented interface, inherited
//! interfaces, variable groups), `param.ccl` (typed parameters with ranges)
//! and `schedule.ccl` (routines and groups placed into time bins). The
//! grammar is token based: keywords are case-insensitive, identifiers keep
//! their case, `#` starts a comment, and `{ ... }` delimits blocks.

mod canonical;
mod interface;
mod lexer;
mod lint;
mod manifest;
mod param;
mod parfile;
mod schedule;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use canonical::{interface_to_ccl, param_to_ccl, parfile_to_text, schedule_to_ccl};
pub use interface::parse_interface;
pub use lexer::{tokenize, Tok, Token};
pub use lint::{lint_thorn, Diagnostic, Severity};
pub use manifest::{
    is_identifier, ManifestError, ThornManifest, INTERFACE_FILE, PARAM_FILE, SCHEDULE_FILE,
};
pub use param::parse_param;
pub use parfile::parse_parameter_file;
pub use schedule::parse_schedule;

/// Source line of a declaration. Ignored by structural equality so that a
/// re-serialized file compares equal to the original.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct SourceLine(pub usize);

impl PartialEq for SourceLine {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CclErrorKind {
    Syntax,
    MissingImplements,
    DuplicateImplements,
    DuplicateGroup,
    InvalidInherits,
    UnknownType,
    MalformedRange,
    DefaultOutOfRange,
    DuplicateParameter,
    AtAndIn,
    UnknownClause,
    MissingEquals,
    DuplicateAssignment,
    MissingActiveThorns,
    Io,
}

#[derive(Debug, Clone, Error, PartialEq)]
#[error("line {line}, column {col}: {message}")]
pub struct CclError {
    pub kind: CclErrorKind,
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl CclError {
    pub fn new(kind: CclErrorKind, line: usize, col: usize, message: impl Into<String>) -> Self {
        CclError {
            kind,
            line,
            col,
            message: message.into(),
        }
    }

    pub fn syntax(line: usize, col: usize, message: impl Into<String>) -> Self {
        Self::new(CclErrorKind::Syntax, line, col, message)
    }
}

// ---------------------------------------------------------------------------
// interface.ccl

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DataType {
    Real,
    Int,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupKind {
    /// Grid function: distributed over the grid.
    Gf,
    Array,
    Scalar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Visibility {
    Public,
    Private,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableGroup {
    pub name: String,
    pub data_type: DataType,
    pub kind: GroupKind,
    pub timelevels: u32,
    pub visibility: Visibility,
    /// Present iff `kind` is not `Scalar`.
    pub dims: Option<u8>,
    pub description: String,
    pub line: SourceLine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplementationInterface {
    pub implements: String,
    pub inherits: Vec<String>,
    pub variable_groups: Vec<VariableGroup>,
}

impl ImplementationInterface {
    pub fn group(&self, name: &str) -> Option<&VariableGroup> {
        self.variable_groups.iter().find(|g| g.name == name)
    }
}

// ---------------------------------------------------------------------------
// param.ccl

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParamScope {
    Private,
    /// Settable from parameter files and readable by inheriting thorns.
    Restricted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParamType {
    Real,
    Int,
    Boolean,
    Keyword,
    String,
}

impl fmt::Display for ParamType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParamType::Real => "REAL",
            ParamType::Int => "INT",
            ParamType::Boolean => "BOOLEAN",
            ParamType::Keyword => "KEYWORD",
            ParamType::String => "STRING",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Steerable {
    Never,
    Always,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Real(f64),
    Keyword(String),
    Str(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Real(v) => write!(f, "{v:?}"),
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Bool(v) => f.write_str(if *v { "yes" } else { "no" }),
            ParamValue::Keyword(s) | ParamValue::Str(s) => write!(f, "\"{s}\""),
        }
    }
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Real(v) => Some(*v),
            ParamValue::Int(v) => Some(*v as f64),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            ParamValue::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            ParamValue::Bool(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Keyword(s) | ParamValue::Str(s) => Some(s),
            _ => None,
        }
    }

    /// Truth value used by schedule guards.
    pub fn truthy(&self) -> Option<bool> {
        match self {
            ParamValue::Bool(v) => Some(*v),
            ParamValue::Int(v) => Some(*v != 0),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RangeSpec {
    /// Interval for REAL/INT. `None` bounds are unbounded (`*`).
    Interval {
        lower: Option<f64>,
        upper: Option<f64>,
        lower_closed: bool,
        upper_closed: bool,
        description: String,
    },
    /// Literal for KEYWORD (exact, case-insensitive) or STRING (regular
    /// expression).
    Literal { value: String, description: String },
}

impl RangeSpec {
    pub fn description(&self) -> &str {
        match self {
            RangeSpec::Interval { description, .. } | RangeSpec::Literal { description, .. } => {
                description
            }
        }
    }

    pub fn admits(&self, value: &ParamValue) -> bool {
        match (self, value) {
            (
                RangeSpec::Interval {
                    lower,
                    upper,
                    lower_closed,
                    upper_closed,
                    ..
                },
                v,
            ) => {
                let Some(x) = v.as_f64() else { return false };
                let lo_ok = match lower {
                    None => true,
                    Some(l) if *lower_closed => x >= *l,
                    Some(l) => x > *l,
                };
                let hi_ok = match upper {
                    None => true,
                    Some(u) if *upper_closed => x <= *u,
                    Some(u) => x < *u,
                };
                lo_ok && hi_ok
            }
            (RangeSpec::Literal { value: lit, .. }, ParamValue::Keyword(s)) => {
                lit.eq_ignore_ascii_case(s)
            }
            (RangeSpec::Literal { value: pattern, .. }, ParamValue::Str(s)) => {
                regex::Regex::new(pattern)
                    .map(|re| re.is_match(s))
                    .unwrap_or(false)
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterDecl {
    pub name: String,
    pub scope: ParamScope,
    pub data_type: ParamType,
    pub description: String,
    pub ranges: Vec<RangeSpec>,
    pub default: ParamValue,
    pub steerable: Steerable,
    pub line: SourceLine,
}

impl ParameterDecl {
    /// True if `value` has the declared type and lies in some range. An
    /// empty range list admits every value of the right type; BOOLEAN
    /// parameters are never range-restricted.
    pub fn admits(&self, value: &ParamValue) -> bool {
        let type_ok = matches!(
            (self.data_type, value),
            (ParamType::Real, ParamValue::Real(_))
                | (ParamType::Int, ParamValue::Int(_))
                | (ParamType::Boolean, ParamValue::Bool(_))
                | (ParamType::Keyword, ParamValue::Keyword(_))
                | (ParamType::String, ParamValue::Str(_))
        );
        if !type_ok {
            return false;
        }
        if self.data_type == ParamType::Boolean || self.ranges.is_empty() {
            return true;
        }
        self.ranges.iter().any(|r| r.admits(value))
    }

    /// Joined range descriptions, used in error messages.
    pub fn range_descriptions(&self) -> String {
        self.ranges
            .iter()
            .map(|r| r.description())
            .collect::<Vec<_>>()
            .join("; ")
    }

    /// Converts a raw value from a parameter file or steering request into
    /// this parameter's type. Keyword values are normalized to the declared
    /// literal's spelling.
    pub fn coerce(&self, raw: &RawValue) -> Result<ParamValue, String> {
        let text = raw.text();
        let value = match self.data_type {
            ParamType::Real => match raw {
                RawValue::Number(s) | RawValue::Word(s) | RawValue::Str(s) => ParamValue::Real(
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| format!("`{text}` is not a REAL value"))?,
                ),
            },
            ParamType::Int => {
                let s = text.trim();
                match s.parse::<i64>() {
                    Ok(v) => ParamValue::Int(v),
                    Err(_) => return Err(format!("`{text}` is not an INT value")),
                }
            }
            ParamType::Boolean => ParamValue::Bool(
                parse_bool(text).ok_or_else(|| format!("`{text}` is not a BOOLEAN value"))?,
            ),
            ParamType::Keyword => {
                let canonical = self.ranges.iter().find_map(|r| match r {
                    RangeSpec::Literal { value, .. } if value.eq_ignore_ascii_case(text) => {
                        Some(value.clone())
                    }
                    _ => None,
                });
                ParamValue::Keyword(canonical.unwrap_or_else(|| text.to_string()))
            }
            ParamType::String => ParamValue::Str(text.to_string()),
        };
        Ok(value)
    }
}

pub fn parse_bool(text: &str) -> Option<bool> {
    match text.trim().to_ascii_lowercase().as_str() {
        "yes" | "true" | "1" => Some(true),
        "no" | "false" | "0" => Some(false),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// schedule.ccl

/// Standard schedule points, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Bin {
    Startup,
    Paramcheck,
    Initial,
    Prestep,
    Evol,
    Poststep,
    Analysis,
    Terminate,
}

impl Bin {
    pub const ALL: [Bin; 8] = [
        Bin::Startup,
        Bin::Paramcheck,
        Bin::Initial,
        Bin::Prestep,
        Bin::Evol,
        Bin::Poststep,
        Bin::Analysis,
        Bin::Terminate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Bin::Startup => "STARTUP",
            Bin::Paramcheck => "PARAMCHECK",
            Bin::Initial => "INITIAL",
            Bin::Prestep => "PRESTEP",
            Bin::Evol => "EVOL",
            Bin::Poststep => "POSTSTEP",
            Bin::Analysis => "ANALYSIS",
            Bin::Terminate => "TERMINATE",
        }
    }

    pub fn from_name(s: &str) -> Option<Bin> {
        Bin::ALL
            .into_iter()
            .find(|b| b.name().eq_ignore_ascii_case(s))
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Bin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `name` or `scope::name`, where scope is a thorn or implementation name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QualifiedName {
    pub scope: Option<String>,
    pub name: String,
}

impl QualifiedName {
    pub fn new(scope: Option<&str>, name: &str) -> Self {
        QualifiedName {
            scope: scope.map(str::to_string),
            name: name.to_string(),
        }
    }

    pub fn parse(s: &str) -> Self {
        match s.split_once("::") {
            Some((scope, name)) => QualifiedName::new(Some(scope), name),
            None => QualifiedName::new(None, s),
        }
    }
}

impl fmt::Display for QualifiedName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.scope {
            Some(s) => write!(f, "{s}::{}", self.name),
            None => f.write_str(&self.name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Location {
    At(Bin),
    In(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StorageSpec {
    pub group: QualifiedName,
    pub timelevels: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleItem {
    pub name: String,
    pub is_group: bool,
    pub location: Location,
    pub before: Vec<String>,
    pub after: Vec<String>,
    pub if_condition: Option<QualifiedName>,
    pub while_condition: Option<QualifiedName>,
    pub storage: Vec<StorageSpec>,
    pub sync: Vec<QualifiedName>,
    pub reads: Vec<QualifiedName>,
    pub writes: Vec<QualifiedName>,
    pub description: String,
    pub line: SourceLine,
}

// ---------------------------------------------------------------------------
// parameter files

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strictness {
    /// Unknown parameter names only warn.
    Relaxed,
    #[default]
    Normal,
    /// Assignments to inactive thorns are errors as well.
    Strict,
}

impl std::str::FromStr for Strictness {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "relaxed" => Ok(Strictness::Relaxed),
            "normal" => Ok(Strictness::Normal),
            "strict" => Ok(Strictness::Strict),
            other => Err(format!("unknown strictness `{other}`")),
        }
    }
}

/// Right-hand side of a parameter assignment, typed later against the
/// declaration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RawValue {
    Number(String),
    Str(String),
    Word(String),
}

impl RawValue {
    pub fn text(&self) -> &str {
        match self {
            RawValue::Number(s) | RawValue::Str(s) | RawValue::Word(s) => s,
        }
    }

    /// Builds a raw value from a JSON steering payload.
    pub fn from_json(v: &serde_json::Value) -> Option<RawValue> {
        match v {
            serde_json::Value::Number(n) => Some(RawValue::Number(n.to_string())),
            serde_json::Value::String(s) => Some(RawValue::Str(s.clone())),
            serde_json::Value::Bool(b) => {
                Some(RawValue::Word(if *b { "yes" } else { "no" }.into()))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// Thorn or implementation name before `::`.
    pub scope: String,
    pub name: String,
    pub value: RawValue,
    pub line: SourceLine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterFile {
    pub active_thorns: Vec<String>,
    pub assignments: Vec<Assignment>,
    pub strictness: Strictness,
    /// Original text, archived with the run's provenance.
    pub source: String,
}

impl ParameterFile {
    /// Replaces or appends an assignment; used for command-line overrides
    /// and convergence-level scaling.
    pub fn set(&mut self, scope: &str, name: &str, value: RawValue) {
        if let Some(a) = self
            .assignments
            .iter_mut()
            .find(|a| a.scope.eq_ignore_ascii_case(scope) && a.name == name)
        {
            a.value = value;
        } else {
            self.assignments.push(Assignment {
                scope: scope.to_string(),
                name: name.to_string(),
                value,
                line: SourceLine(0),
            });
        }
    }
}
