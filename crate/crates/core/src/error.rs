use std::fmt;

use thiserror::Error;

/// One broken invariant of a [`SpinSystem`](crate::model::SpinSystem) or config file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.field, self.rule)
    }
}

fn join_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown preset `{0}` (expected one of: tms, tes, tes-virtual-13c, tes-lowfield)")]
    UnknownPreset(String),

    #[error("preset `{preset}` requires an explicit value for {parameter}")]
    MissingParameter {
        preset: &'static str,
        parameter: &'static str,
    },

    #[error("invalid system: {}", join_violations(.0))]
    Invalid(Vec<Violation>),

    #[error("config syntax error at line {line}, column {column}: {message}")]
    ConfigSyntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("site {site} out of range for {n_qubits} qubit(s)")]
    SiteOutOfRange { site: usize, n_qubits: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered at step {step} (t = {time} s)")]
    NonFinite { step: usize, time: f64 },

    #[error("step {step} s too coarse, at most {max} s is required")]
    StepTooCoarse { step: f64, max: f64 },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("empty window [{start}, {end}] s")]
    EmptyWindow { start: f64, end: f64 },

    #[error("oracle supports at most {cap} qubits, system needs {requested}")]
    QubitCap { requested: usize, cap: usize },

    #[error("lab frame requires {0}")]
    MissingFrequencies(String),

    #[error("system `{0}` has no non-RWA part specification")]
    MissingNonRwa(String),

    #[error("density-matrix invariant breached at t = {time} s: {what}")]
    InvariantBreach { time: f64, what: String },

    #[error("series grids differ: {0}")]
    GridMismatch(String),

    #[error("unknown solver `{0}`")]
    UnknownSolver(String),

    #[error("solver `{0}` registered twice")]
    DuplicateSolver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
