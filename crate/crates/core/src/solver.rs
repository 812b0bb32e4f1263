//! Named signal solvers behind one trait, selectable at run time.

use crate::analytic::fid_series_analytic;
use crate::error::{Error, Result};
use crate::model::{FullFrameSpec, SpinSystem};
use crate::nonrwa::{default_part_step, fid_nonrwa_with, TraceExtraction};
use crate::oracle::{default_oracle_step, oracle_fid};
use crate::series::{FidSeries, Provenance};

/// Knobs shared by all solvers; each ignores what it does not use.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveSettings {
    /// Internal integration step in seconds; solver default when `None`.
    pub step: Option<f64>,
    /// Oracle frame; the system's natural rotating frame when `None`.
    pub frame: Option<FullFrameSpec>,
    pub extraction: TraceExtraction,
}

pub trait FidSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn provenance(&self) -> Provenance;
    fn solve(&self, system: &SpinSystem, grid: &[f64], settings: &SolveSettings) -> Result<FidSeries>;
}

/// Spacing used to fit default steps: the first grid interval.
fn grid_spacing(grid: &[f64]) -> f64 {
    match grid {
        [a, b, ..] => b - a,
        _ => 1e-3,
    }
}

pub struct AnalyticSolver;

impl FidSolver for AnalyticSolver {
    fn name(&self) -> &'static str {
        "analytic"
    }

    fn provenance(&self) -> Provenance {
        Provenance::Analytic
    }

    fn solve(&self, system: &SpinSystem, grid: &[f64], _: &SolveSettings) -> Result<FidSeries> {
        fid_series_analytic(system, grid)
    }
}

pub struct NonRwaSolver;

impl FidSolver for NonRwaSolver {
    fn name(&self) -> &'static str {
        "nonrwa"
    }

    fn provenance(&self) -> Provenance {
        Provenance::NonRwa
    }

    fn solve(&self, system: &SpinSystem, grid: &[f64], settings: &SolveSettings) -> Result<FidSeries> {
        let h = match settings.step {
            Some(h) => h,
            None => default_part_step(system, grid_spacing(grid))?,
        };
        fid_nonrwa_with(system, grid, h, settings.extraction)
    }
}

pub struct OracleSolver;

impl FidSolver for OracleSolver {
    fn name(&self) -> &'static str {
        "oracle"
    }

    fn provenance(&self) -> Provenance {
        Provenance::Oracle
    }

    fn solve(&self, system: &SpinSystem, grid: &[f64], settings: &SolveSettings) -> Result<FidSeries> {
        let frame = settings.frame.clone().unwrap_or_else(|| FullFrameSpec::default_for(system));
        let h = match settings.step {
            Some(h) => h,
            None => default_oracle_step(system, &frame, grid_spacing(grid))?,
        };
        oracle_fid(system, &frame, grid, h)
    }
}

/// Solvers in registration order, looked up by name.
#[derive(Default)]
pub struct SolverRegistry {
    solvers: Vec<Box<dyn FidSolver>>,
}

impl SolverRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// `analytic`, `nonrwa` and `oracle`.
    pub fn with_defaults() -> Self {
        let mut r = Self::new();
        for s in [
            Box::new(AnalyticSolver) as Box<dyn FidSolver>,
            Box::new(NonRwaSolver),
            Box::new(OracleSolver),
        ] {
            r.register(s).expect("default names are distinct");
        }
        r
    }

    pub fn register(&mut self, solver: Box<dyn FidSolver>) -> Result<()> {
        if self.solvers.iter().any(|s| s.name() == solver.name()) {
            return Err(Error::DuplicateSolver(solver.name().to_string()));
        }
        self.solvers.push(solver);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&dyn FidSolver> {
        self.solvers
            .iter()
            .find(|s| s.name() == name)
            .map(|s| s.as_ref())
            .ok_or_else(|| Error::UnknownSolver(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.solvers.iter().map(|s| s.name()).collect()
    }
}
