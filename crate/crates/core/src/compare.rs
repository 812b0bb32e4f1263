//! Side-by-side comparison of two signals on a common grid.

use std::fmt;

use crate::error::{Error, Result};
use crate::model::SpinSystem;
use crate::series::{recursion_metric, FidSeries, Window};
use crate::solver::{SolveSettings, SolverRegistry};

/// Grid times closer than this (relative) count as the same sample.
const GRID_MATCH_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct WindowMetrics {
    pub window: Window,
    pub a: f64,
    pub b: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareReport {
    pub a: String,
    pub b: String,
    /// `max_t |re_a(t) − re_b(t)|`.
    pub max_abs_dev: f64,
    /// First time at which the maximum deviation occurs.
    pub dev_time: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub windows: Vec<WindowMetrics>,
}

impl fmt::Display for CompareReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "a = {}", self.a)?;
        writeln!(f, "b = {}", self.b)?;
        writeln!(f, "max_abs_dev = {:e}", self.max_abs_dev)?;
        writeln!(f, "dev_time_s = {}", self.dev_time)?;
        writeln!(f, "tolerance = {:e}", self.tolerance)?;
        for w in &self.windows {
            writeln!(f, "recursion_metric{} a = {} b = {}", w.window, w.a, w.b)?;
        }
        write!(f, "result = {}", if self.passed { "pass" } else { "fail" })
    }
}

pub fn compare_series(
    a: &FidSeries,
    b: &FidSeries,
    labels: (&str, &str),
    tolerance: f64,
    windows: &[Window],
) -> Result<CompareReport> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch(format!("{} samples vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::GridMismatch("both series are empty".into()));
    }
    if let Some((ta, tb)) = a
        .times
        .iter()
        .zip(&b.times)
        .find(|(ta, tb)| (*ta - *tb).abs() > GRID_MATCH_TOL * (1.0 + ta.abs()))
    {
        return Err(Error::GridMismatch(format!("sample at {ta} s vs {tb} s")));
    }
    let (mut max_abs_dev, mut dev_time) = (0.0_f64, a.times[0]);
    for ((t, x), y) in a.times.iter().zip(&a.re).zip(&b.re) {
        let d = (x - y).abs();
        if d > max_abs_dev || d.is_nan() {
            max_abs_dev = d;
            dev_time = *t;
        }
    }
    let windows = windows
        .iter()
        .map(|&w| {
            Ok(WindowMetrics {
                window: w,
                a: recursion_metric(a, w)?,
                b: recursion_metric(b, w)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(CompareReport {
        a: labels.0.to_string(),
        b: labels.1.to_string(),
        max_abs_dev,
        dev_time,
        tolerance,
        passed: max_abs_dev <= tolerance,
        windows,
    })
}

/// One side of a comparison: a solver applied to a system.
#[derive(Clone, Debug, PartialEq)]
pub struct CompareSide {
    pub label: String,
    pub solver: String,
    pub system: SpinSystem,
    pub settings: SolveSettings,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareRequest {
    pub a: CompareSide,
    pub b: CompareSide,
    pub grid: Vec<f64>,
    pub tolerance: f64,
    pub windows: Vec<Window>,
    /// Run both sides at once when ≥ 2.
    pub threads: usize,
}

pub fn run_compare(registry: &SolverRegistry, request: &CompareRequest) -> Result<(CompareReport, FidSeries, FidSeries)> {
    let solve = |side: &CompareSide| {
        registry
            .get(&side.solver)
            .and_then(|s| s.solve(&side.system, &request.grid, &side.settings))
    };
    let (a, b) = if request.threads >= 2 {
        std::thread::scope(|scope| {
            let handle = scope.spawn(|| solve(&request.b));
            let a = solve(&request.a);
            (a, handle.join().expect("solver thread panicked"))
        })
    } else {
        (solve(&request.a), solve(&request.b))
    };
    let (a, b) = (a?, b?);
    let report = compare_series(&a, &b, (&request.a.label, &request.b.label), request.tolerance, &request.windows)?;
    Ok((report, a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::fid_series_analytic;
    use crate::model::{preset, PresetName, PresetOverrides};
    use crate::rk4::uniform_grid;

    fn tes_series() -> FidSeries {
        let sys = preset(PresetName::Tes, &PresetOverrides::default()).unwrap();
        fid_series_analytic(&sys, &uniform_grid(0.0, 3.0, 1e-3).unwrap()).unwrap()
    }

    #[test]
    fn self_comparison_is_exact() {
        let s = tes_series();
        let r = compare_series(&s, &s, ("x", "x"), 0.0, &[Window::new(0.5, 3.0)]).unwrap();
        assert_eq!(r.max_abs_dev, 0.0);
        assert!(r.passed);
        assert_eq!(r.windows[0].a, r.windows[0].b);
    }

    #[test]
    fn grid_mismatch_detected() {
        let s = tes_series();
        let mut short = s.clone();
        short.times.pop();
        short.re.pop();
        short.im.pop();
        assert!(matches!(compare_series(&s, &short, ("a", "b"), 1.0, &[]), Err(Error::GridMismatch(_))));
        let mut shifted = s.clone();
        shifted.times[10] += 1e-6;
        assert!(matches!(compare_series(&s, &shifted, ("a", "b"), 1.0, &[]), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn deviation_location() {
        let s = tes_series();
        let mut t = s.clone();
        t.re[700] += 0.25;
        let r = compare_series(&s, &t, ("a", "b"), 0.1, &[]).unwrap();
        assert!((r.max_abs_dev - 0.25).abs() < 1e-12);
        assert!((r.dev_time - 0.7).abs() < 1e-12);
        assert!(!r.passed);
        assert!(r.to_string().ends_with("result = fail"));
    }

    #[test]
    fn virtual_isotope_is_less_recursive() {
        let registry = SolverRegistry::with_defaults();
        let side = |name: PresetName| CompareSide {
            label: name.as_str().into(),
            solver: "analytic".into(),
            system: preset(name, &PresetOverrides::default()).unwrap(),
            settings: SolveSettings::default(),
        };
        for threads in [1, 2] {
            let request = CompareRequest {
                a: side(PresetName::Tes),
                b: side(PresetName::TesVirtual13C),
                grid: uniform_grid(0.0, 3.0, 1e-3).unwrap(),
                tolerance: 1.0,
                windows: vec![Window::new(0.5, 3.0)],
                threads,
            };
            let (report, _, _) = run_compare(&registry, &request).unwrap();
            assert!(report.windows[0].b < report.windows[0].a);
        }
    }
}
