//! Sampled central-qubit signals.

use std::fmt;

use crate::error::{Error, Result, Violation};
use crate::model::SpinSystem;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Provenance {
    Analytic,
    NonRwa,
    Oracle,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Analytic => "analytic",
            Provenance::NonRwa => "nonrwa",
            Provenance::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `re` is ⟨σx⟩ of the central qubit, `im` is ⟨σy⟩.
#[derive(Clone, Debug, PartialEq)]
pub struct FidSeries {
    pub times: Vec<f64>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub provenance: Provenance,
    pub system: SpinSystem,
}

impl FidSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Broken series invariants; the `re(0) = 1` check applies only when the
    /// series starts at `t = 0`.
    pub fn check_invariants(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.re.len() != self.times.len() || self.im.len() != self.times.len() {
            out.push(Violation::new(
                "re/im",
                format!(
                    "must match times in length ({} times, {} re, {} im)",
                    self.times.len(),
                    self.re.len(),
                    self.im.len()
                ),
            ));
            return out;
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            out.push(Violation::new("times", "must be strictly increasing"));
        }
        if self.times.first() == Some(&0.0) && (self.re[0] - 1.0).abs() > 1e-12 {
            out.push(Violation::new("re[0]", format!("must be 1 at t = 0, found {}", self.re[0])));
        }
        let bound = 1.0 + 1e-9;
        if let Some(i) = self.re.iter().position(|v| !(v.abs() <= bound)) {
            out.push(Violation::new(format!("re[{i}]"), format!("must satisfy |re| ≤ 1, found {}", self.re[i])));
        }
        if let Some(i) = self.im.iter().position(|v| !(v.abs() <= bound)) {
            out.push(Violation::new(format!("im[{i}]"), format!("must satisfy |im| ≤ 1, found {}", self.im[i])));
        }
        out
    }

    pub fn max_abs_im(&self) -> f64 {
        self.im.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// Indices of samples with `start ≤ t ≤ end`.
    pub fn window_indices(&self, window: Window) -> Result<std::ops::Range<usize>> {
        let (Some(&first), Some(&last)) = (self.times.first(), self.times.last()) else {
            return Err(Error::InvalidGrid("empty series".into()));
        };
        if !(window.start <= window.end) {
            return Err(Error::EmptyWindow {
                start: window.start,
                end: window.end,
            });
        }
        let slack = 1e-9 * (1.0 + last.abs());
        if window.start < first - slack || window.end > last + slack {
            return Err(Error::InvalidArgument(format!(
                "window [{}, {}] s exceeds series range [{first}, {last}] s",
                window.start, window.end
            )));
        }
        let lo = self.times.partition_point(|&t| t < window.start - slack);
        let hi = self.times.partition_point(|&t| t <= window.end + slack);
        if lo >= hi {
            return Err(Error::EmptyWindow {
                start: window.start,
                end: window.end,
            });
        }
        Ok(lo..hi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.start, self.end)
    }
}

impl std::str::FromStr for Window {
    type Err = Error;

    /// Parses `start:end` (seconds).
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("window `{s}` must look like START:END"));
        let (a, b) = s.split_once(':').ok_or_else(bad)?;
        let start: f64 = a.trim().parse().map_err(|_| bad())?;
        let end: f64 = b.trim().parse().map_err(|_| bad())?;
        Ok(Window::new(start, end))
    }
}

/// Largest `|re|` over the samples inside `window`. A value of 1 means a full
/// revival of the signal within the window.
pub fn recursion_metric(series: &FidSeries, window: Window) -> Result<f64> {
    let range = series.window_indices(window)?;
    Ok(series.re[range].iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
}

/// Time of the first sample that is a local minimum of `|re|` with
/// `|re| < threshold`, i.e. the first (grid-resolved) zero of the signal.
pub fn first_zero(series: &FidSeries, threshold: f64) -> Option<f64> {
    let a: Vec<f64> = series.re.iter().map(|v| v.abs()).collect();
    (0..a.len()).find_map(|i| {
        let left = if i == 0 { f64::INFINITY } else { a[i - 1] };
        let right = a.get(i + 1).copied().unwrap_or(f64::INFINITY);
        (a[i] < threshold && a[i] <= left && a[i] <= right).then(|| series.times[i])
    })
}
