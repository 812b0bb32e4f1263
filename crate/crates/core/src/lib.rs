//! Free-induction-decay signals of a central spin coupled to spin
//! environments: closed-form solutions, a non-secular correction, and a
//! dense Lindblad reference solver.

pub mod analytic;
pub mod compare;
pub mod config;
pub mod csv;
pub mod error;
pub mod model;
pub mod nonrwa;
pub mod operator;
pub mod oracle;
pub mod rk4;
pub mod series;
pub mod solver;

pub use error::{Error, Result, Violation};
pub use model::{AngularFreq, Frame, FullFrameSpec, GroupSpec, NonRwaSpec, SpinSystem};
pub use series::{FidSeries, Provenance, Window};
