//! TOML description of a [`SpinSystem`], with rates and couplings in Hz.
//!
//! ```toml
//! name = "tes"
//! center_gamma_hz = 0.0
//!
//! [[groups]]
//! count = 8
//! j_center_hz = 6.42
//! gamma_hz = 0.0
//! label = "II (CH2)"
//!
//! [nonrwa]
//! parts = 4
//! m = 2
//! n = 3
//! j23_hz = 8.02
//! delta_omega_hz = 24.8
//! ```
//!
//! `gamma_hz` defaults to 0, `label` to the empty string and `nonrwa` to
//! absent; every other key is required.

use std::fmt::Write as _;

use toml::{Table, Value};

use crate::error::{Error, Result, Violation};
use crate::model::{AngularFreq, GroupSpec, NonRwaSpec, SpinSystem};

const TOP_KEYS: &[&str] = &["name", "center_gamma_hz", "groups", "nonrwa"];
const GROUP_KEYS: &[&str] = &["count", "j_center_hz", "gamma_hz", "label"];
const NONRWA_KEYS: &[&str] = &["parts", "m", "n", "j23_hz", "delta_omega_hz"];

/// Parse and validate a system description. Every problem found is reported
/// in one [`Error::Invalid`].
pub fn parse_config(text: &str) -> Result<SpinSystem> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| {
        let offset = e.span().map_or(0, |s| s.start);
        let (line, column) = line_column(text, offset);
        Error::ConfigSyntax {
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })?;

    let mut v = Vec::new();
    unknown_keys(&table, TOP_KEYS, "", &mut v);
    let name = string(&table, "name", "name", true, &mut v).unwrap_or_default();
    let center_gamma = number(&table, "center_gamma_hz", "center_gamma_hz", &mut v);

    let mut groups = Vec::new();
    match table.get("groups") {
        None => v.push(Violation::new("groups", "is required")),
        Some(Value::Array(items)) => {
            for (i, item) in items.iter().enumerate() {
                let path = format!("groups[{i}]");
                let Value::Table(t) = item else {
                    v.push(Violation::new(path, "must be a table"));
                    continue;
                };
                unknown_keys(t, GROUP_KEYS, &path, &mut v);
                let count = count(t, "count", &format!("{path}.count"), &mut v);
                let j = number(t, "j_center_hz", &format!("{path}.j_center_hz"), &mut v);
                let gamma = optional_number(t, "gamma_hz", &format!("{path}.gamma_hz"), &mut v).unwrap_or(Some(0.0));
                let label = string(t, "label", &format!("{path}.label"), false, &mut v).unwrap_or_default();
                if let (Some(count), Some(j), Some(gamma)) = (count, j, gamma) {
                    groups.push(GroupSpec::new(count, AngularFreq::from_hz(j), AngularFreq::from_hz(gamma), label));
                }
            }
        }
        Some(_) => v.push(Violation::new("groups", "must be an array of tables ([[groups]])")),
    }

    let nonrwa = match table.get("nonrwa") {
        None => None,
        Some(Value::Table(t)) => {
            unknown_keys(t, NONRWA_KEYS, "nonrwa", &mut v);
            let parts = count(t, "parts", "nonrwa.parts", &mut v);
            let m = count(t, "m", "nonrwa.m", &mut v);
            let n = count(t, "n", "nonrwa.n", &mut v);
            let j23 = number(t, "j23_hz", "nonrwa.j23_hz", &mut v);
            let dw = number(t, "delta_omega_hz", "nonrwa.delta_omega_hz", &mut v);
            match (parts, m, n, j23, dw) {
                (Some(parts), Some(m), Some(n), Some(j23), Some(dw)) => Some(NonRwaSpec {
                    parts,
                    m,
                    n,
                    j23: AngularFreq::from_hz(j23),
                    delta_omega: AngularFreq::from_hz(dw),
                }),
                _ => None,
            }
        }
        Some(_) => {
            v.push(Violation::new("nonrwa", "must be a table"));
            None
        }
    };

    if !v.is_empty() {
        return Err(Error::Invalid(v));
    }
    let mut system = SpinSystem::new(name, AngularFreq::from_hz(center_gamma.unwrap_or(0.0)), groups);
    system.nonrwa = nonrwa;
    let violations: Vec<Violation> = system
        .validate()
        .into_iter()
        .map(|x| Violation::new(config_field(&x.field), x.rule))
        .collect();
    if violations.is_empty() {
        Ok(system)
    } else {
        Err(Error::Invalid(violations))
    }
}

/// Serialize a system in the layout [`parse_config`] reads. Output depends
/// only on the system's values.
pub fn serialize_config(system: &SpinSystem) -> String {
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, "name = {}", quote(&system.name));
    let _ = writeln!(w, "center_gamma_hz = {}", float(system.center_gamma.hz()));
    for g in &system.groups {
        let _ = writeln!(w, "\n[[groups]]");
        let _ = writeln!(w, "count = {}", g.count);
        let _ = writeln!(w, "j_center_hz = {}", float(g.j_center.hz()));
        let _ = writeln!(w, "gamma_hz = {}", float(g.gamma.hz()));
        let _ = writeln!(w, "label = {}", quote(&g.label));
    }
    if let Some(s) = &system.nonrwa {
        let _ = writeln!(w, "\n[nonrwa]");
        let _ = writeln!(w, "parts = {}", s.parts);
        let _ = writeln!(w, "m = {}", s.m);
        let _ = writeln!(w, "n = {}", s.n);
        let _ = writeln!(w, "j23_hz = {}", float(s.j23.hz()));
        let _ = writeln!(w, "delta_omega_hz = {}", float(s.delta_omega.hz()));
    }
    out
}

/// Shortest text that reads back to the same `f64`, always with a `.` or
/// exponent so TOML sees a float.
fn float(x: f64) -> String {
    format!("{x:?}")
}

fn quote(s: &str) -> String {
    Value::String(s.to_string()).to_string()
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn config_field(model_field: &str) -> String {
    match model_field.rsplit_once('.') {
        Some((head, leaf @ ("j_center" | "gamma" | "j23" | "delta_omega"))) => format!("{head}.{leaf}_hz"),
        _ if model_field == "center_gamma" => "center_gamma_hz".into(),
        _ => model_field.into(),
    }
}

fn unknown_keys(t: &Table, known: &[&str], path: &str, v: &mut Vec<Violation>) {
    for key in t.keys().filter(|k| !known.contains(&k.as_str())) {
        let field = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
        v.push(Violation::new(field, "is not a recognized field"));
    }
}

fn number(t: &Table, key: &str, path: &str, v: &mut Vec<Violation>) -> Option<f64> {
    match optional_number(t, key, path, v) {
        Some(x) => x,
        None => {
            v.push(Violation::new(path, "is required"));
            None
        }
    }
}

/// `None` when absent, `Some(None)` when present but malformed.
fn optional_number(t: &Table, key: &str, path: &str, v: &mut Vec<Violation>) -> Option<Option<f64>> {
    let value = t.get(key)?;
    Some(match value {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => {
            v.push(Violation::new(path, "must be a number"));
            None
        }
    })
}

fn count(t: &Table, key: &str, path: &str, v: &mut Vec<Violation>) -> Option<usize> {
    match t.get(key) {
        None => {
            v.push(Violation::new(path, "is required"));
            None
        }
        Some(Value::Integer(i)) if *i >= 1 => Some(*i as usize),
        Some(Value::Integer(_)) => {
            v.push(Violation::new(path, "must be ≥ 1"));
            None
        }
        Some(_) => {
            v.push(Violation::new(path, "must be an integer"));
            None
        }
    }
}

fn string(t: &Table, key: &str, path: &str, required: bool, v: &mut Vec<Violation>) -> Option<String> {
    match t.get(key) {
        None if required => {
            v.push(Violation::new(path, "is required"));
            None
        }
        None => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => {
            v.push(Violation::new(path, "must be a string"));
            None
        }
    }
}
