//! Domain description of a central qubit and its structured environment.
//!
//! All frequencies and rates are carried as [`AngularFreq`], which stores the
//! value in Hz and hands out rad/s through a single multiplication by 2π.
//! Keeping Hz as the stored unit makes config round trips bit-exact.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result, Violation};

/// An angular frequency or rate. Stored in Hz, used in rad/s.
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd)]
pub struct AngularFreq {
    hz: f64,
}

impl AngularFreq {
    pub const ZERO: Self = Self { hz: 0.0 };

    pub fn from_hz(hz: f64) -> Self {
        Self { hz }
    }

    pub fn from_rad_per_s(omega: f64) -> Self {
        Self { hz: omega / TAU }
    }

    pub fn hz(self) -> f64 {
        self.hz
    }

    pub fn rad_per_s(self) -> f64 {
        self.hz * TAU
    }

    pub fn is_finite(self) -> bool {
        self.hz.is_finite()
    }
}

impl fmt::Display for AngularFreq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "2π×{} rad/s", self.hz)
    }
}

/// A homogeneous group of environment qubits, all coupled identically to the
/// central qubit and all subject to the same dissipation rate.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupSpec {
    pub count: usize,
    pub j_center: AngularFreq,
    pub gamma: AngularFreq,
    pub label: String,
}

impl GroupSpec {
    pub fn new(count: usize, j_center: AngularFreq, gamma: AngularFreq, label: impl Into<String>) -> Self {
        Self {
            count,
            j_center,
            gamma,
            label: label.into(),
        }
    }
}

/// Partition of a two-group environment into `parts` identical, mutually
/// non-interacting blocks of `m` near and `n` far qubits, with the
/// intra-part near/far coupling kept beyond the rotating-wave approximation.
#[derive(Clone, Debug, PartialEq)]
pub struct NonRwaSpec {
    pub parts: usize,
    pub m: usize,
    pub n: usize,
    pub j23: AngularFreq,
    pub delta_omega: AngularFreq,
}

impl NonRwaSpec {
    pub fn qubits_per_part(&self) -> usize {
        self.m + self.n
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpinSystem {
    pub name: String,
    pub center_gamma: AngularFreq,
    pub groups: Vec<GroupSpec>,
    pub nonrwa: Option<NonRwaSpec>,
}

impl SpinSystem {
    pub fn new(name: impl Into<String>, center_gamma: AngularFreq, groups: Vec<GroupSpec>) -> Self {
        Self {
            name: name.into(),
            center_gamma,
            groups,
            nonrwa: None,
        }
    }

    pub fn with_nonrwa(mut self, spec: NonRwaSpec) -> Self {
        self.nonrwa = Some(spec);
        self
    }

    /// Number of environment qubits, summed over all groups.
    pub fn env_qubits(&self) -> usize {
        self.groups.iter().map(|g| g.count).sum()
    }

    /// Environment plus the central qubit.
    pub fn total_qubits(&self) -> usize {
        1 + self.env_qubits()
    }

    /// Every broken invariant, in field order. Empty when the system is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        check_rate(&mut out, "center_gamma", self.center_gamma);
        for (i, g) in self.groups.iter().enumerate() {
            if g.count < 1 {
                out.push(Violation::new(format!("groups[{i}].count"), "must be ≥ 1"));
            }
            if !g.j_center.is_finite() {
                out.push(Violation::new(format!("groups[{i}].j_center"), "must be finite"));
            }
            check_rate(&mut out, &format!("groups[{i}].gamma"), g.gamma);
        }
        if let Some(spec) = &self.nonrwa {
            for (field, value) in [("parts", spec.parts), ("m", spec.m), ("n", spec.n)] {
                if value < 1 {
                    out.push(Violation::new(format!("nonrwa.{field}"), "must be ≥ 1"));
                }
            }
            if !spec.j23.is_finite() {
                out.push(Violation::new("nonrwa.j23", "must be finite"));
            }
            check_rate(&mut out, "nonrwa.delta_omega", spec.delta_omega);
            if self.groups.len() != 2 {
                out.push(Violation::new(
                    "groups",
                    format!(
                        "must hold exactly two groups (near, far) when nonrwa is given, found {}",
                        self.groups.len()
                    ),
                ));
            } else {
                let expect = [spec.parts * spec.m, spec.parts * spec.n];
                for (i, (g, want)) in self.groups.iter().zip(expect).enumerate() {
                    if g.count != want {
                        let factor = if i == 0 { "m" } else { "n" };
                        out.push(Violation::new(
                            format!("groups[{i}].count"),
                            format!("must equal nonrwa.parts·nonrwa.{factor} = {want}, found {}", g.count),
                        ));
                    }
                }
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(violations))
        }
    }
}

fn check_rate(out: &mut Vec<Violation>, field: &str, rate: AngularFreq) {
    if !rate.is_finite() {
        out.push(Violation::new(field, "must be finite"));
    } else if rate.hz() < 0.0 {
        out.push(Violation::new(field, "must be ≥ 0"));
    }
}

/// Which Hamiltonian the brute-force oracle assembles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Frame {
    /// Full Heisenberg couplings plus Zeeman terms.
    Lab,
    /// Rotating frame, every coupling reduced to σzσz.
    Rwa,
    /// Rotating frame, σzσz to the center but near/far flip-flop terms kept.
    RotatingNonRwa,
}

impl Frame {
    pub fn as_str(self) -> &'static str {
        match self {
            Frame::Lab => "lab",
            Frame::Rwa => "rwa",
            Frame::RotatingNonRwa => "rotating-nonrwa",
        }
    }
}

impl FromStr for Frame {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lab" => Ok(Frame::Lab),
            "rwa" => Ok(Frame::Rwa),
            "rotating-nonrwa" => Ok(Frame::RotatingNonRwa),
            other => Err(Error::InvalidArgument(format!(
                "unknown frame `{other}` (expected lab, rwa or rotating-nonrwa)"
            ))),
        }
    }
}

/// Frame selection plus the resonance frequencies a lab-frame run needs.
#[derive(Clone, Debug, PartialEq)]
pub struct FullFrameSpec {
    pub frame: Frame,
    pub omega_center: Option<AngularFreq>,
    pub omega_groups: Vec<AngularFreq>,
}

impl FullFrameSpec {
    pub fn rwa() -> Self {
        Self {
            frame: Frame::Rwa,
            omega_center: None,
            omega_groups: Vec::new(),
        }
    }

    pub fn rotating_nonrwa() -> Self {
        Self {
            frame: Frame::RotatingNonRwa,
            omega_center: None,
            omega_groups: Vec::new(),
        }
    }

    pub fn lab(omega_center: AngularFreq, omega_groups: Vec<AngularFreq>) -> Self {
        Self {
            frame: Frame::Lab,
            omega_center: Some(omega_center),
            omega_groups,
        }
    }

    /// The natural rotating frame for a system: non-RWA when it carries a
    /// part specification, plain RWA otherwise.
    pub fn default_for(system: &SpinSystem) -> Self {
        if system.nonrwa.is_some() {
            Self::rotating_nonrwa()
        } else {
            Self::rwa()
        }
    }

    pub fn validate_for(&self, system: &SpinSystem) -> Result<()> {
        let all = self.omega_center.iter().chain(&self.omega_groups);
        if let Some(bad) = all.clone().find(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument(format!("resonance frequency {bad} is not finite")));
        }
        match self.frame {
            Frame::Lab => {
                if self.omega_center.is_none() {
                    return Err(Error::MissingFrequencies("the central resonance frequency".into()));
                }
                if self.omega_groups.len() != system.groups.len() {
                    return Err(Error::MissingFrequencies(format!(
                        "one resonance frequency per group ({} given, {} groups)",
                        self.omega_groups.len(),
                        system.groups.len()
                    )));
                }
            }
            Frame::Rwa => {}
            Frame::RotatingNonRwa => {
                if system.nonrwa.is_none() {
                    return Err(Error::MissingNonRwa(system.name.clone()));
                }
            }
        }
        Ok(())
    }
}

/// Built-in parameter sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PresetName {
    Tms,
    Tes,
    TesVirtual13C,
    TesLowField,
}

impl PresetName {
    pub const ALL: [PresetName; 4] = [
        PresetName::Tms,
        PresetName::Tes,
        PresetName::TesVirtual13C,
        PresetName::TesLowField,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::Tms => "tms",
            PresetName::Tes => "tes",
            PresetName::TesVirtual13C => "tes-virtual-13c",
            PresetName::TesLowField => "tes-lowfield",
        }
    }
}

impl FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PresetName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Caller-supplied values the presets cannot provide on their own.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PresetOverrides {
    /// Center/environment coupling for `tms`. Required for that preset.
    pub tms_j: Option<AngularFreq>,
    pub center_gamma: Option<AngularFreq>,
    /// Per-group dissipation rates, applied to the leading groups in order.
    pub group_gammas: Vec<AngularFreq>,
}

impl PresetOverrides {
    pub fn tms(j: AngularFreq) -> Self {
        Self {
            tms_j: Some(j),
            ..Self::default()
        }
    }
}

/// Near-qubit coupling of the ethyl groups, 2π×6.42 rad/s.
pub const TES_J12_HZ: f64 = 6.42;
/// Far-qubit (methyl) coupling, 2π×0.5 rad/s.
pub const TES_J13_HZ: f64 = 0.5;
/// Near/far coupling inside one ethyl group, 2π×8.02 rad/s.
pub const TES_J23_HZ: f64 = 8.02;
/// Coupling to a ¹³C in a methyl position, 2π×2.2 rad/s.
pub const TES_J14_HZ: f64 = 2.2;
/// Near/far resonance difference at 1.4 T, 2π×24.8 rad/s.
pub const TES_LOWFIELD_DELTA_OMEGA_HZ: f64 = 24.8;
/// Near/far resonance difference over J23 at 11.7 T.
pub const TES_HIGHFIELD_DETUNING_RATIO: f64 = 26.0;
/// Intrinsic rates fitted for TMS, in s⁻¹ (used directly as rad/s).
pub const TMS_GAMMA_CENTER: f64 = 0.21;
pub const TMS_GAMMA_ENV: f64 = 0.1;
pub const TMS_ENV_QUBITS: usize = 12;

pub fn preset(name: PresetName, overrides: &PresetOverrides) -> Result<SpinSystem> {
    let mut system = match name {
        PresetName::Tms => {
            let j = overrides.tms_j.ok_or(Error::MissingParameter {
                preset: "tms",
                parameter: "the coupling J (tms_j)",
            })?;
            SpinSystem::new(
                "tms",
                AngularFreq::from_rad_per_s(TMS_GAMMA_CENTER),
                vec![GroupSpec::new(
                    TMS_ENV_QUBITS,
                    j,
                    AngularFreq::from_rad_per_s(TMS_GAMMA_ENV),
                    "H (methyl)",
                )],
            )
        }
        PresetName::Tes => tes_base("tes").with_nonrwa(tes_parts(AngularFreq::from_hz(
            TES_HIGHFIELD_DETUNING_RATIO * TES_J23_HZ,
        ))),
        PresetName::TesVirtual13C => {
            let mut s = tes_base("tes-virtual-13c");
            s.groups.push(GroupSpec::new(
                4,
                AngularFreq::from_hz(TES_J14_HZ),
                AngularFreq::ZERO,
                "IV (13C methyl)",
            ));
            s
        }
        PresetName::TesLowField => tes_base("tes-lowfield")
            .with_nonrwa(tes_parts(AngularFreq::from_hz(TES_LOWFIELD_DELTA_OMEGA_HZ))),
    };

    if let Some(gamma) = overrides.center_gamma {
        system.center_gamma = gamma;
    }
    if overrides.group_gammas.len() > system.groups.len() {
        return Err(Error::InvalidArgument(format!(
            "{} group rates given for preset `{name}` with {} groups",
            overrides.group_gammas.len(),
            system.groups.len()
        )));
    }
    for (g, gamma) in system.groups.iter_mut().zip(&overrides.group_gammas) {
        g.gamma = *gamma;
    }
    system.ensure_valid()?;
    Ok(system)
}

fn tes_base(name: &str) -> SpinSystem {
    SpinSystem::new(
        name,
        AngularFreq::ZERO,
        vec![
            GroupSpec::new(8, AngularFreq::from_hz(TES_J12_HZ), AngularFreq::ZERO, "II (CH2)"),
            GroupSpec::new(12, AngularFreq::from_hz(TES_J13_HZ), AngularFreq::ZERO, "III (CH3)"),
        ],
    )
}

fn tes_parts(delta_omega: AngularFreq) -> NonRwaSpec {
    NonRwaSpec {
        parts: 4,
        m: 2,
        n: 3,
        j23: AngularFreq::from_hz(TES_J23_HZ),
        delta_omega,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tms() -> SpinSystem {
        preset(PresetName::Tms, &PresetOverrides::tms(AngularFreq::from_hz(6.6))).unwrap()
    }

    #[test]
    fn tes_preset_values() {
        let s = preset(PresetName::Tes, &PresetOverrides::default()).unwrap();
        let got: Vec<_> = s.groups.iter().map(|g| (g.count, g.j_center.rad_per_s())).collect();
        assert_eq!(got, vec![(8, TAU * 6.42), (12, TAU * 0.5)]);
        assert_eq!(s.nonrwa.as_ref().unwrap().j23.rad_per_s(), TAU * 8.02);
        assert_eq!(s.env_qubits(), 20);
    }

    #[test]
    fn virtual_13c_adds_a_third_group() {
        let base = preset(PresetName::Tes, &PresetOverrides::default()).unwrap();
        let s = preset(PresetName::TesVirtual13C, &PresetOverrides::default()).unwrap();
        assert_eq!(&s.groups[..2], &base.groups[..]);
        assert_eq!(s.groups[2].count, 4);
        assert_eq!(s.groups[2].j_center.rad_per_s(), TAU * 2.2);
        assert_eq!(s.groups[2].gamma, AngularFreq::ZERO);
    }

    #[test]
    fn lowfield_parts() {
        let s = preset(PresetName::TesLowField, &PresetOverrides::default()).unwrap();
        let spec = s.nonrwa.unwrap();
        assert_eq!((spec.parts, spec.m, spec.n), (4, 2, 3));
        assert_eq!(spec.delta_omega.rad_per_s(), TAU * 24.8);
        assert_eq!(spec.j23.rad_per_s(), TAU * 8.02);
    }

    #[test]
    fn tms_requires_j() {
        let err = preset(PresetName::Tms, &PresetOverrides::default()).unwrap_err();
        assert!(matches!(err, Error::MissingParameter { preset: "tms", .. }));
        let s = tms();
        assert_eq!(s.env_qubits(), 12);
        assert!((s.center_gamma.rad_per_s() - 0.21).abs() < 1e-15);
        assert!((s.groups[0].gamma.rad_per_s() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn presets_validate_clean() {
        for name in PresetName::ALL {
            let s = preset(name, &PresetOverrides::tms(AngularFreq::from_hz(1.0))).unwrap();
            assert_eq!(s.validate(), vec![], "{name}");
        }
    }

    #[test]
    fn unknown_preset_name() {
        assert!(matches!("tmx".parse::<PresetName>(), Err(Error::UnknownPreset(s)) if s == "tmx"));
        assert_eq!("tes-virtual-13c".parse::<PresetName>().unwrap(), PresetName::TesVirtual13C);
    }

    #[test]
    fn violation_messages() {
        let mut s = tms();
        s.groups[0].count = 0;
        let v: Vec<String> = s.validate().iter().map(ToString::to_string).collect();
        assert_eq!(v, vec!["groups[0].count must be ≥ 1"]);

        let mut s = tms();
        s.groups[0].gamma = AngularFreq::from_rad_per_s(-0.1);
        let v: Vec<String> = s.validate().iter().map(ToString::to_string).collect();
        assert_eq!(v, vec!["groups[0].gamma must be ≥ 0"]);
    }

    #[test]
    fn nonrwa_counts_must_match_groups() {
        let mut s = preset(PresetName::TesLowField, &PresetOverrides::default()).unwrap();
        s.groups[1].count = 11;
        let v = s.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "groups[1].count");

        s.groups.pop();
        assert_eq!(s.validate()[0].field, "groups");
    }

    #[test]
    fn gamma_overrides_apply_in_order() {
        let o = PresetOverrides {
            group_gammas: vec![AngularFreq::from_rad_per_s(0.3)],
            center_gamma: Some(AngularFreq::from_rad_per_s(0.5)),
            ..Default::default()
        };
        let s = preset(PresetName::Tes, &o).unwrap();
        assert_eq!(s.groups[0].gamma, AngularFreq::from_rad_per_s(0.3));
        assert_eq!(s.groups[1].gamma, AngularFreq::ZERO);
        assert_eq!(s.center_gamma, AngularFreq::from_rad_per_s(0.5));

        let too_many = PresetOverrides {
            group_gammas: vec![AngularFreq::ZERO; 3],
            ..Default::default()
        };
        assert!(preset(PresetName::Tes, &too_many).is_err());
    }

    #[test]
    fn lab_frame_needs_frequencies() {
        let s = tms();
        let bad = FullFrameSpec {
            frame: Frame::Lab,
            omega_center: Some(AngularFreq::from_hz(100.0)),
            omega_groups: vec![],
        };
        assert!(matches!(bad.validate_for(&s), Err(Error::MissingFrequencies(_))));
        let ok = FullFrameSpec::lab(AngularFreq::from_hz(100.0), vec![AngularFreq::ZERO]);
        ok.validate_for(&s).unwrap();
        assert!(matches!(
            FullFrameSpec::rotating_nonrwa().validate_for(&s),
            Err(Error::MissingNonRwa(_))
        ));
    }
}
