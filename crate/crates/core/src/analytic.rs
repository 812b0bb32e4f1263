//! Closed-form signals for environments reduced to σzσz couplings.
//!
//! Every environment qubit contributes an operator factor
//! `d0(t) σ0/2 + dz(t) σz/2` obeying
//! `d/dt (d0, dz) = ½ [[0, −iJ], [−iJ, −2γ]] (d0, dz)` from `(1, 0)`.
//! The central ⟨σx⟩ is `e^(−γ_c t/2) Π_k d0_k(t)`; groups raise their factor
//! to the group size.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::SpinSystem;
use crate::rk4::check_grid;
use crate::series::{FidSeries, Provenance};

/// Operator-factor coefficients of one environment qubit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeAmplitude {
    pub d0: Complex64,
    pub dz: Complex64,
}

impl ModeAmplitude {
    pub fn norm_sqr(&self) -> f64 {
        self.d0.norm_sqr() + self.dz.norm_sqr()
    }
}

/// Below this |Ω² t²/4| the trigonometric and hyperbolic forms are replaced
/// by their common Taylor series.
const SERIES_CUTOFF: f64 = 1e-2;

/// Closed-form `(d0, dz)` for coupling `j` and rate `gamma` (both rad/s).
///
/// Covers the underdamped (`j > gamma`), critical and overdamped regimes;
/// `d0` comes out real in all of them.
pub fn mode_amplitude(j: f64, gamma: f64, t: f64) -> Result<ModeAmplitude> {
    if !j.is_finite() || !gamma.is_finite() || !t.is_finite() {
        return Err(Error::InvalidArgument("mode parameters must be finite".into()));
    }
    if gamma < 0.0 {
        return Err(Error::InvalidArgument(format!("rate {gamma} must be ≥ 0")));
    }
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("time {t} must be ≥ 0")));
    }
    Ok(mode_unchecked(j, gamma, t))
}

fn mode_unchecked(j: f64, gamma: f64, t: f64) -> ModeAmplitude {
    let x = 0.5 * t;
    let omega_sq = j * j - gamma * gamma;
    let u = omega_sq * x * x;

    let (d0, dz_over_minus_i) = if u.abs() < SERIES_CUTOFF {
        // sin(Ωx)/Ω = x Σ (−u)^k/(2k+1)!, cos(Ωx) = Σ (−u)^k/(2k)!
        let (mut sin_term, mut cos_term) = (x, 1.0);
        let (mut sinc, mut cos) = (x, 1.0);
        for k in 1..8 {
            let k = k as f64;
            sin_term *= -u / ((2.0 * k) * (2.0 * k + 1.0));
            cos_term *= -u / ((2.0 * k - 1.0) * (2.0 * k));
            sinc += sin_term;
            cos += cos_term;
        }
        let decay = (-gamma * x).exp();
        (decay * (gamma * sinc + cos), decay * j * sinc)
    } else if omega_sq > 0.0 {
        let omega = omega_sq.sqrt();
        let decay = (-gamma * x).exp();
        let sinc = (omega * x).sin() / omega;
        (decay * (gamma * sinc + (omega * x).cos()), decay * j * sinc)
    } else {
        // e^(−γx)cosh(κx), e^(−γx)sinh(κx) written as exponentials that cannot overflow.
        let kappa = (-omega_sq).sqrt();
        let slow = ((kappa - gamma) * x).exp();
        let fast = (-(kappa + gamma) * x).exp();
        let d0 = 0.5 * ((1.0 + gamma / kappa) * slow + (1.0 - gamma / kappa) * fast);
        (d0, j / (2.0 * kappa) * (slow - fast))
    };

    ModeAmplitude {
        d0: Complex64::new(d0, 0.0),
        dz: Complex64::new(0.0, -dz_over_minus_i),
    }
}

/// Central-qubit signal at one time. The imaginary part is exactly zero.
pub fn fid_analytic(system: &SpinSystem, t: f64) -> Result<Complex64> {
    system.ensure_valid()?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("time {t} must be finite and ≥ 0")));
    }
    Ok(Complex64::new(signal_unchecked(system, t), 0.0))
}

/// `e^(−γ_c t/2) Π_g d0_g(t)^count_g`, accumulated as a signed log sum.
fn signal_unchecked(system: &SpinSystem, t: f64) -> f64 {
    let mut log_mag = -0.5 * system.center_gamma.rad_per_s() * t;
    let mut negative = false;
    for g in &system.groups {
        let factor = mode_unchecked(g.j_center.rad_per_s(), g.gamma.rad_per_s(), t).d0.re;
        if factor.abs() <= 1e-300 {
            return 0.0;
        }
        log_mag += g.count as f64 * factor.abs().ln();
        if factor < 0.0 && g.count % 2 == 1 {
            negative = !negative;
        }
    }
    let magnitude = log_mag.exp();
    if negative {
        -magnitude
    } else {
        magnitude
    }
}

pub fn fid_series_analytic(system: &SpinSystem, grid: &[f64]) -> Result<FidSeries> {
    system.ensure_valid()?;
    check_grid(grid)?;
    if grid[0] < 0.0 {
        return Err(Error::InvalidGrid(format!("times must be ≥ 0, grid starts at {}", grid[0])));
    }
    let re = grid.iter().map(|&t| signal_unchecked(system, t)).collect();
    Ok(FidSeries {
        times: grid.to_vec(),
        re,
        im: vec![0.0; grid.len()],
        provenance: Provenance::Analytic,
        system: system.clone(),
    })
}
