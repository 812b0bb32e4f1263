//! Fixed-step classical Runge–Kutta integration on a sampling grid.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::OperatorMatrix;

/// Relative tolerance for "the step divides every grid interval".
pub const GRID_DIVISION_TOL: f64 = 1e-12;

/// Anything the integrator can step: a vector space with a finiteness check.
pub trait OdeState: Clone {
    /// `self += alpha * other`.
    fn add_scaled(&mut self, alpha: f64, other: &Self);
    fn is_finite(&self) -> bool;
}

impl OdeState for f64 {
    fn add_scaled(&mut self, alpha: f64, other: &Self) {
        *self += alpha * other;
    }

    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

impl OdeState for Complex64 {
    fn add_scaled(&mut self, alpha: f64, other: &Self) {
        *self += other * alpha;
    }

    fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

impl OdeState for OperatorMatrix {
    fn add_scaled(&mut self, alpha: f64, other: &Self) {
        OperatorMatrix::add_scaled(self, Complex64::new(alpha, 0.0), other);
    }

    fn is_finite(&self) -> bool {
        OperatorMatrix::is_finite(self)
    }
}

/// Number of `h`-sized steps in each grid interval.
///
/// Fails when the grid is not strictly increasing or `h` does not divide an
/// interval to within [`GRID_DIVISION_TOL`].
pub fn substeps(grid: &[f64], h: f64) -> Result<Vec<usize>> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("step {h} must be positive and finite")));
    }
    check_grid(grid)?;
    grid.windows(2)
        .map(|w| {
            let span = w[1] - w[0];
            let k = (span / h).round();
            if k < 1.0 || (k * h - span).abs() > GRID_DIVISION_TOL * span {
                Err(Error::InvalidGrid(format!(
                    "step {h} s does not divide the interval [{}, {}] s",
                    w[0], w[1]
                )))
            } else {
                Ok(k as usize)
            }
        })
        .collect()
}

pub fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid("empty grid".into()));
    }
    if let Some(t) = grid.iter().find(|t| !t.is_finite()) {
        return Err(Error::InvalidGrid(format!("non-finite time {t}")));
    }
    if let Some(w) = grid.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid(format!(
            "times must be strictly increasing ({} then {})",
            w[0], w[1]
        )));
    }
    Ok(())
}

/// Evenly spaced grid `t_start, t_start + dt, …` up to and including `t_end`.
pub fn uniform_grid(t_start: f64, t_end: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !dt.is_finite() || !t_start.is_finite() || !t_end.is_finite() || t_end < t_start {
        return Err(Error::InvalidGrid(format!(
            "cannot build a grid on [{t_start}, {t_end}] with spacing {dt}"
        )));
    }
    let intervals = ((t_end - t_start) / dt).round() as usize;
    Ok((0..=intervals).map(|i| t_start + i as f64 * dt).collect())
}

/// The largest step not exceeding `h_max` that divides `dt` exactly.
pub fn fitted_step(dt: f64, h_max: f64) -> f64 {
    let k = (dt / h_max * (1.0 - 1e-12)).ceil().max(1.0);
    dt / k
}

/// Default internal step: `min(1e-4 s, 0.01/ω_max)`, shrunk so it divides `dt`.
pub fn default_step(omega_max: f64, dt: f64) -> f64 {
    let h_max = if omega_max > 0.0 { (0.01 / omega_max).min(1e-4) } else { 1e-4 };
    fitted_step(dt, h_max)
}

/// Integrate `dm/dt = rhs(t, m)` from `m0` at `grid[0]`, handing each grid
/// sample to `visit` as it is reached.
///
/// Substage times are `t`, `t + h/2` and `t + h`. Within an interval the step
/// is `span / k`, so samples land exactly on the grid.
pub fn rk4_propagate_with<S, F, V>(mut rhs: F, m0: S, grid: &[f64], h: f64, mut visit: V) -> Result<()>
where
    S: OdeState,
    F: FnMut(f64, &S) -> S,
    V: FnMut(usize, f64, &S) -> Result<()>,
{
    let steps = substeps(grid, h)?;
    let mut m = m0;
    if !m.is_finite() {
        return Err(Error::NonFinite { step: 0, time: grid[0] });
    }
    visit(0, grid[0], &m)?;
    let mut step_index = 0usize;
    for (i, &k) in steps.iter().enumerate() {
        let t0 = grid[i];
        let span = grid[i + 1] - t0;
        let dt = span / k as f64;
        for s in 0..k {
            let t = t0 + s as f64 * dt;
            let k1 = rhs(t, &m);
            let mut probe = m.clone();
            probe.add_scaled(0.5 * dt, &k1);
            let k2 = rhs(t + 0.5 * dt, &probe);
            probe = m.clone();
            probe.add_scaled(0.5 * dt, &k2);
            let k3 = rhs(t + 0.5 * dt, &probe);
            probe = m.clone();
            probe.add_scaled(dt, &k3);
            let k4 = rhs(t + dt, &probe);
            m.add_scaled(dt / 6.0, &k1);
            m.add_scaled(dt / 3.0, &k2);
            m.add_scaled(dt / 3.0, &k3);
            m.add_scaled(dt / 6.0, &k4);
            step_index += 1;
            if !m.is_finite() {
                return Err(Error::NonFinite {
                    step: step_index,
                    time: t + dt,
                });
            }
        }
        visit(i + 1, grid[i + 1], &m)?;
    }
    Ok(())
}

/// [`rk4_propagate_with`], collecting the state at every grid time.
pub fn rk4_propagate<S, F>(rhs: F, m0: S, grid: &[f64], h: f64) -> Result<Vec<S>>
where
    S: OdeState,
    F: FnMut(f64, &S) -> S,
{
    let mut out = Vec::with_capacity(grid.len());
    rk4_propagate_with(rhs, m0, grid, h, |_, _, m| {
        out.push(m.clone());
        Ok(())
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{pauli, Pauli};

    #[test]
    fn zero_rhs_keeps_state() {
        let m0 = pauli(Pauli::X);
        let grid = uniform_grid(0.0, 1.0, 0.25).unwrap();
        let out = rk4_propagate(|_, m: &OperatorMatrix| OperatorMatrix::zeros(m.dim()), m0.clone(), &grid, 0.05).unwrap();
        assert_eq!(out.len(), 5);
        assert!(out.iter().all(|m| *m == m0));
    }

    #[test]
    fn exponential_decay() {
        let out = rk4_propagate(|_, m: &f64| -m, 1.0, &[0.0, 1.0], 1e-3).unwrap();
        assert!((out[1] - (-1.0f64).exp()).abs() < 1e-9);
    }

    fn decay_error(h: f64) -> f64 {
        let out = rk4_propagate(|_, m: &f64| -m, 1.0, &[0.0, 1.0], h).unwrap();
        (out[1] - (-1.0f64).exp()).abs()
    }

    #[test]
    fn fourth_order_convergence() {
        let ratio = decay_error(0.1) / decay_error(0.05);
        assert!((14.0..18.0).contains(&ratio), "ratio {ratio}");
        let slope = (decay_error(0.1) / decay_error(0.025)).log2() / 2.0;
        assert!((3.8..4.2).contains(&slope), "slope {slope}");
    }

    #[test]
    fn time_dependent_substages() {
        // dm/dt = 3t² integrates exactly under RK4 (Simpson's rule).
        let out = rk4_propagate(|t, _: &f64| 3.0 * t * t, 0.0, &[0.0, 2.0], 0.5).unwrap();
        assert!((out[1] - 8.0).abs() < 1e-13);
    }

    #[test]
    fn step_must_divide_grid() {
        let grid = [0.0, 1e-3, 2e-3];
        assert!(matches!(substeps(&grid, 3e-4), Err(Error::InvalidGrid(_))));
        assert_eq!(substeps(&grid, 1e-4).unwrap(), vec![10, 10]);
        assert!(substeps(&[0.0, 1.0, 0.5], 0.5).is_err());
        assert!(substeps(&grid, 0.0).is_err());
    }

    #[test]
    fn reports_non_finite_step() {
        let err = rk4_propagate(|_, m: &f64| m * m, 1.0, &[0.0, 10.0], 0.01).unwrap_err();
        match err {
            Error::NonFinite { step, .. } => assert!(step > 0 && step < 1000),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn default_step_fits_grid() {
        let h = default_step(2.0 * std::f64::consts::PI * 24.8, 1e-3);
        assert!(h <= 0.01 / (2.0 * std::f64::consts::PI * 24.8));
        assert_eq!(substeps(&[0.0, 1e-3], h).unwrap(), vec![16]);
        assert_eq!(default_step(1.0, 1e-3), 1e-4);
        assert_eq!(fitted_step(1e-3, 1e-4), 1e-4);
    }

    #[test]
    fn uniform_grid_endpoints() {
        let g = uniform_grid(0.0, 2.5, 1e-3).unwrap();
        assert_eq!(g.len(), 2501);
        assert_eq!(g[0], 0.0);
        assert!((g[2500] - 2.5).abs() < 1e-12);
    }
}
