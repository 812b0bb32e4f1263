//! Brute-force density-matrix propagation over the full register.
//!
//! Qubit 0 is the central spin; environment qubits follow group by group.
//! For systems with a non-RWA part spec, near qubit `a` belongs to part
//! `a / m` and far qubit `b` to part `b / n`; near/far pairs couple only
//! inside a part.

use nalgebra::DMatrix;
use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{Frame, FullFrameSpec, SpinSystem};
use crate::operator::{add_dissipators, pauli_at, OperatorMatrix, Pauli, C64};
use crate::rk4::{check_grid, default_step, rk4_propagate_with};
use crate::series::{FidSeries, Provenance};

/// Largest register the oracle accepts.
pub const QUBIT_CAP: usize = 7;

pub const TRACE_TOL: f64 = 1e-9;
pub const HERMITICITY_TOL: f64 = 1e-10;
pub const EIGENVALUE_TOL: f64 = 1e-8;

/// Positivity is checked on every `POSITIVITY_EVERY`-th sample and the last.
pub const POSITIVITY_EVERY: usize = 10;

const ZERO: C64 = Complex64::new(0.0, 0.0);
const I: C64 = Complex64::new(0.0, 1.0);

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    pub rho: OperatorMatrix,
    pub t: f64,
}

impl DensityMatrix {
    pub fn n_qubits(&self) -> usize {
        self.rho.n_qubits()
    }

    pub fn purity(&self) -> f64 {
        // Tr(ρ²) = Σ_ij ρ_ij ρ_ji = Σ_ij |ρ_ij|² for Hermitian ρ.
        self.rho.as_array().iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let a = self.rho.as_array();
        let dim = self.rho.dim();
        let h = DMatrix::from_fn(dim, dim, |i, j| 0.5 * (a[[i, j]] + a[[j, i]].conj()));
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Trace and Hermiticity, plus positivity when `positivity` is set.
    pub fn check_invariants(&self, positivity: bool) -> Result<()> {
        let breach = |what: String| Err(Error::InvariantBreach { time: self.t, what });
        let tr = self.rho.trace();
        if (tr - 1.0).norm() > TRACE_TOL || !tr.re.is_finite() {
            return breach(format!("trace {tr} differs from 1 by more than {TRACE_TOL}"));
        }
        let herm = self.rho.hermiticity_error();
        if !(herm <= HERMITICITY_TOL) {
            return breach(format!("Hermiticity error {herm:e} exceeds {HERMITICITY_TOL:e}"));
        }
        if positivity {
            let min = self.min_eigenvalue();
            if !(min >= -EIGENVALUE_TOL) {
                return breach(format!("minimum eigenvalue {min:e} below −{EIGENVALUE_TOL:e}"));
            }
        }
        Ok(())
    }
}

fn check_cap(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > QUBIT_CAP {
        return Err(Error::QubitCap {
            requested: n_qubits,
            cap: QUBIT_CAP,
        });
    }
    Ok(())
}

/// `(σ0 + σx)/2` on qubit 0, maximally mixed on the rest.
pub fn initial_state(n_qubits: usize) -> Result<DensityMatrix> {
    check_cap(n_qubits)?;
    let dim = 1usize << n_qubits;
    let mask = dim >> 1;
    let w = 1.0 / dim as f64;
    let mut rho = OperatorMatrix::zeros(dim);
    for i in 0..dim {
        rho.set(i, i, C64::new(w, 0.0));
        rho.set(i, i ^ mask, C64::new(w, 0.0));
    }
    Ok(DensityMatrix { rho, t: 0.0 })
}

/// `(Tr σx⁰ρ, Tr σy⁰ρ)`.
pub fn expectation_sigma_xy(rho: &OperatorMatrix) -> (f64, f64) {
    let dim = rho.dim();
    let mask = dim >> 1;
    let a = rho.as_array();
    let (mut x, mut y) = (ZERO, ZERO);
    for i in 0..dim {
        let v = a[[i ^ mask, i]];
        x += v;
        // (σy)_{i, i^mask} is −i when qubit 0 of i is up, +i otherwise.
        y += if i & mask == 0 { -I * v } else { I * v };
    }
    (x.re, y.re)
}

pub fn expectation_sigma_x(rho: &OperatorMatrix) -> f64 {
    expectation_sigma_xy(rho).0
}

/// Register sites of each group, and the near/far pairs of a part spec.
#[derive(Clone, Debug, PartialEq)]
pub struct QubitLayout {
    pub n_qubits: usize,
    pub group_sites: Vec<Vec<usize>>,
    pub part_pairs: Vec<(usize, usize)>,
}

impl QubitLayout {
    pub fn of(system: &SpinSystem) -> Self {
        let mut next = 1;
        let group_sites: Vec<Vec<usize>> = system
            .groups
            .iter()
            .map(|g| {
                let sites = (next..next + g.count).collect();
                next += g.count;
                sites
            })
            .collect();
        let mut part_pairs = Vec::new();
        if let Some(spec) = &system.nonrwa {
            if group_sites.len() == 2 {
                for (a, &sa) in group_sites[0].iter().enumerate() {
                    for (b, &sb) in group_sites[1].iter().enumerate() {
                        if a / spec.m == b / spec.n {
                            part_pairs.push((sa, sb));
                        }
                    }
                }
            }
        }
        Self {
            n_qubits: next,
            group_sites,
            part_pairs,
        }
    }
}

/// `H(t) = H_static + Σ_k e^{iν_k t} H_k`.
#[derive(Clone, Debug)]
struct HamiltonianTerms {
    fixed: OperatorMatrix,
    oscillating: Vec<(f64, OperatorMatrix)>,
}

impl HamiltonianTerms {
    fn new(system: &SpinSystem, frame: &FullFrameSpec) -> Result<Self> {
        system.ensure_valid()?;
        frame.validate_for(system)?;
        let layout = QubitLayout::of(system);
        let nq = layout.n_qubits;
        check_cap(nq)?;
        let dim = 1usize << nq;
        let z = |s| pauli_at(Pauli::Z, s, nq);
        let zz = |a, b| -> Result<OperatorMatrix> { z(a)?.matmul(&z(b)?) };
        let heisenberg = |a, b| -> Result<OperatorMatrix> {
            let mut h = zz(a, b)?;
            for mu in [Pauli::X, Pauli::Y] {
                h += &pauli_at(mu, a, nq)?.matmul(&pauli_at(mu, b, nq)?)?;
            }
            Ok(h)
        };
        let c = |x: f64| C64::new(x, 0.0);

        let mut fixed = OperatorMatrix::zeros(dim);
        let mut oscillating = Vec::new();
        let j23 = system.nonrwa.as_ref().map_or(0.0, |s| s.j23.rad_per_s());
        match frame.frame {
            Frame::Rwa | Frame::RotatingNonRwa => {
                for (g, sites) in system.groups.iter().zip(&layout.group_sites) {
                    for &s in sites {
                        fixed.add_scaled(c(g.j_center.rad_per_s() / 4.0), &zz(0, s)?);
                    }
                }
                for &(a, b) in &layout.part_pairs {
                    fixed.add_scaled(c(j23 / 4.0), &zz(a, b)?);
                }
            }
            Frame::Lab => {
                let omega0 = frame.omega_center.expect("validated").rad_per_s();
                fixed.add_scaled(c(omega0 / 2.0), &z(0)?);
                for ((g, sites), w) in system.groups.iter().zip(&layout.group_sites).zip(&frame.omega_groups) {
                    for &s in sites {
                        fixed.add_scaled(c(w.rad_per_s() / 2.0), &z(s)?);
                        fixed.add_scaled(c(g.j_center.rad_per_s() / 4.0), &heisenberg(0, s)?);
                    }
                }
                for &(a, b) in &layout.part_pairs {
                    fixed.add_scaled(c(j23 / 4.0), &heisenberg(a, b)?);
                }
            }
        }
        if frame.frame == Frame::RotatingNonRwa && !layout.part_pairs.is_empty() {
            let delta = system.nonrwa.as_ref().expect("validated").delta_omega.rad_per_s();
            let mut flip = OperatorMatrix::zeros(dim);
            for &(a, b) in &layout.part_pairs {
                flip += &pauli_at(Pauli::Plus, a, nq)?.matmul(&pauli_at(Pauli::Minus, b, nq)?)?;
            }
            let flip = flip.scale(c(j23 / 2.0));
            oscillating.push((-delta, flip.adjoint()));
            oscillating.push((delta, flip));
        }
        Ok(Self { fixed, oscillating })
    }

    fn at(&self, t: f64) -> OperatorMatrix {
        let mut h = self.fixed.clone();
        for (nu, term) in &self.oscillating {
            h.add_scaled(Complex64::from_polar(1.0, nu * t), term);
        }
        h
    }

    /// Largest angular frequency present: Hamiltonian entries and phase rates.
    fn omega_max(&self) -> f64 {
        let entry = |m: &OperatorMatrix| m.as_array().iter().fold(0.0_f64, |a, z| a.max(z.norm()));
        let mut w = entry(&self.fixed);
        for (nu, term) in &self.oscillating {
            w = w.max(nu.abs()).max(entry(term));
        }
        // Energy differences reach twice the largest diagonal entry.
        2.0 * w
    }
}

pub fn build_hamiltonian(system: &SpinSystem, frame: &FullFrameSpec, t: f64) -> Result<OperatorMatrix> {
    Ok(HamiltonianTerms::new(system, frame)?.at(t))
}

/// Non-zero entries of a matrix, row by row.
#[derive(Clone, Debug)]
struct SparseMatrix {
    rows: Vec<Vec<(usize, C64)>>,
}

impl SparseMatrix {
    fn from_dense(m: &OperatorMatrix) -> Self {
        let a = m.as_array();
        let rows = a
            .rows()
            .into_iter()
            .map(|row| row.iter().enumerate().filter(|(_, z)| **z != ZERO).map(|(j, &z)| (j, z)).collect())
            .collect();
        Self { rows }
    }

    /// `out += alpha (S ρ − ρ S)`.
    fn add_commutator(&self, out: &mut Array2<C64>, alpha: C64, rho: &Array2<C64>) {
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                out.row_mut(r).scaled_add(alpha * v, &rho.row(c));
            }
        }
        let dim = rho.nrows();
        for i in 0..dim {
            for (r, row) in self.rows.iter().enumerate() {
                let x = rho[[i, r]];
                if x == ZERO {
                    continue;
                }
                let ax = alpha * x;
                for &(c, v) in row {
                    out[[i, c]] -= ax * v;
                }
            }
        }
    }
}

/// Right-hand side of the GKSL equation on the register.
#[derive(Clone, Debug)]
struct Liouvillian {
    fixed: SparseMatrix,
    oscillating: Vec<(f64, SparseMatrix)>,
    rates: Vec<f64>,
}

impl Liouvillian {
    fn new(system: &SpinSystem, terms: &HamiltonianTerms) -> Self {
        let layout = QubitLayout::of(system);
        let mut rates = vec![0.0; layout.n_qubits];
        rates[0] = system.center_gamma.rad_per_s();
        for (g, sites) in system.groups.iter().zip(&layout.group_sites) {
            for &s in sites {
                rates[s] = g.gamma.rad_per_s();
            }
        }
        Self {
            fixed: SparseMatrix::from_dense(&terms.fixed),
            oscillating: terms.oscillating.iter().map(|(nu, m)| (*nu, SparseMatrix::from_dense(m))).collect(),
            rates,
        }
    }

    fn apply(&self, t: f64, rho: &OperatorMatrix) -> OperatorMatrix {
        let mut out = OperatorMatrix::zeros(rho.dim());
        let src = rho.as_array();
        self.fixed.add_commutator(out.as_array_mut(), -I, src);
        for (nu, term) in &self.oscillating {
            term.add_commutator(out.as_array_mut(), -I * Complex64::from_polar(1.0, nu * t), src);
        }
        add_dissipators(&mut out, &self.rates, rho).expect("sites and rates validated");
        out
    }
}

/// Default oracle step on spacing `dt`: `min(1e-4 s, 0.01/ω_max)`, fitted to `dt`.
pub fn default_oracle_step(system: &SpinSystem, frame: &FullFrameSpec, dt: f64) -> Result<f64> {
    let terms = HamiltonianTerms::new(system, frame)?;
    Ok(default_step(terms.omega_max(), dt))
}

/// Propagate `ρ` from the initial state at `grid[0] = 0`, checking every
/// emitted sample and handing it to `visit`.
pub fn evolve_gksl_with<V>(system: &SpinSystem, frame: &FullFrameSpec, grid: &[f64], h: f64, mut visit: V) -> Result<()>
where
    V: FnMut(usize, &DensityMatrix) -> Result<()>,
{
    let terms = HamiltonianTerms::new(system, frame)?;
    check_grid(grid)?;
    if grid[0] != 0.0 {
        return Err(Error::InvalidGrid(format!("propagation starts at t = 0, grid starts at {}", grid[0])));
    }
    let liouvillian = Liouvillian::new(system, &terms);
    let rho0 = initial_state(system.total_qubits())?.rho;
    let last = grid.len() - 1;
    rk4_propagate_with(|t, rho| liouvillian.apply(t, rho), rho0, grid, h, |i, t, rho| {
        let sample = DensityMatrix { rho: rho.clone(), t };
        sample.check_invariants(i % POSITIVITY_EVERY == 0 || i == last)?;
        visit(i, &sample)
    })
}

pub fn evolve_gksl(system: &SpinSystem, frame: &FullFrameSpec, grid: &[f64], h: f64) -> Result<Vec<DensityMatrix>> {
    let mut out = Vec::with_capacity(grid.len());
    evolve_gksl_with(system, frame, grid, h, |_, s| {
        out.push(s.clone());
        Ok(())
    })?;
    Ok(out)
}

/// Central-qubit signal. Lab-frame runs are demodulated at the central
/// resonance frequency so they can be compared with rotating-frame results.
pub fn oracle_fid(system: &SpinSystem, frame: &FullFrameSpec, grid: &[f64], h: f64) -> Result<FidSeries> {
    let omega0 = match frame.frame {
        Frame::Lab => frame.omega_center.map_or(0.0, |w| w.rad_per_s()),
        _ => 0.0,
    };
    let mut re = Vec::with_capacity(grid.len());
    let mut im = Vec::with_capacity(grid.len());
    evolve_gksl_with(system, frame, grid, h, |_, s| {
        let (x, y) = expectation_sigma_xy(&s.rho);
        // ⟨σx⟩ + i⟨σy⟩ = 2⟨σ₊⟩ turns as e^{iω0 t} under the Zeeman term.
        let (sin, cos) = (omega0 * s.t).sin_cos();
        re.push(x * cos + y * sin);
        im.push(y * cos - x * sin);
        Ok(())
    })?;
    Ok(FidSeries {
        times: grid.to_vec(),
        re,
        im,
        provenance: Provenance::Oracle,
        system: system.clone(),
    })
}

/// `max_t |S_lab(t) − S_rwa(t)|`, the lab signal demodulated at ω0.
pub fn rwa_discrepancy(system: &SpinSystem, lab: &FullFrameSpec, grid: &[f64], h: f64) -> Result<f64> {
    if lab.frame != Frame::Lab {
        return Err(Error::InvalidArgument("discrepancy needs a lab-frame specification".into()));
    }
    let full = oracle_fid(system, lab, grid, h)?;
    let rwa = oracle_fid(system, &FullFrameSpec::rwa(), grid, h)?;
    Ok(full.re.iter().zip(&rwa.re).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}
