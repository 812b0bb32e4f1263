//! Partitioned environment with the near/far coupling kept beyond the
//! rotating-wave approximation.
//!
//! Each part carries `m` qubits of the near group (sites `0..m`) and `n`
//! qubits of the far group (sites `m..m+n`). Its operator `C` starts at
//! `I / 2^(m+n)` and obeys
//!
//! ```text
//! dC/dt = −i{A, C} − i[H_in(t), C] + Σ_k D_k(C)
//! A     = (J12/4) Σ_α σz_α + (J13/4) Σ_β σz_β
//! H_in  = Σ_αβ (J23/4) σz_α σz_β + (J23/2)(e^{iδωt} σ₊_α σ₋_β + h.c.)
//! ```
//!
//! All parts are identical, so one is propagated and its trace raised to the
//! number of parts.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{NonRwaSpec, SpinSystem};
use crate::operator::{add_dissipator, anticommutator, commutator, pauli_at, OperatorMatrix, Pauli, C64};
use crate::rk4::{check_grid, fitted_step, rk4_propagate_with, OdeState};
use crate::series::{FidSeries, Provenance};

const I: C64 = Complex64::new(0.0, 1.0);

/// Rates and central couplings of one part, all in rad/s.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartCouplings {
    pub j12: f64,
    pub j13: f64,
    pub gamma_ii: f64,
    pub gamma_iii: f64,
}

impl PartCouplings {
    /// Couplings of the two groups of a system with a non-RWA part spec.
    pub fn of(system: &SpinSystem) -> Result<Self> {
        if system.nonrwa.is_none() || system.groups.len() != 2 {
            return Err(Error::MissingNonRwa(system.name.clone()));
        }
        let (ii, iii) = (&system.groups[0], &system.groups[1]);
        Ok(Self {
            j12: ii.j_center.rad_per_s(),
            j13: iii.j_center.rad_per_s(),
            gamma_ii: ii.gamma.rad_per_s(),
            gamma_iii: iii.gamma.rad_per_s(),
        })
    }
}

/// One sample of a propagated part.
#[derive(Clone, Debug, PartialEq)]
pub struct PartState {
    pub c: OperatorMatrix,
    pub t: f64,
}

/// Dense generator of one part, assembled from embedded Pauli matrices.
#[derive(Clone, Debug)]
pub struct PartGenerator {
    anti: OperatorMatrix,
    zz: OperatorMatrix,
    /// `Σ_αβ σ₊_α σ₋_β`; its adjoint carries the opposite phase.
    flip: OperatorMatrix,
    flip_dag: OperatorMatrix,
    j23: f64,
    delta_omega: f64,
    rates: Vec<f64>,
}

impl PartGenerator {
    pub fn new(spec: &NonRwaSpec, couplings: &PartCouplings) -> Result<Self> {
        check_part(spec)?;
        let nq = spec.qubits_per_part();
        let dim = 1usize << nq;
        let j23 = spec.j23.rad_per_s();
        let mut anti = OperatorMatrix::zeros(dim);
        let mut zz = OperatorMatrix::zeros(dim);
        let mut flip = OperatorMatrix::zeros(dim);
        for a in 0..spec.m {
            anti.add_scaled(C64::from(couplings.j12 / 4.0), &pauli_at(Pauli::Z, a, nq)?);
        }
        for b in spec.m..nq {
            anti.add_scaled(C64::from(couplings.j13 / 4.0), &pauli_at(Pauli::Z, b, nq)?);
        }
        for a in 0..spec.m {
            for b in spec.m..nq {
                let za = pauli_at(Pauli::Z, a, nq)?;
                let zb = pauli_at(Pauli::Z, b, nq)?;
                zz.add_scaled(C64::from(j23 / 4.0), &za.matmul(&zb)?);
                let pa = pauli_at(Pauli::Plus, a, nq)?;
                let mb = pauli_at(Pauli::Minus, b, nq)?;
                flip += &pa.matmul(&mb)?;
            }
        }
        let flip_dag = flip.adjoint();
        let rates = (0..nq)
            .map(|s| if s < spec.m { couplings.gamma_ii } else { couplings.gamma_iii })
            .collect();
        Ok(Self {
            anti,
            zz,
            flip,
            flip_dag,
            j23,
            delta_omega: spec.delta_omega.rad_per_s(),
            rates,
        })
    }

    pub fn dim(&self) -> usize {
        self.anti.dim()
    }

    /// `H_in(t)`.
    pub fn interaction(&self, t: f64) -> OperatorMatrix {
        let phase = Complex64::from_polar(1.0, self.delta_omega * t);
        let mut h = self.zz.clone();
        h.add_scaled(0.5 * self.j23 * phase, &self.flip);
        h.add_scaled(0.5 * self.j23 * phase.conj(), &self.flip_dag);
        h
    }

    pub fn apply(&self, t: f64, c: &OperatorMatrix) -> Result<OperatorMatrix> {
        if c.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: c.dim(),
                right: self.dim(),
            });
        }
        let mut out = anticommutator(&self.anti, c)?.scale(-I);
        out.add_scaled(-I, &commutator(&self.interaction(t), c)?);
        for (site, &rate) in self.rates.iter().enumerate() {
            add_dissipator(&mut out, rate, site, c)?;
        }
        Ok(out)
    }
}

/// `dC/dt` of one part at time `t`.
pub fn nonrwa_generator(
    spec: &NonRwaSpec,
    j12: f64,
    j13: f64,
    gammas: (f64, f64),
    t: f64,
    c: &OperatorMatrix,
) -> Result<OperatorMatrix> {
    let couplings = PartCouplings {
        j12,
        j13,
        gamma_ii: gammas.0,
        gamma_iii: gammas.1,
    };
    PartGenerator::new(spec, &couplings)?.apply(t, c)
}

fn check_part(spec: &NonRwaSpec) -> Result<()> {
    if spec.m == 0 || spec.n == 0 || spec.parts == 0 {
        return Err(Error::InvalidArgument(format!(
            "part sizes must be ≥ 1 (parts {}, m {}, n {})",
            spec.parts, spec.m, spec.n
        )));
    }
    if spec.qubits_per_part() > 16 {
        return Err(Error::InvalidArgument(format!(
            "{} qubits per part is beyond what a dense part operator can hold",
            spec.qubits_per_part()
        )));
    }
    Ok(())
}

/// Largest step admitted for a part: `0.01·2π / max(δω, J23, J12)`.
pub fn max_part_step(spec: &NonRwaSpec, j12: f64) -> f64 {
    let fastest = spec
        .delta_omega
        .rad_per_s()
        .abs()
        .max(spec.j23.rad_per_s().abs())
        .max(j12.abs());
    if fastest > 0.0 {
        0.01 * std::f64::consts::TAU / fastest
    } else {
        f64::INFINITY
    }
}

/// Default step for a non-RWA run on spacing `dt`: `1e-4 s`, or less when the
/// step bound demands it, fitted to divide `dt`.
pub fn default_part_step(system: &SpinSystem, dt: f64) -> Result<f64> {
    let spec = system.nonrwa.as_ref().ok_or_else(|| Error::MissingNonRwa(system.name.clone()))?;
    let couplings = PartCouplings::of(system)?;
    Ok(fitted_step(dt, max_part_step(spec, couplings.j12).min(1e-4)))
}

fn check_step(spec: &NonRwaSpec, j12: f64, h: f64) -> Result<()> {
    let max = max_part_step(spec, j12);
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("step {h} must be positive and finite")));
    }
    if h > max * (1.0 + 1e-12) {
        return Err(Error::StepTooCoarse { step: h, max });
    }
    Ok(())
}

/// Entries of a part operator that can be non-zero.
///
/// Every term of the generator conserves the number of up spins on both sides
/// of `C`, and `C(0)` is diagonal, so `C` stays block-diagonal over sectors of
/// fixed up-spin count. Only those blocks are stored, row-major per sector.
#[derive(Clone, Debug)]
struct SectorLayout {
    n_qubits: usize,
    /// `(row, col)` basis indices of every stored entry.
    entries: Vec<(usize, usize)>,
    sector: Vec<usize>,
    local: Vec<usize>,
    offsets: Vec<usize>,
    sizes: Vec<usize>,
    diagonal: Vec<usize>,
}

impl SectorLayout {
    fn new(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_qubits + 1];
        let mut sector = vec![0; dim];
        let mut local = vec![0; dim];
        for state in 0..dim {
            let s = state.count_ones() as usize;
            sector[state] = s;
            local[state] = members[s].len();
            members[s].push(state);
        }
        let mut entries = Vec::new();
        let mut offsets = Vec::new();
        let mut diagonal = Vec::new();
        for block in &members {
            offsets.push(entries.len());
            for (a, &row) in block.iter().enumerate() {
                for (b, &col) in block.iter().enumerate() {
                    if a == b {
                        diagonal.push(entries.len());
                    }
                    entries.push((row, col));
                }
            }
        }
        Self {
            n_qubits,
            entries,
            sector,
            local,
            offsets,
            sizes: members.iter().map(Vec::len).collect(),
            diagonal,
        }
    }

    fn len(&self) -> usize {
        self.entries.len()
    }

    fn index(&self, row: usize, col: usize) -> Option<usize> {
        let s = self.sector[row];
        (s == self.sector[col]).then(|| self.offsets[s] + self.local[row] * self.sizes[s] + self.local[col])
    }

    fn to_dense(&self, values: &[C64]) -> OperatorMatrix {
        let mut out = OperatorMatrix::zeros(1 << self.n_qubits);
        for (&(r, c), &v) in self.entries.iter().zip(values) {
            out.set(r, c, v);
        }
        out
    }

    #[cfg(test)]
    fn from_dense(&self, m: &OperatorMatrix) -> Vec<C64> {
        self.entries.iter().map(|&(r, c)| m.get(r, c)).collect()
    }
}

/// Coefficients of a part operator in some reduced parametrization.
#[derive(Clone, Debug, PartialEq)]
struct Coeffs(Vec<C64>);

impl OdeState for Coeffs {
    fn add_scaled(&mut self, alpha: f64, other: &Self) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b * alpha;
        }
    }

    fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Row `e` is `Σ_k w_k x[col_k]`.
#[derive(Clone, Debug, Default)]
struct SparseRows {
    starts: Vec<usize>,
    cols: Vec<u32>,
    weights: Vec<f64>,
}

impl SparseRows {
    fn push_row(&mut self, row: impl IntoIterator<Item = (usize, f64)>) {
        if self.starts.is_empty() {
            self.starts.push(0);
        }
        for (c, w) in row {
            self.cols.push(c as u32);
            self.weights.push(w);
        }
        self.starts.push(self.cols.len());
    }

    fn row(&self, e: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (lo, hi) = (self.starts[e], self.starts[e + 1]);
        self.cols[lo..hi].iter().map(|&c| c as usize).zip(self.weights[lo..hi].iter().copied())
    }

    #[inline]
    fn dot(&self, e: usize, x: &[C64]) -> C64 {
        let (lo, hi) = (self.starts[e], self.starts[e + 1]);
        self.cols[lo..hi]
            .iter()
            .zip(&self.weights[lo..hi])
            .fold(C64::new(0.0, 0.0), |acc, (&k, &w)| acc + x[k as usize] * w)
    }
}

/// `dx_e = diag_e x_e + f e^{iδωt} (forward·x)_e + f e^{−iδωt} (backward·x)_e + (jumps·x)_e`
/// with `f = −i J23/2`.
#[derive(Clone, Debug)]
struct LinearGenerator {
    diag: Vec<C64>,
    forward: SparseRows,
    backward: SparseRows,
    jumps: SparseRows,
    flip_scale: C64,
    delta_omega: f64,
}

impl LinearGenerator {
    fn apply(&self, t: f64, x: &[C64]) -> Vec<C64> {
        let coupled = self.flip_scale != C64::new(0.0, 0.0);
        let dissipative = !self.jumps.cols.is_empty();
        let phase = Complex64::from_polar(1.0, self.delta_omega * t);
        let (fw, bw) = (self.flip_scale * phase, self.flip_scale * phase.conj());
        (0..x.len())
            .map(|e| {
                let mut d = self.diag[e] * x[e];
                if coupled {
                    d += fw * self.forward.dot(e, x) + bw * self.backward.dot(e, x);
                }
                if dissipative {
                    d += self.jumps.dot(e, x);
                }
                d
            })
            .collect()
    }

    /// The same map on orbit-constant vectors, one coefficient per orbit.
    fn reduce(&self, orbit_of: &[usize], reps: &[usize]) -> Self {
        let collapse = |rows: &SparseRows| {
            let mut out = SparseRows::default();
            for &e in reps {
                let mut acc: Vec<(usize, f64)> = Vec::new();
                for (k, w) in rows.row(e) {
                    let o = orbit_of[k];
                    match acc.iter_mut().find(|(c, _)| *c == o) {
                        Some(slot) => slot.1 += w,
                        None => acc.push((o, w)),
                    }
                }
                acc.retain(|&(_, w)| w != 0.0);
                out.push_row(acc);
            }
            out
        };
        Self {
            diag: reps.iter().map(|&e| self.diag[e]).collect(),
            forward: collapse(&self.forward),
            backward: collapse(&self.backward),
            jumps: collapse(&self.jumps),
            flip_scale: self.flip_scale,
            delta_omega: self.delta_omega,
        }
    }
}

/// The generator on the stored sector entries.
fn sector_generator(spec: &NonRwaSpec, couplings: &PartCouplings, layout: &SectorLayout) -> LinearGenerator {
    let nq = spec.qubits_per_part();
    let is_up = |state: usize, site: usize| (state >> (nq - 1 - site)) & 1 == 0;
    let z = |state: usize, site: usize| if is_up(state, site) { 1.0 } else { -1.0 };
    let j23 = spec.j23.rad_per_s();

    let dim = 1usize << nq;
    let mut anti = vec![0.0; dim];
    let mut zz = vec![0.0; dim];
    // raise[state]: states reached by one σ₊_α σ₋_β; lower[state]: by its adjoint.
    let mut raise: Vec<Vec<usize>> = vec![Vec::new(); dim];
    let mut lower: Vec<Vec<usize>> = vec![Vec::new(); dim];
    for state in 0..dim {
        for a in 0..spec.m {
            anti[state] += couplings.j12 / 4.0 * z(state, a);
        }
        for b in spec.m..nq {
            anti[state] += couplings.j13 / 4.0 * z(state, b);
        }
        for a in 0..spec.m {
            for b in spec.m..nq {
                zz[state] += j23 / 4.0 * z(state, a) * z(state, b);
                let flipped = state ^ (1 << (nq - 1 - a)) ^ (1 << (nq - 1 - b));
                if !is_up(state, a) && is_up(state, b) {
                    raise[state].push(flipped);
                } else if is_up(state, a) && !is_up(state, b) {
                    lower[state].push(flipped);
                }
            }
        }
    }

    let rates: Vec<f64> = (0..nq)
        .map(|s| if s < spec.m { couplings.gamma_ii } else { couplings.gamma_iii })
        .collect();
    let loss: f64 = rates.iter().map(|g| 0.5 * g).sum();

    let mut diag = Vec::with_capacity(layout.len());
    let mut forward = SparseRows::default();
    let mut backward = SparseRows::default();
    let mut jumps = SparseRows::default();
    let idx = |r: usize, c: usize| layout.index(r, c).expect("flip-flops stay inside a sector");
    for &(r, c) in &layout.entries {
        diag.push(-I * (anti[r] + anti[c] + zz[r] - zz[c]) - loss);
        // F = e^{iδωt} X + e^{−iδωt} X†, with X = Σ σ₊σ₋ sending s to raise[s].
        // (X C)_rc = Σ_{s: r ∈ raise[s]} C_sc = Σ_{s ∈ lower[r]} C_sc, and
        // (C X)_rc = Σ_{s ∈ raise[c]} C_rs.
        forward.push_row(
            lower[r].iter().map(|&s| (idx(s, c), 1.0))
                .chain(raise[c].iter().map(|&s| (idx(r, s), -1.0))),
        );
        backward.push_row(
            raise[r].iter().map(|&s| (idx(s, c), 1.0))
                .chain(lower[c].iter().map(|&s| (idx(r, s), -1.0))),
        );
        let mut row = Vec::new();
        for (site, &g) in rates.iter().enumerate() {
            let mask = 1usize << (nq - 1 - site);
            if g > 0.0 && (r & mask) == (c & mask) {
                row.push((idx(r ^ mask, c ^ mask), 0.5 * g));
            }
        }
        jumps.push_row(row);
    }
    LinearGenerator {
        diag,
        forward,
        backward,
        jumps,
        flip_scale: -I * (0.5 * j23),
        delta_omega: spec.delta_omega.rad_per_s(),
    }
}

/// One part, parametrized by orbits of stored entries under permutations of
/// the near qubits among themselves and of the far qubits among themselves.
/// The generator and `C(0)` share that symmetry, so `C(t)` is constant on
/// every orbit.
#[derive(Clone, Debug)]
struct PartModel {
    layout: SectorLayout,
    orbit_of: Vec<usize>,
    reps: Vec<usize>,
    /// `(orbit, number of diagonal entries in it)`.
    trace_weights: Vec<(usize, f64)>,
    generator: LinearGenerator,
}

impl PartModel {
    fn new(spec: &NonRwaSpec, couplings: &PartCouplings) -> Result<Self> {
        check_part(spec)?;
        let nq = spec.qubits_per_part();
        let layout = SectorLayout::new(nq);
        let bit = |x: usize, site: usize| (x >> (nq - 1 - site)) & 1;
        let mut keys: std::collections::HashMap<(Vec<(usize, usize)>, Vec<(usize, usize)>), usize> = Default::default();
        let mut orbit_of = Vec::with_capacity(layout.len());
        let mut reps = Vec::new();
        for (e, &(r, c)) in layout.entries.iter().enumerate() {
            let mut near: Vec<_> = (0..spec.m).map(|s| (bit(r, s), bit(c, s))).collect();
            let mut far: Vec<_> = (spec.m..nq).map(|s| (bit(r, s), bit(c, s))).collect();
            near.sort_unstable();
            far.sort_unstable();
            let next = reps.len();
            let o = *keys.entry((near, far)).or_insert(next);
            if o == next {
                reps.push(e);
            }
            orbit_of.push(o);
        }
        let mut trace_weights: Vec<(usize, f64)> = Vec::new();
        for &d in &layout.diagonal {
            match trace_weights.iter_mut().find(|(o, _)| *o == orbit_of[d]) {
                Some(slot) => slot.1 += 1.0,
                None => trace_weights.push((orbit_of[d], 1.0)),
            }
        }
        let generator = sector_generator(spec, couplings, &layout).reduce(&orbit_of, &reps);
        Ok(Self {
            layout,
            orbit_of,
            reps,
            trace_weights,
            generator,
        })
    }

    fn identity_state(&self) -> Coeffs {
        let mut v = vec![C64::new(0.0, 0.0); self.reps.len()];
        let w = 1.0 / (1u64 << self.layout.n_qubits) as f64;
        for &(o, _) in &self.trace_weights {
            v[o] = C64::new(w, 0.0);
        }
        Coeffs(v)
    }

    fn trace(&self, c: &Coeffs) -> C64 {
        self.trace_weights.iter().map(|&(o, w)| c.0[o] * w).sum()
    }

    fn expand(&self, c: &Coeffs) -> Vec<C64> {
        self.orbit_of.iter().map(|&o| c.0[o]).collect()
    }

    fn to_dense(&self, c: &Coeffs) -> OperatorMatrix {
        self.layout.to_dense(&self.expand(c))
    }
}

fn propagate_part<V>(spec: &NonRwaSpec, couplings: &PartCouplings, grid: &[f64], h: f64, mut visit: V) -> Result<()>
where
    V: FnMut(usize, f64, &PartModel, &Coeffs) -> Result<()>,
{
    check_grid(grid)?;
    check_step(spec, couplings.j12, h)?;
    if grid[0] != 0.0 {
        return Err(Error::InvalidGrid(format!(
            "part propagation starts at t = 0, grid starts at {}",
            grid[0]
        )));
    }
    let model = PartModel::new(spec, couplings)?;
    let c0 = model.identity_state();
    rk4_propagate_with(
        |t, c: &Coeffs| Coeffs(model.generator.apply(t, &c.0)),
        c0,
        grid,
        h,
        |i, t, c| visit(i, t, &model, c),
    )
}

/// Propagate one part over `grid` (which must start at 0) with step `h`.
pub fn evolve_part(spec: &NonRwaSpec, couplings: &PartCouplings, grid: &[f64], h: f64) -> Result<Vec<PartState>> {
    let mut out = Vec::with_capacity(grid.len());
    propagate_part(spec, couplings, grid, h, |_, t, g, c| {
        out.push(PartState {
            c: g.to_dense(c),
            t,
        });
        Ok(())
    })?;
    Ok(out)
}

/// `Tr C(t)` of one part on every grid time.
pub fn part_traces(spec: &NonRwaSpec, couplings: &PartCouplings, grid: &[f64], h: f64) -> Result<Vec<C64>> {
    let mut out = Vec::with_capacity(grid.len());
    propagate_part(spec, couplings, grid, h, |_, _, g, c| {
        out.push(g.trace(c));
        Ok(())
    })?;
    Ok(out)
}

/// How the signal is formed from the per-part trace `τ`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TraceExtraction {
    /// `(Re τ)^P`.
    #[default]
    RealPart,
    /// `Re(τ^P)`: the exact ⟨σx⟩ of the product ansatz.
    Coherent,
}

/// Signal of a system with a non-RWA part spec: `e^(−γ_c t/2)·(Re τ)^P`.
///
/// `im` carries ⟨σy⟩ of the product ansatz, `−e^(−γ_c t/2)·Im(τ^P)`.
pub fn fid_nonrwa(system: &SpinSystem, grid: &[f64], h: f64) -> Result<FidSeries> {
    fid_nonrwa_with(system, grid, h, TraceExtraction::RealPart)
}

pub fn fid_nonrwa_with(system: &SpinSystem, grid: &[f64], h: f64, extraction: TraceExtraction) -> Result<FidSeries> {
    let spec = system.nonrwa.as_ref().ok_or_else(|| Error::MissingNonRwa(system.name.clone()))?;
    system.ensure_valid()?;
    let couplings = PartCouplings::of(system)?;
    let traces = part_traces(spec, &couplings, grid, h)?;
    let gamma_c = system.center_gamma.rad_per_s();
    let parts = spec.parts as i32;
    let mut re = Vec::with_capacity(grid.len());
    let mut im = Vec::with_capacity(grid.len());
    for (&t, tau) in grid.iter().zip(&traces) {
        let envelope = (-0.5 * gamma_c * t).exp();
        let full = tau.powi(parts);
        re.push(match extraction {
            TraceExtraction::RealPart => envelope * tau.re.powi(parts),
            TraceExtraction::Coherent => envelope * full.re,
        });
        im.push(-envelope * full.im);
    }
    Ok(FidSeries {
        times: grid.to_vec(),
        re,
        im,
        provenance: Provenance::NonRwa,
        system: system.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AngularFreq;
    use crate::rk4::uniform_grid;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn spec(m: usize, n: usize, j23_hz: f64, dw_hz: f64) -> NonRwaSpec {
        NonRwaSpec {
            parts: 1,
            m,
            n,
            j23: AngularFreq::from_hz(j23_hz),
            delta_omega: AngularFreq::from_hz(dw_hz),
        }
    }

    fn couplings(g2: f64, g3: f64) -> PartCouplings {
        PartCouplings {
            j12: TAU * 6.42,
            j13: TAU * 0.5,
            gamma_ii: g2,
            gamma_iii: g3,
        }
    }

    fn random_block_matrix(layout: &SectorLayout, rng: &mut ChaCha8Rng) -> OperatorMatrix {
        let values: Vec<C64> = (0..layout.len())
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        layout.to_dense(&values)
    }

    #[test]
    fn sector_generator_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(m, n, g2, g3) in &[(1, 1, 0.0, 0.0), (2, 3, 0.3, 0.7), (3, 2, 0.0, 1.1), (2, 2, 0.5, 0.0)] {
            let s = spec(m, n, 8.02, 24.8);
            let c = couplings(g2, g3);
            let dense = PartGenerator::new(&s, &c).unwrap();
            let layout = SectorLayout::new(m + n);
            let sparse = sector_generator(&s, &c, &layout);
            for &t in &[0.0, 0.013, 0.4] {
                let x = random_block_matrix(&layout, &mut rng);
                let want = dense.apply(t, &x).unwrap();
                let got = layout.to_dense(&sparse.apply(t, &layout.from_dense(&x)));
                assert!(got.max_abs_diff(&want) < 1e-12, "({m},{n}) t={t}: {}", got.max_abs_diff(&want));
            }
        }
    }

    #[test]
    fn orbit_reduction_matches_sector_generator() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(m, n, g2, g3) in &[(1, 1, 0.2, 0.0), (2, 3, 0.3, 0.7), (3, 3, 0.0, 0.4)] {
            let s = spec(m, n, 8.02, 24.8);
            let c = couplings(g2, g3);
            let model = PartModel::new(&s, &c).unwrap();
            let full = sector_generator(&s, &c, &model.layout);
            for &t in &[0.0, 0.07, 1.3] {
                let x = Coeffs(
                    (0..model.reps.len())
                        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                        .collect(),
                );
                let reduced = model.expand(&Coeffs(model.generator.apply(t, &x.0)));
                let direct = full.apply(t, &model.expand(&x));
                let worst = reduced.iter().zip(&direct).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
                assert!(worst < 1e-12, "({m},{n}) t={t}: {worst}");
            }
        }
        assert_eq!(PartModel::new(&spec(2, 3, 1.0, 1.0), &couplings(0.0, 0.0)).unwrap().reps.len(), 44);
    }

    #[test]
    fn evolved_state_is_permutation_symmetric() {
        let s = spec(2, 3, 8.02, 24.8);
        let c = couplings(0.4, 0.1);
        let grid = [0.0, 0.05, 0.1];
        let dense_gen = PartGenerator::new(&s, &c).unwrap();
        let c0 = OperatorMatrix::identity(32).scale(C64::from(1.0 / 32.0));
        let dense = crate::rk4::rk4_propagate(|t, m: &OperatorMatrix| dense_gen.apply(t, m).unwrap(), c0, &grid, 1e-4).unwrap();
        let reduced = evolve_part(&s, &c, &grid, 1e-4).unwrap();
        for (a, b) in dense.iter().zip(&reduced) {
            assert!(a.max_abs_diff(&b.c) < 1e-12);
        }
    }

    #[test]
    fn dense_generator_keeps_sector_structure() {
        let s = spec(2, 3, 8.02, 24.8);
        let gen = PartGenerator::new(&s, &couplings(0.2, 0.4)).unwrap();
        let layout = SectorLayout::new(5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = gen.apply(0.21, &random_block_matrix(&layout, &mut rng)).unwrap();
        for r in 0..32 {
            for c in 0..32 {
                if layout.index(r, c).is_none() {
                    assert_eq!(out.get(r, c), C64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn generator_trace_vanishes_at_origin() {
        let s = spec(2, 3, 8.02, 24.8);
        let c0 = OperatorMatrix::identity(32).scale(C64::from(1.0 / 32.0));
        let d = nonrwa_generator(&s, TAU * 6.42, TAU * 0.5, (0.0, 0.0), 0.0, &c0).unwrap();
        assert!(d.trace().norm() < 1e-14);
        assert!(nonrwa_generator(&s, 1.0, 1.0, (0.0, 0.0), 0.0, &OperatorMatrix::identity(8)).is_err());
    }

    #[test]
    fn uncoupled_parts_give_cosine_products() {
        let s = spec(2, 3, 0.0, 24.8);
        let grid = uniform_grid(0.0, 1.0, 1e-2).unwrap();
        let traces = part_traces(&s, &couplings(0.0, 0.0), &grid, 1e-4).unwrap();
        for (&t, tau) in grid.iter().zip(&traces) {
            let expect = (TAU * 6.42 * t / 2.0).cos().powi(2) * (TAU * 0.5 * t / 2.0).cos().powi(3);
            assert!((tau - expect).norm() < 1e-10, "t={t}: {tau} vs {expect}");
        }
    }

    #[test]
    fn step_bound_enforced() {
        let s = spec(2, 3, 8.02, 24.8);
        let max = max_part_step(&s, TAU * 6.42);
        assert!((max - 0.01 / 24.8).abs() < 1e-15);
        let grid = [0.0, 1e-3];
        assert!(matches!(
            part_traces(&s, &couplings(0.0, 0.0), &grid, 5e-4),
            Err(Error::StepTooCoarse { .. })
        ));
        assert!(part_traces(&s, &couplings(0.0, 0.0), &grid, 2.5e-4).is_ok());
    }

    #[test]
    fn halving_the_step_shrinks_error_sixteenfold() {
        let s = spec(2, 3, 8.02, 24.8);
        let c = couplings(0.0, 0.0);
        let grid = [0.0, 0.25, 0.5];
        let run = |h: f64| evolve_part(&s, &c, &grid, h).unwrap().pop().unwrap().c;
        let fine = run(4e-4 / 16.0);
        let e1 = run(4e-4).max_abs_diff(&fine);
        let e2 = run(2e-4).max_abs_diff(&fine);
        let ratio = e1 / e2;
        assert!((13.0..19.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn lowfield_trajectory_is_finite_and_bounded() {
        let s = spec(2, 3, 8.02, 24.8);
        let grid = uniform_grid(0.0, 3.0, 1e-2).unwrap();
        let states = evolve_part(&s, &couplings(0.0, 0.0), &grid, 1e-4).unwrap();
        assert_eq!(states[0].c.dim(), 32);
        assert!((states[0].c.trace().re - 1.0).abs() < 1e-15);
        // Both terms are generated by unitaries, so ‖C‖_F is conserved without dissipation.
        let norm0 = states[0].c.frobenius_norm();
        for st in &states {
            assert!(st.c.is_finite());
            let drift = (st.c.frobenius_norm() - norm0).abs();
            assert!(drift < 1e-9, "‖C‖ drift {drift} at {}", st.t);
        }
    }

    fn lowfield_system(parts: usize, gamma_c: f64) -> SpinSystem {
        use crate::model::GroupSpec;
        SpinSystem::new(
            "lf",
            AngularFreq::from_rad_per_s(gamma_c),
            vec![
                GroupSpec::new(parts * 2, AngularFreq::from_hz(6.42), AngularFreq::ZERO, "II"),
                GroupSpec::new(parts * 3, AngularFreq::from_hz(0.5), AngularFreq::ZERO, "III"),
            ],
        )
        .with_nonrwa(NonRwaSpec {
            parts,
            m: 2,
            n: 3,
            j23: AngularFreq::from_hz(8.02),
            delta_omega: AngularFreq::from_hz(24.8),
        })
    }

    #[test]
    fn signal_starts_at_one_and_is_deterministic() {
        let sys = lowfield_system(4, 0.3);
        let grid = uniform_grid(0.0, 0.5, 1e-3).unwrap();
        let a = fid_nonrwa(&sys, &grid, 1e-4).unwrap();
        let b = fid_nonrwa(&sys, &grid, 1e-4).unwrap();
        assert_eq!(a.re[0], 1.0);
        assert_eq!(a.im[0], 0.0);
        assert_eq!(a.provenance, Provenance::NonRwa);
        assert!(a.re.iter().zip(&b.re).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert!(a.im.iter().zip(&b.im).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn doubling_parts_squares_the_signal() {
        let grid = uniform_grid(0.0, 0.3, 1e-3).unwrap();
        let one = fid_nonrwa(&lowfield_system(2, 0.0), &grid, 1e-4).unwrap();
        let two = fid_nonrwa(&lowfield_system(4, 0.0), &grid, 1e-4).unwrap();
        for (a, b) in one.re.iter().zip(&two.re) {
            assert_eq!(a * a, *b);
        }
    }

    #[test]
    fn missing_spec_is_an_error() {
        let mut sys = lowfield_system(1, 0.0);
        sys.nonrwa = None;
        assert!(matches!(fid_nonrwa(&sys, &[0.0, 1e-3], 1e-4), Err(Error::MissingNonRwa(_))));
        let sys = lowfield_system(1, 0.0);
        assert!(fid_nonrwa(&sys, &[0.1, 0.2], 1e-4).is_err());
    }

    #[test]
    fn default_step_respects_bound() {
        let sys = lowfield_system(4, 0.0);
        assert_eq!(default_part_step(&sys, 1e-3).unwrap(), 1e-4);
        let mut fast = sys.clone();
        fast.nonrwa.as_mut().unwrap().delta_omega = AngularFreq::from_hz(24.8 * 26.0);
        let h = default_part_step(&fast, 1e-3).unwrap();
        assert!(h <= max_part_step(fast.nonrwa.as_ref().unwrap(), TAU * 6.42));
        assert!(((1e-3 / h).round() * h - 1e-3).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn identity_is_fixed_by_dissipation(g2 in 0.0..3.0f64, g3 in 0.0..3.0f64) {
            let s = spec(1, 2, 0.0, 24.8);
            let c = PartCouplings { j12: 0.0, j13: 0.0, gamma_ii: g2, gamma_iii: g3 };
            let grid = uniform_grid(0.0, 1.0, 0.1).unwrap();
            let traces = part_traces(&s, &c, &grid, 2e-4).unwrap();
            for tau in traces {
                prop_assert!((tau - 1.0).norm() < 1e-12);
            }
        }
    }
}
