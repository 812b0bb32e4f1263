//! Dense complex matrices over tensor products of qubits.
//!
//! Site 0 is the leftmost (most significant) tensor factor, so site `s` of an
//! `n`-qubit register lives in bit `n - 1 - s` of a basis index. Basis state
//! `0` of a qubit is the σz = +1 eigenstate.

use std::ops::{Add, AddAssign, Mul, Sub};

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, Zip};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    data: Array2<C64>,
}

impl OperatorMatrix {
    pub fn from_array(data: Array2<C64>) -> Result<Self> {
        let (rows, cols) = data.dim();
        if rows != cols {
            return Err(Error::DimensionMismatch { left: rows, right: cols });
        }
        if !rows.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("dimension {rows} is not a power of two")));
        }
        Ok(Self { data })
    }

    pub fn zeros(dim: usize) -> Self {
        debug_assert!(dim.is_power_of_two());
        Self {
            data: Array2::zeros((dim, dim)),
        }
    }

    pub fn identity(dim: usize) -> Self {
        debug_assert!(dim.is_power_of_two());
        Self {
            data: Array2::eye(dim),
        }
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.data[[i, i]] = d;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn as_array(&self) -> &Array2<C64> {
        &self.data
    }

    pub(crate) fn as_array_mut(&mut self) -> &mut Array2<C64> {
        &mut self.data
    }

    pub fn view(&self) -> ArrayView2<'_, C64> {
        self.data.view()
    }

    pub fn into_array(self) -> Array2<C64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[[row, col]]
    }

    pub fn set(&mut self, row: usize, col: usize, value: C64) {
        self.data[[row, col]] = value;
    }

    pub fn trace(&self) -> C64 {
        self.data.diag().sum()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            data: self.data.t().mapv(|z| z.conj()),
        }
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            data: &self.data * factor,
        }
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        self.check_dim(rhs)?;
        Ok(self.matmul_unchecked(rhs))
    }

    pub(crate) fn matmul_unchecked(&self, rhs: &Self) -> Self {
        let mut out = Array2::zeros(self.data.raw_dim());
        general_mat_mul(ONE, &self.data, &rhs.data, ZERO, &mut out);
        Self { data: out }
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: C64, other: &Self) {
        self.data.scaled_add(alpha, &other.data);
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        Zip::from(&self.data)
            .and(&other.data)
            .fold(0.0_f64, |acc, a, b| acc.max((a - b).norm()))
    }

    /// Largest elementwise deviation from Hermiticity, `max |m_ij - conj(m_ji)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let dim = self.dim();
        let mut worst = 0.0_f64;
        for i in 0..dim {
            for j in i..dim {
                worst = worst.max((self.data[[i, j]] - self.data[[j, i]].conj()).norm());
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// True when every off-diagonal entry is exactly zero.
    pub fn is_diagonal(&self) -> bool {
        self.data
            .indexed_iter()
            .all(|((i, j), z)| i == j || *z == ZERO)
    }

    pub fn diagonal(&self) -> Vec<C64> {
        self.data.diag().to_vec()
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() == other.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            })
        }
    }
}

impl Add<&OperatorMatrix> for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn add(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix {
            data: &self.data + &rhs.data,
        }
    }
}

impl Sub<&OperatorMatrix> for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn sub(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix {
            data: &self.data - &rhs.data,
        }
    }
}

impl AddAssign<&OperatorMatrix> for OperatorMatrix {
    fn add_assign(&mut self, rhs: &OperatorMatrix) {
        self.data += &rhs.data;
    }
}

impl Mul<&OperatorMatrix> for &OperatorMatrix {
    type Output = OperatorMatrix;

    /// Panics on a dimension mismatch; use [`OperatorMatrix::matmul`] for a checked product.
    fn mul(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        self.matmul_unchecked(rhs)
    }
}

impl Mul<C64> for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn mul(self, rhs: C64) -> OperatorMatrix {
        self.scale(rhs)
    }
}

impl Mul<f64> for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn mul(self, rhs: f64) -> OperatorMatrix {
        self.scale(C64::new(rhs, 0.0))
    }
}

/// Single-qubit operator basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
    /// σ₊ = (σx + iσy)/2 = |0⟩⟨1|.
    Plus,
    /// σ₋ = (σx − iσy)/2 = |1⟩⟨0|.
    Minus,
}

pub fn pauli(mu: Pauli) -> OperatorMatrix {
    let entries = match mu {
        Pauli::I => [ONE, ZERO, ZERO, ONE],
        Pauli::X => [ZERO, ONE, ONE, ZERO],
        Pauli::Y => [ZERO, -I, I, ZERO],
        Pauli::Z => [ONE, ZERO, ZERO, -ONE],
        Pauli::Plus => [ZERO, ONE, ZERO, ZERO],
        Pauli::Minus => [ZERO, ZERO, ONE, ZERO],
    };
    OperatorMatrix {
        data: Array2::from_shape_vec((2, 2), entries.to_vec()).expect("2x2 shape"),
    }
}

/// Kronecker product `a ⊗ b`, with `a` as the more significant factor.
pub fn kron(a: &OperatorMatrix, b: &OperatorMatrix) -> OperatorMatrix {
    let (da, db) = (a.dim(), b.dim());
    let mut out = Array2::zeros((da * db, da * db));
    for ((i, j), &x) in a.data.indexed_iter() {
        if x == ZERO {
            continue;
        }
        let mut block = out.slice_mut(ndarray::s![i * db..(i + 1) * db, j * db..(j + 1) * db]);
        block.zip_mut_with(&b.data, |o, &y| *o = x * y);
    }
    OperatorMatrix { data: out }
}

/// Lift a single-qubit operator onto `site` of an `n_qubits` register.
pub fn embed(op: &OperatorMatrix, site: usize, n_qubits: usize) -> Result<OperatorMatrix> {
    if op.dim() != 2 {
        return Err(Error::DimensionMismatch { left: op.dim(), right: 2 });
    }
    if site >= n_qubits {
        return Err(Error::SiteOutOfRange { site, n_qubits });
    }
    let dim = 1usize << n_qubits;
    let bit = n_qubits - 1 - site;
    let mut out = Array2::zeros((dim, dim));
    for row in 0..dim {
        let r = (row >> bit) & 1;
        for c in 0..2 {
            let value = op.data[[r, c]];
            if value != ZERO {
                let col = (row & !(1 << bit)) | (c << bit);
                out[[row, col]] = value;
            }
        }
    }
    Ok(OperatorMatrix { data: out })
}

/// `embed(pauli(mu), site, n_qubits)`.
pub fn pauli_at(mu: Pauli, site: usize, n_qubits: usize) -> Result<OperatorMatrix> {
    embed(&pauli(mu), site, n_qubits)
}

/// Diagonal of σz on `site`, as ±1.
pub fn sigma_z_diagonal(site: usize, n_qubits: usize) -> Vec<f64> {
    let bit = n_qubits - 1 - site;
    (0..1usize << n_qubits)
        .map(|i| if (i >> bit) & 1 == 0 { 1.0 } else { -1.0 })
        .collect()
}

pub fn commutator(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<OperatorMatrix> {
    a.check_dim(b)?;
    Ok(&a.matmul_unchecked(b) - &b.matmul_unchecked(a))
}

pub fn anticommutator(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<OperatorMatrix> {
    a.check_dim(b)?;
    Ok(&a.matmul_unchecked(b) + &b.matmul_unchecked(a))
}

/// Infinite-temperature GKSL term on one site:
/// `(γ/2)(σ₊ m σ₋ + σ₋ m σ₊ − m)` with σ± acting on `site`.
pub fn dissipator(gamma: f64, site: usize, m: &OperatorMatrix) -> Result<OperatorMatrix> {
    let mut out = OperatorMatrix::zeros(m.dim());
    add_dissipator(&mut out, gamma, site, m)?;
    Ok(out)
}

/// Accumulate `dissipator(gamma, site, m)` into `out` without forming σ± matrices.
///
/// `(σ₊ m σ₋)_ij` is non-zero only when both indices have the site bit clear,
/// and then equals `m` with that bit set on both sides; `σ₋ m σ₊` is the mirror.
pub fn add_dissipator(out: &mut OperatorMatrix, gamma: f64, site: usize, m: &OperatorMatrix) -> Result<()> {
    let mut rates = vec![0.0; m.n_qubits().max(site + 1)];
    rates[site] = gamma;
    add_dissipators(out, &rates, m)
}

/// Accumulate `Σ_s dissipator(rates[s], s, m)` into `out`, one rate per site.
pub fn add_dissipators(out: &mut OperatorMatrix, rates: &[f64], m: &OperatorMatrix) -> Result<()> {
    if let Some(bad) = rates.iter().find(|g| !(**g >= 0.0) || !g.is_finite()) {
        return Err(Error::InvalidArgument(format!("dissipation rate {bad} must be finite and ≥ 0")));
    }
    out.check_dim(m)?;
    let n_qubits = m.n_qubits();
    if rates.len() > n_qubits {
        return Err(Error::SiteOutOfRange {
            site: rates.len() - 1,
            n_qubits,
        });
    }
    let loss: f64 = rates.iter().map(|g| 0.5 * g).sum();
    if loss == 0.0 {
        return Ok(());
    }
    let dim = m.dim();
    let src_std = m.data.as_standard_layout();
    let src = src_std.as_slice().expect("standard layout");
    if !out.data.is_standard_layout() {
        out.data = out.data.as_standard_layout().into_owned();
    }
    let dst = out.data.as_slice_mut().expect("standard layout");
    for (d, s) in dst.iter_mut().zip(src) {
        *d -= s * loss;
    }
    for (site, &gamma) in rates.iter().enumerate() {
        if gamma == 0.0 {
            continue;
        }
        let half = 0.5 * gamma;
        let mask = 1usize << (n_qubits - 1 - site);
        for i in 0..dim {
            let bi = i & mask;
            let p = i ^ mask;
            let partner = &src[p * dim..(p + 1) * dim];
            let row = &mut dst[i * dim..(i + 1) * dim];
            for (j, d) in row.iter_mut().enumerate() {
                if j & mask == bi {
                    *d += partner[j ^ mask] * half;
                }
            }
        }
    }
    Ok(())
}
