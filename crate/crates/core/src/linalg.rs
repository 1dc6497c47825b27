//! Dense complex kernel for bipartite pure states.
//!
//! A [`PureState`] on `H_A ⊗ H_B` stores its `N·M` amplitudes with the B index
//! running fastest: `amp[i·M + μ] = ⟨i, μ|ψ⟩`. Equivalently the amplitude vector
//! is the row-major `N×M` coefficient matrix `Ψ`, and the reduced state of A is
//! `ρ_A = Ψ Ψ†`.
//!
//! States are not required to be normalized. Every trace-type identity in this
//! module holds for arbitrary norm (e.g. `Tr ρ_A = ‖ψ‖²`).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Dimensions `(N, M)` of the two parties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawBipartition", deny_unknown_fields)]
pub struct Bipartition {
    n_a: usize,
    n_b: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBipartition {
    n_a: usize,
    n_b: usize,
}

impl TryFrom<RawBipartition> for Bipartition {
    type Error = Error;

    fn try_from(raw: RawBipartition) -> Result<Self> {
        Bipartition::new(raw.n_a, raw.n_b)
    }
}

impl Bipartition {
    pub fn new(n_a: usize, n_b: usize) -> Result<Self> {
        if n_a == 0 || n_b == 0 {
            return Err(Error::InvalidDimensions(format!(
                "both parties need dimension >= 1, got ({n_a}, {n_b})"
            )));
        }
        if n_a.checked_mul(n_b).is_none() {
            return Err(Error::InvalidDimensions(format!(
                "total dimension {n_a}x{n_b} overflows"
            )));
        }
        Ok(Bipartition { n_a, n_b })
    }

    /// Balanced bipartition `N = M = n`.
    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    /// Dimension `N` of subsystem A.
    pub fn n_a(&self) -> usize {
        self.n_a
    }

    /// Dimension `M` of subsystem B.
    pub fn n_b(&self) -> usize {
        self.n_b
    }

    /// Total dimension `N·M`.
    pub fn total(&self) -> usize {
        self.n_a * self.n_b
    }

    /// Rejects `N > M` for callers whose formulas need the smaller party on A.
    pub fn require_a_not_larger(&self) -> Result<()> {
        if self.n_a > self.n_b {
            return Err(Error::domain(format!(
                "operation requires dim A <= dim B, got N = {} > M = {}",
                self.n_a, self.n_b
            )));
        }
        Ok(())
    }

    pub(crate) fn check_same(&self, other: &Bipartition) -> Result<()> {
        if self != other {
            return Err(Error::DimensionMismatch {
                expected: self.total(),
                found: other.total(),
            });
        }
        Ok(())
    }
}

/// A (possibly unnormalized) vector in `H_A ⊗ H_B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateRecord", into = "StateRecord")]
pub struct PureState {
    dims: Bipartition,
    amplitudes: Vec<C64>,
}

/// Wire format: `{"n_a": .., "n_b": .., "amplitudes": [[re, im], ...]}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateRecord {
    n_a: usize,
    n_b: usize,
    amplitudes: Vec<[f64; 2]>,
}

impl TryFrom<StateRecord> for PureState {
    type Error = Error;

    fn try_from(rec: StateRecord) -> Result<Self> {
        let dims = Bipartition::new(rec.n_a, rec.n_b)?;
        let amps = rec
            .amplitudes
            .into_iter()
            .map(|[re, im]| C64::new(re, im))
            .collect();
        PureState::new(dims, amps)
    }
}

impl From<PureState> for StateRecord {
    fn from(state: PureState) -> Self {
        StateRecord {
            n_a: state.dims.n_a,
            n_b: state.dims.n_b,
            amplitudes: state.amplitudes.iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

impl PureState {
    pub fn new(dims: Bipartition, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != dims.total() {
            return Err(Error::DimensionMismatch {
                expected: dims.total(),
                found: amplitudes.len(),
            });
        }
        Ok(PureState { dims, amplitudes })
    }

    /// Computational basis product state `|a⟩_A ⊗ |b⟩_B`.
    pub fn basis(dims: Bipartition, a: usize, b: usize) -> Result<Self> {
        if a >= dims.n_a || b >= dims.n_b {
            return Err(Error::domain(format!(
                "basis index ({a}, {b}) out of range for dims ({}, {})",
                dims.n_a, dims.n_b
            )));
        }
        let mut amps = vec![ZERO; dims.total()];
        amps[a * dims.n_b + b] = ONE;
        Ok(PureState { dims, amplitudes: amps })
    }

    /// Tensor product `ξ ⊗ χ`.
    pub fn product(xi: &[C64], chi: &[C64]) -> Result<Self> {
        let dims = Bipartition::new(xi.len(), chi.len())?;
        let amps = xi
            .iter()
            .flat_map(|&x| chi.iter().map(move |&c| x * c))
            .collect();
        Ok(PureState { dims, amplitudes: amps })
    }

    pub fn dims(&self) -> Bipartition {
        self.dims
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, i: usize, mu: usize) -> C64 {
        self.amplitudes[i * self.dims.n_b + mu]
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    /// Row `i` of the coefficient matrix: the amplitudes `⟨i, μ|ψ⟩` for all `μ`.
    fn row(&self, i: usize) -> &[C64] {
        let m = self.dims.n_b;
        &self.amplitudes[i * m..(i + 1) * m]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        self.dims.check_same(&other.dims)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn scaled(&self, factor: f64) -> PureState {
        PureState {
            dims: self.dims,
            amplitudes: self.amplitudes.iter().map(|z| z * factor).collect(),
        }
    }

    /// Unit-norm copy. Fails on the zero vector.
    pub fn normalized(&self) -> Result<PureState> {
        let norm = self.norm_sqr().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::domain("cannot normalize a zero or non-finite vector"));
        }
        Ok(self.scaled(1.0 / norm))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Row-major square complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl SquareMatrix {
    pub fn zeros(dim: usize) -> Self {
        SquareMatrix {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    pub fn from_row_major(dim: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        Ok(SquareMatrix { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: C64) {
        self.data[i * self.dim + j] = value;
    }

    pub fn adjoint(&self) -> SquareMatrix {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &SquareMatrix) -> Result<SquareMatrix> {
        if self.dim != rhs.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: rhs.dim,
            });
        }
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                let rhs_row = &rhs.data[k * n..(k + 1) * n];
                let out_row = &mut out.data[i * n..(i + 1) * n];
                for (o, b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &SquareMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `max |(U†U − I)_{ij}|`.
    pub fn unitarity_defect(&self) -> f64 {
        let gram = self.adjoint().matmul(self).expect("square");
        gram.max_abs_diff(&Self::identity(self.dim))
    }
}

/// Householder QR of a square matrix.
///
/// Returns the unitary factor `Q` and the diagonal of `R`. Each reflector is
/// chosen as `I − 2vv†` with `v ∝ x − α e₁`, `α = −e^{i arg x₀} ‖x‖`.
pub fn householder_qr(a: &SquareMatrix) -> (SquareMatrix, Vec<C64>) {
    let n = a.dim;
    let mut work = a.data.clone();
    let mut reflectors: Vec<Option<Vec<C64>>> = Vec::with_capacity(n);
    let mut r_diag = Vec::with_capacity(n);

    for k in 0..n {
        let norm: f64 = (k..n).map(|i| work[i * n + k].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            reflectors.push(None);
            r_diag.push(ZERO);
            continue;
        }
        let x0 = work[k * n + k];
        let phase = if x0 == ZERO { ONE } else { x0 / x0.norm() };
        let alpha = -phase * norm;
        let mut v: Vec<C64> = (k..n).map(|i| work[i * n + k]).collect();
        v[0] -= alpha;
        let v_norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if v_norm == 0.0 {
            reflectors.push(None);
            r_diag.push(x0);
            continue;
        }
        for z in v.iter_mut() {
            *z /= v_norm;
        }
        // work[k.., k..] -= 2 v (v† work[k.., k..])
        for j in k..n {
            let dot: C64 = (k..n).map(|i| v[i - k].conj() * work[i * n + j]).sum();
            let s = dot * 2.0;
            for i in k..n {
                work[i * n + j] -= v[i - k] * s;
            }
        }
        r_diag.push(alpha);
        reflectors.push(Some(v));
    }

    // Q = H_0 H_1 ... H_{n-1}, accumulated right-to-left onto the identity.
    let mut q = SquareMatrix::identity(n);
    for k in (0..n).rev() {
        let Some(v) = &reflectors[k] else { continue };
        for j in 0..n {
            let dot: C64 = (k..n).map(|i| v[i - k].conj() * q.data[i * n + j]).sum();
            let s = dot * 2.0;
            for i in k..n {
                q.data[i * n + j] -= v[i - k] * s;
            }
        }
    }
    (q, r_diag)
}

/// Hermitian `dim×dim` matrix; the reduced state of subsystem A and related
/// operators.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    entries: Vec<C64>,
}

impl DensityMatrix {
    pub fn new(dim: usize, entries: Vec<C64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimensions("density matrix of dimension 0".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Ok(DensityMatrix { dim, entries })
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut entries = vec![ZERO; n * n];
        for (i, &d) in diag.iter().enumerate() {
            entries[i * n + i] = C64::new(d, 0.0);
        }
        Self::new(n, entries)
    }

    /// `I/dim`.
    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        Self::from_diagonal(&vec![1.0 / dim as f64; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries[i * self.dim + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.entries[i * self.dim + i].re).sum()
    }

    /// `max |ρ_ij − conj(ρ_ji)|`.
    pub fn hermiticity_residue(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                let d = (self.entries[i * n + j] - self.entries[j * n + i].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Frobenius norm `sqrt(Σ |ρ_ij|²)`.
    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> DensityMatrix {
        DensityMatrix {
            dim: self.dim,
            entries: self.entries.iter().map(|z| z * factor).collect(),
        }
    }
}

/// Fills `out[i][j] = Σ_μ x[i,μ]·conj(y[j,μ])` for coefficient matrices of
/// equal shape.
fn contract_b(x: &PureState, y: &PureState, out: &mut [C64]) {
    let n = x.dims.n_a;
    for i in 0..n {
        let xi = x.row(i);
        for j in 0..n {
            let yj = y.row(j);
            out[i * n + j] += xi.iter().zip(yj).map(|(a, b)| a * b.conj()).sum::<C64>();
        }
    }
}

/// Reduced state of A: `ρ[i][j] = Σ_μ ψ[i,μ]·conj(ψ[j,μ])`.
///
/// Only the upper triangle is computed; the lower one is its conjugate mirror,
/// so the output is exactly Hermitian with an exactly real diagonal.
pub fn partial_trace_b(psi: &PureState) -> DensityMatrix {
    let n = psi.dims.n_a;
    let mut rho = vec![ZERO; n * n];
    for i in 0..n {
        let ri = psi.row(i);
        rho[i * n + i] = C64::new(ri.iter().map(|z| z.norm_sqr()).sum(), 0.0);
        for j in (i + 1)..n {
            let rj = psi.row(j);
            let v: C64 = ri.iter().zip(rj).map(|(a, b)| a * b.conj()).sum();
            rho[i * n + j] = v;
            rho[j * n + i] = v.conj();
        }
    }
    DensityMatrix { dim: n, entries: rho }
}

/// `Tr ρ² = Σ_ij |ρ_ij|²` (valid for Hermitian `ρ`).
pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.entries.iter().map(|z| z.norm_sqr()).sum()
}

/// Participation ratio `1/Tr ρ̂²` of the trace-normalized matrix `ρ̂ = ρ/Tr ρ`.
pub fn effective_dimension(rho: &DensityMatrix) -> Result<f64> {
    let tr = rho.trace();
    let p = purity(rho);
    if p == 0.0 || tr == 0.0 {
        return Err(Error::domain("effective dimension of the zero matrix"));
    }
    Ok(tr * tr / p)
}

/// `Tr(AB)`; the imaginary residue of a product of Hermitian matrices is
/// rounding noise and is dropped.
pub fn trace_product(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            found: b.dim,
        });
    }
    let n = a.dim;
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (a.entries[i * n + j] * b.entries[j * n + i]).re;
        }
    }
    Ok(acc)
}

/// `S = Tr_B(|φ₀⟩⟨φ| + |φ⟩⟨φ₀|)`. Hermitian, generally indefinite.
pub fn cross_operator(phi0: &PureState, phi: &PureState) -> Result<DensityMatrix> {
    phi0.dims.check_same(&phi.dims)?;
    let n = phi0.dims.n_a;
    let mut s = vec![ZERO; n * n];
    contract_b(phi0, phi, &mut s);
    // add the adjoint of the first term
    let mut out = s.clone();
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] += s[j * n + i].conj();
        }
    }
    Ok(DensityMatrix { dim: n, entries: out })
}

pub(crate) fn check_unit_interval(name: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::domain(format!("{name} = {value} must lie in [0, 1]")));
    }
    Ok(())
}

/// The six traces entering the purity of `ε|φ₀⟩ + √(1−ε²)|φ⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurityTerms {
    pub tr_sigma0_sq: f64,
    pub tr_sigma_sq: f64,
    pub tr_s_sq: f64,
    pub tr_sigma0_sigma: f64,
    pub tr_sigma0_s: f64,
    pub tr_sigma_s: f64,
}

impl PurityTerms {
    pub fn compute(phi0: &PureState, phi: &PureState) -> Result<Self> {
        phi0.dims.check_same(&phi.dims)?;
        let sigma0 = partial_trace_b(phi0);
        let sigma = partial_trace_b(phi);
        let s = cross_operator(phi0, phi)?;
        Ok(PurityTerms {
            tr_sigma0_sq: purity(&sigma0),
            tr_sigma_sq: purity(&sigma),
            tr_s_sq: purity(&s),
            tr_sigma0_sigma: trace_product(&sigma0, &sigma)?,
            tr_sigma0_s: trace_product(&sigma0, &s)?,
            tr_sigma_s: trace_product(&sigma, &s)?,
        })
    }

    /// Weighted sum of the six terms at bias `ε`.
    pub fn combine(&self, epsilon: f64) -> Result<f64> {
        check_unit_interval("epsilon", epsilon)?;
        let e2 = epsilon * epsilon;
        let c2 = 1.0 - e2;
        let c = c2.sqrt();
        Ok(e2 * e2 * self.tr_sigma0_sq
            + c2 * c2 * self.tr_sigma_sq
            + e2 * c2 * self.tr_s_sq
            + 2.0 * e2 * c2 * self.tr_sigma0_sigma
            + 2.0 * e2 * epsilon * c * self.tr_sigma0_s
            + 2.0 * epsilon * c2 * c * self.tr_sigma_s)
    }
}

/// Purity of `ε|φ₀⟩ + √(1−ε²)|φ⟩` assembled from the six trace terms.
pub fn purity_decomposition(phi0: &PureState, phi: &PureState, epsilon: f64) -> Result<f64> {
    check_unit_interval("epsilon", epsilon)?;
    PurityTerms::compute(phi0, phi)?.combine(epsilon)
}
