//! Random states and unitaries.
//!
//! Every sampler is a pure function of its inputs and a generator. Generators
//! come from an [`RngStream`]: a ChaCha8 keystream selected by
//! `(master_seed, stream_id)`, so any trial can be replayed in isolation and
//! trials can run on any number of workers.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::analytics::{epsilon_for_purity, PolarizationChoice};
use crate::error::{Error, Result};
use crate::linalg::{
    check_unit_interval, householder_qr, Bipartition, PureState, SquareMatrix, C64,
};

/// Deterministic handle on an independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        RngStream {
            master_seed,
            stream_id,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn generator(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// The two disjoint child streams `2·id` and `2·id + 1`, used for the
    /// reference state and the unbiased state of a polarized draw.
    pub fn split(&self) -> (RngStream, RngStream) {
        let base = self.stream_id.wrapping_mul(2);
        (
            RngStream::new(self.master_seed, base),
            RngStream::new(self.master_seed, base.wrapping_add(1)),
        )
    }
}

/// Measure used for the unbiased component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    /// iid complex Gaussian amplitudes with `E|X|² = 1/(NM)`; unit norm on average.
    #[default]
    Gaussian,
    /// Uniform on the unit sphere (the unitarily invariant measure).
    Sphere,
}

impl MeasureKind {
    pub fn name(&self) -> &'static str {
        match self {
            MeasureKind::Gaussian => "gaussian",
            MeasureKind::Sphere => "sphere",
        }
    }
}

/// Choice of polarizing reference state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolarizationKind {
    /// Reference drawn from the same unbiased measure as the noise.
    Unbiased,
    /// Product reference `|ξ⟩ ⊗ |χ⟩`.
    Separable,
    /// Reference whose reduction on A is `I/N`.
    MaxEntangled,
    /// A user supplied reference state.
    FixedState(PureState),
}

impl PolarizationKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolarizationKind::Unbiased => "unbiased",
            PolarizationKind::Separable => "separable",
            PolarizationKind::MaxEntangled => "maxent",
            PolarizationKind::FixedState(_) => "fixed",
        }
    }

    pub fn check_dims(&self, dims: Bipartition) -> Result<()> {
        match self {
            PolarizationKind::FixedState(state) => dims.check_same(&state.dims()),
            PolarizationKind::MaxEntangled => dims.require_a_not_larger(),
            _ => Ok(()),
        }
    }
}

/// Polarization kind together with the bias `ε` and whether the reference is
/// moved along its local orbit by a random `U_A ⊗ U_B` on every draw.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationSpec {
    kind: PolarizationKind,
    epsilon: f64,
    randomize_local: bool,
}

impl PolarizationSpec {
    pub fn new(kind: PolarizationKind, epsilon: f64, randomize_local: bool) -> Result<Self> {
        check_unit_interval("epsilon", epsilon)?;
        Ok(PolarizationSpec {
            kind,
            epsilon,
            randomize_local,
        })
    }

    pub fn kind(&self) -> &PolarizationKind {
        &self.kind
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn randomize_local(&self) -> bool {
        self.randomize_local
    }
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R, std_per_part: f64) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * std_per_part, im * std_per_part)
}

/// Vector of `len` iid complex Gaussians with `E|z|² = variance`.
fn gaussian_vector<R: Rng + ?Sized>(len: usize, variance: f64, rng: &mut R) -> Vec<C64> {
    let s = (0.5 * variance).sqrt();
    (0..len).map(|_| complex_normal(rng, s)).collect()
}

/// Uniform unit vector in `C^len`. A zero Gaussian draw is retried once.
fn sphere_vector<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Result<Vec<C64>> {
    for _ in 0..2 {
        let mut v = gaussian_vector(len, 1.0, rng);
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|z| *z /= norm);
            return Ok(v);
        }
    }
    Err(Error::DegenerateDraw)
}

/// State with iid `N_C(0, 1/(NM))` amplitudes, so `E‖ψ‖² = 1`.
pub fn gaussian_state<R: Rng + ?Sized>(dims: Bipartition, rng: &mut R) -> PureState {
    let amps = gaussian_vector(dims.total(), 1.0 / dims.total() as f64, rng);
    PureState::new(dims, amps).expect("length matches dims")
}

/// Uniformly distributed unit vector on `H_A ⊗ H_B`.
pub fn sphere_state<R: Rng + ?Sized>(dims: Bipartition, rng: &mut R) -> Result<PureState> {
    PureState::new(dims, sphere_vector(dims.total(), rng)?)
}

/// Draw from `measure`.
pub fn unbiased_state<R: Rng + ?Sized>(
    dims: Bipartition,
    measure: MeasureKind,
    rng: &mut R,
) -> Result<PureState> {
    match measure {
        MeasureKind::Gaussian => Ok(gaussian_state(dims, rng)),
        MeasureKind::Sphere => sphere_state(dims, rng),
    }
}

/// Haar-distributed `dim×dim` unitary.
///
/// QR of a complex Ginibre matrix, with column `k` of `Q` multiplied by the
/// phase of `R_kk` so the factorization is the unique one with positive `R`
/// diagonal.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> SquareMatrix {
    let ginibre = SquareMatrix::from_row_major(dim, gaussian_vector(dim * dim, 1.0, rng))
        .expect("square");
    let (mut q, r_diag) = householder_qr(&ginibre);
    for (k, r) in r_diag.iter().enumerate() {
        let norm = r.norm();
        let phase = if norm > 0.0 { r / norm } else { C64::new(1.0, 0.0) };
        for i in 0..dim {
            let v = q.get(i, k) * phase;
            q.set(i, k, v);
        }
    }
    q
}

/// Random product state `ξ ⊗ χ` with `ξ`, `χ` uniform on their unit spheres.
pub fn separable_state<R: Rng + ?Sized>(dims: Bipartition, rng: &mut R) -> Result<PureState> {
    let xi = sphere_vector(dims.n_a(), rng)?;
    let chi = sphere_vector(dims.n_b(), rng)?;
    PureState::product(&xi, &chi)
}

/// `(1/√N) Σ_i |i⟩_A |i⟩_B`, embedded in the first `N` basis vectors of B.
pub fn canonical_max_entangled(dims: Bipartition) -> Result<PureState> {
    dims.require_a_not_larger()?;
    let n = dims.n_a();
    let mut amps = vec![C64::default(); dims.total()];
    let w = C64::new(1.0 / (n as f64).sqrt(), 0.0);
    for i in 0..n {
        amps[i * dims.n_b() + i] = w;
    }
    PureState::new(dims, amps)
}

/// `(U_A ⊗ U_B)|ψ⟩`, i.e. `Ψ ↦ U_A Ψ U_Bᵀ` on the coefficient matrix.
pub fn apply_local_unitaries(
    psi: &PureState,
    u_a: &SquareMatrix,
    u_b: &SquareMatrix,
) -> Result<PureState> {
    let dims = psi.dims();
    let (n, m) = (dims.n_a(), dims.n_b());
    if u_a.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: u_a.dim(),
        });
    }
    if u_b.dim() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: u_b.dim(),
        });
    }
    let amps = psi.amplitudes();
    // T = U_A Ψ
    let mut t = vec![C64::default(); n * m];
    for i in 0..n {
        for k in 0..n {
            let u = u_a.get(i, k);
            let src = &amps[k * m..(k + 1) * m];
            for (dst, s) in t[i * m..(i + 1) * m].iter_mut().zip(src) {
                *dst += u * s;
            }
        }
    }
    // out[i][μ] = Σ_ν T[i][ν] U_B[μ][ν]
    let ub = u_b.as_slice();
    let mut out = vec![C64::default(); n * m];
    for i in 0..n {
        let ti = &t[i * m..(i + 1) * m];
        for mu in 0..m {
            let row = &ub[mu * m..(mu + 1) * m];
            out[i * m + mu] = ti.iter().zip(row).map(|(a, b)| a * b).sum();
        }
    }
    PureState::new(dims, out)
}

/// Maximally entangled state; with `randomize` a Haar `U_A ⊗ U_B` is applied
/// to the canonical one. Requires `N ≤ M`.
pub fn max_entangled_state<R: Rng + ?Sized>(
    dims: Bipartition,
    rng: &mut R,
    randomize: bool,
) -> Result<PureState> {
    let base = canonical_max_entangled(dims)?;
    if !randomize {
        return Ok(base);
    }
    let u_a = haar_unitary(dims.n_a(), rng);
    let u_b = haar_unitary(dims.n_b(), rng);
    apply_local_unitaries(&base, &u_a, &u_b)
}

/// `ε|φ₀⟩ + √(1−ε²)|φ⟩`, not renormalized.
pub fn superpose(epsilon: f64, phi0: &PureState, phi: &PureState) -> Result<PureState> {
    check_unit_interval("epsilon", epsilon)?;
    phi0.dims().check_same(&phi.dims())?;
    let w = (1.0 - epsilon * epsilon).sqrt();
    let amps = phi0
        .amplitudes()
        .iter()
        .zip(phi.amplitudes())
        .map(|(a, b)| a * epsilon + b * w)
        .collect();
    PureState::new(phi0.dims(), amps)
}

/// Reference state for one draw, per `kind` and `randomize_local`.
pub fn reference_state<R: Rng + ?Sized>(
    kind: &PolarizationKind,
    randomize_local: bool,
    dims: Bipartition,
    measure: MeasureKind,
    rng: &mut R,
) -> Result<PureState> {
    kind.check_dims(dims)?;
    match kind {
        PolarizationKind::Unbiased => unbiased_state(dims, measure, rng),
        PolarizationKind::Separable if randomize_local => separable_state(dims, rng),
        PolarizationKind::Separable => PureState::basis(dims, 0, 0),
        PolarizationKind::MaxEntangled => max_entangled_state(dims, rng, randomize_local),
        PolarizationKind::FixedState(state) if randomize_local => {
            let u_a = haar_unitary(dims.n_a(), rng);
            let u_b = haar_unitary(dims.n_b(), rng);
            apply_local_unitaries(state, &u_a, &u_b)
        }
        PolarizationKind::FixedState(state) => Ok(state.clone()),
    }
}

/// One draw of the polarized ensemble. The reference uses child stream
/// `2·id` and the unbiased component child stream `2·id + 1`.
pub fn polarized_sample(
    spec: &PolarizationSpec,
    dims: Bipartition,
    measure: MeasureKind,
    stream: &RngStream,
) -> Result<PureState> {
    let (ref_stream, noise_stream) = stream.split();
    let phi0 = reference_state(
        &spec.kind,
        spec.randomize_local,
        dims,
        measure,
        &mut ref_stream.generator(),
    )?;
    let phi = unbiased_state(dims, measure, &mut noise_stream.generator())?;
    superpose(spec.epsilon, &phi0, &phi)
}

/// `√(1−η²)|ξ₀⟩⊗|χ₀⟩ + η|φ⟩` with Gaussian noise `φ`.
///
/// Without `fixed_product` the product state is a fresh random product state
/// per draw.
pub fn noisy_separable_sample(
    eta: f64,
    dims: Bipartition,
    stream: &RngStream,
    fixed_product: Option<&PureState>,
) -> Result<PureState> {
    check_unit_interval("eta", eta)?;
    let epsilon = (1.0 - eta * eta).sqrt();
    let (ref_stream, noise_stream) = stream.split();
    let phi0 = match fixed_product {
        Some(state) => {
            dims.check_same(&state.dims())?;
            state.clone()
        }
        None => separable_state(dims, &mut ref_stream.generator())?,
    };
    let phi = gaussian_state(dims, &mut noise_stream.generator());
    superpose(epsilon, &phi0, &phi)
}

/// A draw targeting a prescribed typical purity, with the parameters used.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPuritySample {
    pub state: PureState,
    pub choice: PolarizationChoice,
}

/// Draw a state whose ensemble has typical purity `target`.
///
/// `ε` solves the mean-purity law for the reference purity chosen by the
/// comparison with the unbiased value; the reference is a random product
/// state or a locally randomized maximally entangled state, and the noise is
/// drawn from `measure`.
pub fn fixed_purity_sample(
    target_purity: f64,
    dims: Bipartition,
    measure: MeasureKind,
    stream: &RngStream,
) -> Result<FixedPuritySample> {
    let choice = epsilon_for_purity(target_purity, dims)?;
    let kind = choice.kind.clone();
    let spec = PolarizationSpec::new(kind, choice.epsilon, true)?;
    let state = polarized_sample(&spec, dims, measure, stream)?;
    Ok(FixedPuritySample { state, choice })
}
