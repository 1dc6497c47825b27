//! Closed-form predictions for polarized ensembles.
//!
//! Notation: `N = dim H_A`, `M = dim H_B`, `π_unb = (M+N)/(MN)` is the typical
//! purity of the unbiased Gaussian ensemble and `(M+N)/(MN+1)` its exact value
//! on the unit sphere. A reference state of purity `π₀` mixed in with bias `ε`
//! shifts the typical purity to `ε⁴π₀ + (1−ε⁴)π_unb`.

use crate::error::{Error, Result};
use crate::linalg::{check_unit_interval, Bipartition};
use crate::sampling::{MeasureKind, PolarizationKind};

fn nm(dims: Bipartition) -> (f64, f64) {
    (dims.n_a() as f64, dims.n_b() as f64)
}

/// `(M+N)/(MN)`. Exceeds 1 when `N = 1` (or `M = 1`), where the Gaussian
/// approximation is meaningless.
pub fn pi_unbiased(dims: Bipartition) -> f64 {
    let (n, m) = nm(dims);
    (m + n) / (m * n)
}

/// `(M+N)/(MN+1)`: mean purity for sphere-uniform states.
pub fn pi_unbiased_exact(dims: Bipartition) -> f64 {
    let (n, m) = nm(dims);
    (m + n) / (m * n + 1.0)
}

/// Mean purity of an unbiased draw from `measure`.
pub fn pi_unbiased_for(dims: Bipartition, measure: MeasureKind) -> f64 {
    match measure {
        MeasureKind::Gaussian => pi_unbiased(dims),
        MeasureKind::Sphere => pi_unbiased_exact(dims),
    }
}

fn check_pi0(pi0: f64, dims: Bipartition) -> Result<()> {
    let lo = 1.0 / dims.n_a() as f64;
    if !(pi0 >= lo && pi0 <= 1.0) {
        return Err(Error::domain(format!(
            "reference purity {pi0} must lie in [1/N, 1] = [{lo}, 1]"
        )));
    }
    Ok(())
}

/// `ε⁴·π₀ + (1−ε⁴)·(M+N)/(MN)`.
pub fn mean_purity(epsilon: f64, pi0: f64, dims: Bipartition) -> Result<f64> {
    check_unit_interval("epsilon", epsilon)?;
    check_pi0(pi0, dims)?;
    let e4 = epsilon.powi(4);
    Ok(e4 * pi0 + (1.0 - e4) * pi_unbiased(dims))
}

/// Typical purity for a product reference state (`π₀ = 1`).
pub fn mean_purity_separable(epsilon: f64, dims: Bipartition) -> Result<f64> {
    mean_purity(epsilon, 1.0, dims)
}

/// Typical purity for a maximally entangled reference (`π₀ = 1/N`).
pub fn mean_purity_maxent(epsilon: f64, dims: Bipartition) -> Result<f64> {
    mean_purity(epsilon, 1.0 / dims.n_a() as f64, dims)
}

/// Exact mean purity of `ε|φ₀⟩ + √(1−ε²)|φ⟩` for a unit reference of purity
/// `π₀` (or, for an unbiased reference, the mean `E Tr σ₀²`) and `φ` drawn
/// from `measure`.
///
/// Assembled from the moments in [`expected_moments`]:
/// `ε⁴π₀ + (1−ε²)² E[Tr σ²] + ε²(1−ε²)(E Tr S² + 2 E Tr σ₀σ)`. For the
/// Gaussian measure this reduces to [`mean_purity`].
pub fn mean_purity_for_measure(
    epsilon: f64,
    pi0: f64,
    dims: Bipartition,
    measure: MeasureKind,
) -> Result<f64> {
    match measure {
        MeasureKind::Gaussian => mean_purity(epsilon, pi0, dims),
        MeasureKind::Sphere => {
            check_unit_interval("epsilon", epsilon)?;
            check_pi0(pi0, dims)?;
            Ok(assemble_moments(epsilon, pi0, &expected_moments(dims, measure)))
        }
    }
}

fn assemble_moments(epsilon: f64, pi0: f64, mom: &ExpectedMoments) -> f64 {
    let e2 = epsilon * epsilon;
    let c2 = 1.0 - e2;
    e2 * e2 * pi0 * mom.tr_sigma0_sq_coeff
        + c2 * c2 * mom.tr_sigma_sq
        + e2 * c2 * (mom.tr_s_sq + 2.0 * mom.tr_sigma0_sigma)
}

/// Typical purity of an ensemble as a record, for reporting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurityPrediction {
    pub mean_purity: f64,
    pub pi0: f64,
    pub epsilon: f64,
    pub dims: Bipartition,
    pub measure: MeasureKind,
}

/// Reference purity `π₀` implied by a polarization kind (the mean reference
/// purity for an unbiased reference). `FixedState` uses the purity of the
/// normalized payload.
pub fn reference_purity(kind: &PolarizationKind, dims: Bipartition, measure: MeasureKind) -> Result<f64> {
    kind.check_dims(dims)?;
    Ok(match kind {
        PolarizationKind::Unbiased => pi_unbiased_for(dims, measure),
        PolarizationKind::Separable => 1.0,
        PolarizationKind::MaxEntangled => 1.0 / dims.n_a() as f64,
        PolarizationKind::FixedState(state) => {
            let unit = state.normalized()?;
            crate::linalg::purity(&crate::linalg::partial_trace_b(&unit))
        }
    })
}

/// Prediction for a polarization kind at bias `ε`.
///
/// An unbiased reference drawn from the Gaussian measure makes the whole
/// superposition Gaussian, so the prediction is `π_unb` for every `ε`.
pub fn predict(
    kind: &PolarizationKind,
    epsilon: f64,
    dims: Bipartition,
    measure: MeasureKind,
) -> Result<PurityPrediction> {
    let pi0 = reference_purity(kind, dims, measure)?;
    let mean = match (kind, measure) {
        (PolarizationKind::Unbiased, MeasureKind::Gaussian) => {
            check_unit_interval("epsilon", epsilon)?;
            pi_unbiased(dims)
        }
        (PolarizationKind::Unbiased, MeasureKind::Sphere) => {
            check_unit_interval("epsilon", epsilon)?;
            assemble_moments(epsilon, pi0, &expected_moments(dims, measure))
        }
        _ => mean_purity_for_measure(epsilon, pi0, dims, measure)?,
    };
    Ok(PurityPrediction {
        mean_purity: mean,
        pi0,
        epsilon,
        dims,
        measure,
    })
}

/// Parameters chosen to hit a target purity.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationChoice {
    pub epsilon: f64,
    pub pi0: f64,
    pub kind: PolarizationKind,
}

/// Solve `target = ε⁴π₀ + (1−ε⁴)π_unb` for `ε`.
///
/// `π₀ = 1` (separable) above `π_unb`, `π₀ = 1/N` (maximally entangled) below
/// it; at `target = π_unb` the answer is `ε = 0` with an unbiased reference.
pub fn epsilon_for_purity(target: f64, dims: Bipartition) -> Result<PolarizationChoice> {
    let pi_unb = pi_unbiased(dims);
    if pi_unb >= 1.0 {
        return Err(Error::domain(format!(
            "dims ({}, {}) have unbiased purity {pi_unb} >= 1; every state has purity 1",
            dims.n_a(),
            dims.n_b()
        )));
    }
    let lo = 1.0 / dims.n_a() as f64;
    if !(target >= lo && target <= 1.0) {
        return Err(Error::domain(format!(
            "target purity {target} must lie in [1/N, 1] = [{lo}, 1]"
        )));
    }
    if target == pi_unb {
        return Ok(PolarizationChoice {
            epsilon: 0.0,
            pi0: pi_unb,
            kind: PolarizationKind::Unbiased,
        });
    }
    let (pi0, kind) = if target > pi_unb {
        (1.0, PolarizationKind::Separable)
    } else {
        (lo, PolarizationKind::MaxEntangled)
    };
    let e4 = ((target - pi_unb) / (pi0 - pi_unb)).clamp(0.0, 1.0);
    Ok(PolarizationChoice {
        epsilon: e4.sqrt().sqrt(),
        pi0,
        kind,
    })
}

/// Separability threshold on the noise strength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdResult {
    pub eta_star: f64,
    pub eta_star_squared: f64,
    pub pi_unb: f64,
    /// The ensemble-averaged effective dimension never reaches 2
    /// (`π_unb > 1/2`); `η⋆` is reported as 1.
    pub saturated: bool,
}

/// `η⋆² = 1 − √((1−2π_unb)/(2−2π_unb))`, the noise level at which the mean
/// purity of the noisy product state drops to 1/2.
pub fn eta_star(dims: Bipartition) -> ThresholdResult {
    let pi_unb = pi_unbiased(dims);
    if pi_unb > 0.5 {
        return ThresholdResult {
            eta_star: 1.0,
            eta_star_squared: 1.0,
            pi_unb,
            saturated: true,
        };
    }
    let radicand = (1.0 - 2.0 * pi_unb) / (2.0 - 2.0 * pi_unb);
    let sq = 1.0 - radicand.sqrt();
    ThresholdResult {
        eta_star: sq.sqrt(),
        eta_star_squared: sq,
        pi_unb,
        saturated: false,
    }
}

/// Large-system limit `√(1 − 1/√2)`.
pub fn eta_star_asymptotic() -> f64 {
    (1.0 - std::f64::consts::FRAC_1_SQRT_2).sqrt()
}

/// Which concentration inequality a [`TailBound`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailKind {
    Norm,
    Purity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailBound {
    pub kind: TailKind,
    pub alpha: f64,
    /// Not clamped; values above 1 are vacuous.
    pub bound: f64,
    pub dims: Bipartition,
    pub epsilon: f64,
}

fn tail_bound(kind: TailKind, alpha: f64, dims: Bipartition, epsilon: f64) -> Result<TailBound> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::domain(format!("alpha = {alpha} must be positive")));
    }
    check_unit_interval("epsilon", epsilon)?;
    let denom = match kind {
        TailKind::Norm => 2.0,
        TailKind::Purity => 32.0,
    };
    let spread = 1.0 - epsilon * epsilon;
    let bound = if spread == 0.0 {
        0.0
    } else {
        2.0 * (-(dims.total() as f64) * alpha * alpha / (denom * spread)).exp()
    };
    Ok(TailBound {
        kind,
        alpha,
        bound,
        dims,
        epsilon,
    })
}

/// `Pr{|‖ψ‖² − 1| > α} ≤ 2 exp(−NMα²/(2(1−ε²)))`; zero at `ε = 1`.
pub fn norm_tail_bound(alpha: f64, dims: Bipartition, epsilon: f64) -> Result<TailBound> {
    tail_bound(TailKind::Norm, alpha, dims, epsilon)
}

/// `Pr{|π − Eπ| > α} ≤ 2 exp(−NMα²/(32(1−ε²)))`; zero at `ε = 1`.
pub fn purity_tail_bound(alpha: f64, dims: Bipartition, epsilon: f64) -> Result<TailBound> {
    tail_bound(TailKind::Purity, alpha, dims, epsilon)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaNetQuery {
    pub delta: f64,
    pub schmidt_rank: usize,
    pub dims: Bipartition,
}

/// `ln` of the δ-net cardinality bound `(10/δ)^{2k(N+M)}` on a fixed Schmidt
/// rank `k` orbit.
pub fn delta_net_log_cardinality(q: &DeltaNetQuery) -> Result<f64> {
    if !(q.delta > 0.0 && q.delta <= 10.0) {
        return Err(Error::domain(format!("delta = {} must lie in (0, 10]", q.delta)));
    }
    if q.schmidt_rank == 0 {
        return Err(Error::domain("Schmidt rank must be at least 1"));
    }
    let (n, m) = nm(q.dims);
    Ok(2.0 * q.schmidt_rank as f64 * (n + m) * (10.0 / q.delta).ln())
}

/// Mean values of the trace terms for a unit reference state `φ₀` and an
/// unbiased `φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedMoments {
    /// `E[Tr σ₀²] = tr_sigma0_sq_coeff · π₀`.
    pub tr_sigma0_sq_coeff: f64,
    pub tr_sigma_sq: f64,
    pub tr_sigma0_sigma: f64,
    pub tr_s_sq: f64,
    /// `E[Tr σ₀S]` and `E[Tr σS]`, both zero.
    pub cross_terms: f64,
}

pub fn expected_moments(dims: Bipartition, measure: MeasureKind) -> ExpectedMoments {
    let (n, m) = nm(dims);
    ExpectedMoments {
        tr_sigma0_sq_coeff: 1.0,
        tr_sigma_sq: pi_unbiased_for(dims, measure),
        tr_sigma0_sigma: 1.0 / n,
        tr_s_sq: 2.0 / m,
        cross_terms: 0.0,
    }
}

/// Coefficient `c` in `E[X_{iμ}X*_{jμ}X_{jν}X*_{iν}] = c(δ_ij + δ_μν)`:
/// `1/(NM)²` for Gaussian amplitudes, `1/(NM(NM+1))` on the sphere.
pub fn fourth_moment_coefficient(dims: Bipartition, measure: MeasureKind) -> f64 {
    let d = dims.total() as f64;
    match measure {
        MeasureKind::Gaussian => 1.0 / (d * d),
        MeasureKind::Sphere => 1.0 / (d * (d + 1.0)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dims(n: usize, m: usize) -> Bipartition {
        Bipartition::new(n, m).unwrap()
    }

    #[test]
    fn unbiased_values() {
        assert_relative_eq!(pi_unbiased(dims(30, 30)), 60.0 / 900.0);
        assert_eq!(pi_unbiased(dims(2, 2)), 1.0);
        assert!(pi_unbiased(dims(1, 5)) > 1.0);
        assert_relative_eq!(pi_unbiased_exact(dims(2, 2)), 0.8);
        assert_relative_eq!(pi_unbiased_exact(dims(30, 30)), 0.066_592_674_805_771_36, max_relative = 1e-12);
        assert_eq!(pi_unbiased_exact(dims(1, 1)), 1.0);
    }

    #[test]
    fn gaussian_exceeds_sphere_by_closed_form_gap() {
        for (n, m) in [(2, 2), (3, 7), (30, 30), (8, 64)] {
            let d = dims(n, m);
            let (nf, mf) = (n as f64, m as f64);
            let gap = (mf + nf) / (mf * nf * (mf * nf + 1.0));
            assert!(pi_unbiased(d) > pi_unbiased_exact(d));
            assert_relative_eq!(pi_unbiased(d) - pi_unbiased_exact(d), gap, max_relative = 1e-10);
        }
    }

    #[test]
    fn mean_purity_examples() {
        let d = dims(8, 8);
        assert_eq!(mean_purity(0.0, 1.0, d).unwrap(), 0.25);
        assert_eq!(mean_purity(1.0, 0.4, d).unwrap(), 0.4);
        let eps = 0.5f64.powf(0.25);
        assert_relative_eq!(mean_purity(eps, 1.0, d).unwrap(), 0.625, epsilon = 1e-15);
        assert!(mean_purity(1.1, 1.0, d).is_err());
        assert!(mean_purity(0.5, 0.1, d).is_err());
        assert!(mean_purity(0.5, 1.01, d).is_err());
    }

    #[test]
    fn specializations() {
        let d30 = dims(30, 30);
        let eps = 0.5f64.powf(0.25);
        assert_eq!(mean_purity_separable(1.0, dims(5, 9)).unwrap(), 1.0);
        assert_relative_eq!(mean_purity_separable(eps, d30).unwrap(), 0.533_333_333_333_333_3, epsilon = 1e-12);
        assert_eq!(mean_purity_separable(0.0, d30).unwrap(), pi_unbiased(d30));
        assert_relative_eq!(mean_purity_maxent(1.0, dims(8, 8)).unwrap(), 0.125, epsilon = 1e-15);
        assert_eq!(mean_purity_maxent(0.0, d30).unwrap(), pi_unbiased(d30));
        assert_relative_eq!(mean_purity_maxent(eps, d30).unwrap(), 0.05, epsilon = 1e-12);
    }

    #[test]
    fn specializations_match_closed_forms() {
        for (n, m) in [(2, 3), (8, 8), (30, 30), (5, 40)] {
            let d = dims(n, m);
            let (nf, mf) = (n as f64, m as f64);
            for k in 0..=20 {
                let eps = k as f64 / 20.0;
                let e4 = eps.powi(4);
                let sep = (mf + nf) / (mf * nf) + e4 * (mf * nf - mf - nf) / (mf * nf);
                let ent = (mf + nf) / (mf * nf) - e4 / mf;
                assert_relative_eq!(mean_purity_separable(eps, d).unwrap(), sep, max_relative = 1e-14);
                assert_relative_eq!(mean_purity_maxent(eps, d).unwrap(), ent, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn sphere_prediction_at_zero_bias_is_lubkin() {
        let d = dims(2, 2);
        let p = predict(&PolarizationKind::Unbiased, 0.0, d, MeasureKind::Sphere).unwrap();
        assert_relative_eq!(p.mean_purity, 0.8, epsilon = 1e-15);
        let g = predict(&PolarizationKind::Unbiased, 0.7, dims(8, 8), MeasureKind::Gaussian).unwrap();
        assert_eq!(g.mean_purity, 0.25);
        // the Gaussian branch of the assembled moments is the closed form
        for eps in [0.0, 0.3, 0.8, 1.0] {
            let d = dims(6, 9);
            let assembled = assemble_moments(eps, 1.0, &expected_moments(d, MeasureKind::Gaussian));
            assert_relative_eq!(assembled, mean_purity_separable(eps, d).unwrap(), max_relative = 1e-14);
        }
    }

    #[test]
    fn epsilon_solver_examples() {
        let d = dims(8, 8);
        let tie = epsilon_for_purity(0.25, d).unwrap();
        assert_eq!((tie.epsilon, tie.kind), (0.0, PolarizationKind::Unbiased));
        let low = epsilon_for_purity(0.125, d).unwrap();
        assert_eq!((low.epsilon, low.pi0, low.kind), (1.0, 0.125, PolarizationKind::MaxEntangled));
        let mid = epsilon_for_purity(0.625, d).unwrap();
        assert_eq!(mid.kind, PolarizationKind::Separable);
        assert_eq!(mid.pi0, 1.0);
        assert_relative_eq!(mid.epsilon, 0.840_896_415_253_714_5, epsilon = 1e-12);
        assert!(epsilon_for_purity(2.0, d).is_err());
        assert!(epsilon_for_purity(0.1, d).is_err());
        assert!(matches!(epsilon_for_purity(1.0, dims(1, 4)), Err(Error::Domain(_))));
    }

    #[test]
    fn threshold_examples() {
        let t = eta_star(dims(10, 10));
        assert!(!t.saturated);
        assert_relative_eq!(t.eta_star_squared, 1.0 - (0.6f64 / 1.6).sqrt(), epsilon = 1e-15);
        assert_relative_eq!(t.eta_star_squared, 0.387_628, epsilon = 1e-6);
        assert_relative_eq!(t.eta_star, 0.622_598, epsilon = 1e-6);
        let edge = eta_star(dims(4, 4));
        assert!(!edge.saturated);
        assert_eq!(edge.eta_star_squared, 1.0);
        assert!(eta_star(dims(2, 2)).saturated);
        assert!(eta_star(dims(1, 3)).saturated);
    }

    #[test]
    fn asymptotic_threshold() {
        let a = eta_star_asymptotic();
        assert_relative_eq!(a * a, 1.0 - 1.0 / 2f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(a, 0.541_196, epsilon = 1e-6);
        assert!((eta_star(dims(1000, 1000)).eta_star - a).abs() < 1e-3);
        // at N = M = 30 the finite-size value is 0.564460, 0.0233 above the limit
        let t30 = eta_star(dims(30, 30)).eta_star;
        assert_relative_eq!(t30, 0.564_460, epsilon = 1e-6);
        assert!((t30 - a - 0.023_26).abs() < 1e-4);
    }

    #[test]
    fn threshold_consistency() {
        for n in [4, 5, 10, 30, 100, 1000] {
            for m in [n, n + 3, 4 * n] {
                let d = dims(n, m);
                let t = eta_star(d);
                let eps = (1.0 - t.eta_star_squared).sqrt();
                assert!((mean_purity_separable(eps, d).unwrap() - 0.5).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn tail_bound_examples() {
        let d = dims(30, 30);
        let b = norm_tail_bound(0.1, d, 0.0).unwrap();
        assert_relative_eq!(b.bound, 2.0 * (-4.5f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(b.bound, 0.0222, epsilon = 1e-4);
        assert_eq!(norm_tail_bound(0.1, d, 1.0).unwrap().bound, 0.0);
        let p = purity_tail_bound(0.5, d, 0.0).unwrap();
        assert_relative_eq!(p.bound, 2.0 * (-7.031_25f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(p.bound, 0.001_77, epsilon = 1e-5);
        assert!(norm_tail_bound(0.0, d, 0.0).is_err());
        assert!(purity_tail_bound(-1.0, d, 0.0).is_err());
        // vacuous bounds are returned as-is
        assert!(purity_tail_bound(0.01, dims(2, 2), 0.0).unwrap().bound > 1.0);
    }

    #[test]
    fn tail_bounds_scale_with_bias() {
        // bias ε is equivalent to rescaling NM by 1/(1−ε²): NM = 36 at ε = 0.8 ↔ NM = 100
        let at_bias = purity_tail_bound(0.3, dims(6, 6), 0.8).unwrap().bound;
        let scaled = purity_tail_bound(0.3, dims(10, 10), 0.0).unwrap().bound;
        assert_relative_eq!(at_bias, scaled, max_relative = 1e-12);
        // log-linear in NM
        let l1 = (norm_tail_bound(0.2, dims(4, 4), 0.0).unwrap().bound / 2.0).ln();
        let l2 = (norm_tail_bound(0.2, dims(4, 8), 0.0).unwrap().bound / 2.0).ln();
        assert_relative_eq!(l2, 2.0 * l1, max_relative = 1e-12);
    }

    #[test]
    fn delta_net_examples() {
        let q = |delta, k| DeltaNetQuery { delta, schmidt_rank: k, dims: dims(2, 2) };
        assert_eq!(delta_net_log_cardinality(&q(10.0, 3)).unwrap(), 0.0);
        assert_relative_eq!(delta_net_log_cardinality(&q(1.0, 1)).unwrap(), 8.0 * 10f64.ln());
        assert_relative_eq!(delta_net_log_cardinality(&q(1.0, 1)).unwrap(), 18.42, epsilon = 1e-2);
        assert_relative_eq!(
            delta_net_log_cardinality(&q(0.3, 4)).unwrap(),
            2.0 * delta_net_log_cardinality(&q(0.3, 2)).unwrap()
        );
        assert!(delta_net_log_cardinality(&q(0.0, 1)).is_err());
        assert!(delta_net_log_cardinality(&q(11.0, 1)).is_err());
        assert!(delta_net_log_cardinality(&q(1.0, 0)).is_err());
    }

    #[test]
    fn moment_values() {
        assert_eq!(expected_moments(dims(4, 3), MeasureKind::Gaussian).tr_sigma0_sigma, 0.25);
        assert_eq!(expected_moments(dims(2, 8), MeasureKind::Gaussian).tr_s_sq, 0.25);
        assert_relative_eq!(expected_moments(dims(2, 2), MeasureKind::Sphere).tr_sigma_sq, 0.8);
        assert_eq!(fourth_moment_coefficient(dims(2, 2), MeasureKind::Gaussian), 1.0 / 16.0);
        assert_eq!(fourth_moment_coefficient(dims(2, 2), MeasureKind::Sphere), 1.0 / 20.0);
    }
}
