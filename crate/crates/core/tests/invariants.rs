use approx::assert_relative_eq;
use nalgebra::DMatrix;
use proptest::prelude::*;

use polarized::analytics::{
    epsilon_for_purity, eta_star, mean_purity, mean_purity_maxent, mean_purity_separable,
    pi_unbiased, pi_unbiased_exact,
};
use polarized::linalg::{
    cross_operator, effective_dimension, partial_trace_b, purity, purity_decomposition,
    Bipartition, PureState, C64,
};
use polarized::montecarlo::{
    run_purity_experiment, uniform_grid, with_workers, ExperimentConfig, SpecTemplate,
};
use polarized::sampling::{
    gaussian_state, haar_unitary, max_entangled_state, polarized_sample, separable_state,
    sphere_state, superpose, MeasureKind, PolarizationKind, PolarizationSpec, RngStream,
};

fn dims(n: usize, m: usize) -> Bipartition {
    Bipartition::new(n, m).unwrap()
}

fn arb_state() -> impl Strategy<Value = PureState> {
    (1usize..6, 1usize..6).prop_flat_map(|(n, m)| {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * m).prop_map(move |v| {
            let amps = v.into_iter().map(|(re, im)| C64::new(re, im)).collect();
            PureState::new(dims(n, m), amps).unwrap()
        })
    })
}

fn min_eigenvalue(entries: &[C64], dim: usize) -> f64 {
    DMatrix::from_row_slice(dim, dim, entries).symmetric_eigenvalues().min()
}

proptest! {
    #[test]
    fn reduced_state_trace_equals_norm(psi in arb_state()) {
        let rho = partial_trace_b(&psi);
        prop_assert!((rho.trace() - psi.norm_sqr()).abs() <= 1e-12 * psi.norm_sqr().max(1.0));
    }

    #[test]
    fn reduced_state_is_hermitian_psd(psi in arb_state()) {
        let rho = partial_trace_b(&psi);
        prop_assert_eq!(rho.hermiticity_residue(), 0.0);
        let scale = rho.trace().max(1e-300);
        prop_assert!(min_eigenvalue(rho.entries(), rho.dim()) >= -1e-12 * scale);
    }

    #[test]
    fn purity_is_bounded_for_unit_states(psi in arb_state()) {
        prop_assume!(psi.norm_sqr() > 1e-6);
        let psi = psi.normalized().unwrap();
        let n = psi.dims().n_a().min(psi.dims().n_b()) as f64;
        let p = purity(&partial_trace_b(&psi));
        prop_assert!(p <= 1.0 + 1e-12);
        prop_assert!(p >= 1.0 / n - 1e-12);
        let d = effective_dimension(&partial_trace_b(&psi)).unwrap();
        prop_assert!((d * p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decomposition_matches_direct_purity(seed in any::<u64>(), eps in 0.0f64..=1.0, n in 1usize..6, m in 1usize..6) {
        let d = dims(n, m);
        let mut rng = RngStream::new(seed, 0).generator();
        let phi0 = separable_state(d, &mut rng).unwrap();
        let phi = gaussian_state(d, &mut rng);
        let direct = purity(&partial_trace_b(&superpose(eps, &phi0, &phi).unwrap()));
        let split = purity_decomposition(&phi0, &phi, eps).unwrap();
        prop_assert!((split - direct).abs() <= 1e-10 * direct.abs().max(1e-300));
    }

    #[test]
    fn cross_operator_is_hermitian(seed in any::<u64>(), n in 1usize..5, m in 1usize..5) {
        let d = dims(n, m);
        let mut rng = RngStream::new(seed, 1).generator();
        let s = cross_operator(&gaussian_state(d, &mut rng), &gaussian_state(d, &mut rng)).unwrap();
        prop_assert!(s.hermiticity_residue() <= 1e-15);
    }

    #[test]
    fn haar_draws_are_unitary(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = RngStream::new(seed, 2).generator();
        prop_assert!(haar_unitary(n, &mut rng).unitarity_defect() <= 1e-12);
    }

    #[test]
    fn sphere_draws_have_unit_norm(seed in any::<u64>(), n in 1usize..6, m in 1usize..6) {
        let mut rng = RngStream::new(seed, 3).generator();
        prop_assert!((sphere_state(dims(n, m), &mut rng).unwrap().norm_sqr() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn randomized_max_entangled_stays_maximally_mixed(seed in any::<u64>(), n in 1usize..5, extra in 0usize..3) {
        let d = dims(n, n + extra);
        let mut rng = RngStream::new(seed, 4).generator();
        let psi = max_entangled_state(d, &mut rng, true).unwrap();
        prop_assert!((purity(&partial_trace_b(&psi)) - 1.0 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn mean_purity_monotone_in_eps4(pi0 in (1.0f64 / 6.0)..=1.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let d = dims(6, 7);
        prop_assume!((pi0 - pi_unbiased(d)).abs() > 1e-9 && (a - b).abs() > 1e-6);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let f = |e4: f64| mean_purity(e4.powf(0.25), pi0, d).unwrap();
        if pi0 > pi_unbiased(d) {
            prop_assert!(f(hi) > f(lo));
        } else {
            prop_assert!(f(hi) < f(lo));
        }
    }

    #[test]
    fn specialized_means_agree(eps in 0.0f64..=1.0, n in 1usize..40, m in 1usize..40) {
        let d = dims(n, m);
        prop_assert!((mean_purity_separable(eps, d).unwrap() - mean_purity(eps, 1.0, d).unwrap()).abs() <= 1e-15);
        prop_assert!((mean_purity_maxent(eps, d).unwrap() - mean_purity(eps, 1.0 / n as f64, d).unwrap()).abs() <= 1e-15);
    }

    #[test]
    fn gaussian_value_exceeds_lubkin(n in 1usize..200, m in 1usize..200) {
        let d = dims(n, m);
        let (nf, mf) = (n as f64, m as f64);
        let gap = pi_unbiased(d) - pi_unbiased_exact(d);
        prop_assert!(gap > 0.0);
        assert_relative_eq!(gap, (mf + nf) / (mf * nf * (mf * nf + 1.0)), max_relative = 1e-10);
    }
}

#[test]
fn epsilon_solver_round_trip() {
    for n in [2usize, 3, 8, 30] {
        let d = dims(n, n + 1);
        let lo = 1.0 / n as f64;
        for k in 0..1000 {
            let target = lo + (1.0 - lo) * k as f64 / 999.0;
            let c = epsilon_for_purity(target, d).unwrap();
            let back = mean_purity(c.epsilon, c.pi0, d).unwrap();
            assert!((back - target).abs() <= 1e-12, "n={n} target={target} back={back}");
        }
    }
}

#[test]
fn threshold_consistency() {
    for (n, m) in [(4, 6), (5, 5), (8, 8), (30, 30), (1000, 1000)] {
        let t = eta_star(dims(n, m));
        assert!(!t.saturated);
        let e = (1.0 - t.eta_star_squared).sqrt();
        assert!((mean_purity_separable(e, dims(n, m)).unwrap() - 0.5).abs() <= 1e-12);
    }
}

#[test]
fn samples_replay_from_their_stream() {
    let spec = PolarizationSpec::new(PolarizationKind::MaxEntangled, 0.7, true).unwrap();
    let s = RngStream::new(99, 5);
    let a = polarized_sample(&spec, dims(3, 4), MeasureKind::Sphere, &s).unwrap();
    let b = polarized_sample(&spec, dims(3, 4), MeasureKind::Sphere, &s).unwrap();
    assert_eq!(a, b);
    let c = polarized_sample(&spec, dims(3, 4), MeasureKind::Sphere, &RngStream::new(99, 6)).unwrap();
    assert_ne!(a, c);
}

fn small_config(normalize: bool, measure: MeasureKind) -> ExperimentConfig {
    ExperimentConfig {
        dims: dims(5, 6),
        spec: SpecTemplate {
            kind: PolarizationKind::Separable,
            randomize_local: true,
        },
        eps4_grid: uniform_grid(4),
        trials: 300,
        master_seed: 3,
        measure,
        normalize,
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let c = small_config(false, MeasureKind::Gaussian);
    let runs: Vec<_> = [1, 2, 3, 4]
        .into_iter()
        .map(|w| with_workers(w, || run_purity_experiment(&c)).unwrap().unwrap().rows)
        .collect();
    for r in &runs[1..] {
        for (x, y) in r.iter().zip(&runs[0]) {
            assert_eq!(x.sample_mean.to_bits(), y.sample_mean.to_bits());
            assert_eq!(x.sample_std.to_bits(), y.sample_std.to_bits());
            assert_eq!(x.z_score.to_bits(), y.z_score.to_bits());
        }
    }
}

#[test]
fn normalization_is_inert_for_sphere_draws_at_zero_bias() {
    let mut a = small_config(false, MeasureKind::Sphere);
    a.eps4_grid = vec![0.0];
    let mut b = a.clone();
    b.normalize = true;
    let (ra, rb) = (run_purity_experiment(&a).unwrap(), run_purity_experiment(&b).unwrap());
    assert_relative_eq!(ra.rows[0].sample_mean, rb.rows[0].sample_mean, max_relative = 1e-14);
    assert_relative_eq!(ra.rows[0].sample_std, rb.rows[0].sample_std, max_relative = 1e-10);
}
