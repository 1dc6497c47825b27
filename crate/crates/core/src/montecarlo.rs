//! Monte Carlo engine.
//!
//! Trial `t` of grid point `g` always draws from the stream
//! `(master_seed, g·2³² + t)`, and per-trial results are collected in trial
//! order before any reduction. Results are therefore bit-identical for any
//! number of rayon workers.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{
    self, expected_moments, fourth_moment_coefficient, mean_purity_separable, norm_tail_bound,
    predict, purity_tail_bound, ThresholdResult,
};
use crate::error::{Error, Result};
use crate::linalg::{partial_trace_b, purity, Bipartition, PureState, PurityTerms};
use crate::sampling::{
    noisy_separable_sample, polarized_sample, unbiased_state, MeasureKind, PolarizationKind,
    PolarizationSpec, RngStream,
};

/// Default number of realizations per grid point.
pub const DEFAULT_TRIALS: u64 = 10_000;

const TRIAL_BITS: u32 = 32;

/// Stream for trial `trial` of grid point `block`.
pub fn trial_stream(master_seed: u64, block: u64, trial: u64) -> RngStream {
    RngStream::new(master_seed, (block << TRIAL_BITS) | trial)
}

fn check_trial_count(trials: u64, min: u64) -> Result<()> {
    if trials < min {
        return Err(Error::Config(format!("trials = {trials} must be at least {min}")));
    }
    if trials >= 1 << TRIAL_BITS {
        return Err(Error::Config(format!("trials = {trials} exceeds 2^{TRIAL_BITS} - 1")));
    }
    Ok(())
}

/// Evaluate `f` on every trial index, in parallel, returning results in index
/// order.
fn collect_trials<T, F>(trials: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..trials).into_par_iter().map(f).collect()
}

/// Run `f` on a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::ThreadPool(e.to_string()))?;
    Ok(pool.install(f))
}

/// Mean, sample standard deviation (`n − 1`) and standard error of the mean,
/// accumulated sequentially in slice order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleStats {
    pub mean: f64,
    pub std: f64,
    pub stderr: f64,
    pub n: u64,
}

impl SampleStats {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return SampleStats { mean: f64::NAN, std: f64::NAN, stderr: f64::NAN, n: 0 };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        SampleStats {
            mean,
            std,
            stderr: std / (n as f64).sqrt(),
            n: n as u64,
        }
    }

    /// `(mean − expected)/stderr`; zero when both numerator and stderr vanish.
    pub fn z_score(&self, expected: f64) -> f64 {
        z_score(self.mean, expected, self.stderr)
    }
}

fn z_score(mean: f64, expected: f64, stderr: f64) -> f64 {
    let diff = mean - expected;
    if stderr > 0.0 {
        diff / stderr
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

/// Polarization kind and local-orbit flag shared by every grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecTemplate {
    pub kind: PolarizationKind,
    #[serde(default = "default_true")]
    pub randomize_local: bool,
}

fn default_true() -> bool {
    true
}

fn default_trials() -> u64 {
    DEFAULT_TRIALS
}

/// A purity-versus-ε⁴ experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dims: Bipartition,
    pub spec: SpecTemplate,
    /// Abscissa in `ε⁴`, ascending, within `[0, 1]`.
    pub eps4_grid: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub measure: MeasureKind,
    /// Renormalize every draw before computing its purity.
    #[serde(default)]
    pub normalize: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eps4_grid.is_empty() {
            return Err(Error::Config("eps4_grid: must not be empty".into()));
        }
        for (k, &v) in self.eps4_grid.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("eps4_grid[{k}] = {v} is outside [0, 1]")));
            }
        }
        if self.eps4_grid.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config("eps4_grid: values must be sorted ascending".into()));
        }
        check_trial_count(self.trials, 2).map_err(|e| Error::Config(format!("trials: {e}")))?;
        self.spec
            .kind
            .check_dims(self.dims)
            .map_err(|e| Error::Config(format!("spec.kind: {e}")))?;
        Ok(())
    }

    /// Parse and validate a JSON config. Unknown fields are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
            Error::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        config.validate()?;
        Ok(config)
    }

    fn spec_at(&self, eps4: f64) -> Result<PolarizationSpec> {
        PolarizationSpec::new(self.spec.kind.clone(), eps4.powf(0.25), self.spec.randomize_local)
    }
}

/// Uniform grid `0, 1/(points−1), ..., 1`.
pub fn uniform_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points).map(|k| k as f64 / (points - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridRow {
    pub eps4: f64,
    pub epsilon: f64,
    pub sample_mean: f64,
    pub sample_std: f64,
    pub stderr: f64,
    pub analytic_mean: f64,
    pub z_score: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: ExperimentConfig,
    pub rows: Vec<GridRow>,
    pub wall_time: Duration,
}

/// Draws for one grid point: `(‖ψ‖², purity)` per trial.
fn draw_grid_point(config: &ExperimentConfig, block: u64, eps4: f64) -> Result<Vec<(f64, f64)>> {
    let spec = config.spec_at(eps4)?;
    collect_trials(config.trials, |t| {
        let stream = trial_stream(config.master_seed, block, t);
        let psi = polarized_sample(&spec, config.dims, config.measure, &stream)?;
        let norm_sqr = psi.norm_sqr();
        let psi = if config.normalize { psi.normalized()? } else { psi };
        let p = purity(&partial_trace_b(&psi));
        if !p.is_finite() || !norm_sqr.is_finite() {
            return Err(Error::NonFinite {
                trial: t,
                stream: stream.stream_id(),
            });
        }
        Ok((norm_sqr, p))
    })
}

/// Sample mean and spread of the purity at every `ε⁴` grid point, paired with
/// the analytic prediction for the configured kind and measure.
pub fn run_purity_experiment(config: &ExperimentConfig) -> Result<RunResult> {
    config.validate()?;
    let start = Instant::now();
    let mut rows = Vec::with_capacity(config.eps4_grid.len());
    for (g, &eps4) in config.eps4_grid.iter().enumerate() {
        let draws = draw_grid_point(config, g as u64, eps4)?;
        let purities: Vec<f64> = draws.iter().map(|&(_, p)| p).collect();
        let stats = SampleStats::from_values(&purities);
        let epsilon = eps4.powf(0.25);
        let analytic = predict(&config.spec.kind, epsilon, config.dims, config.measure)?.mean_purity;
        rows.push(GridRow {
            eps4,
            epsilon,
            sample_mean: stats.mean,
            sample_std: stats.std,
            stderr: stats.stderr,
            analytic_mean: analytic,
            z_score: stats.z_score(analytic),
        });
    }
    Ok(RunResult {
        config: config.clone(),
        rows,
        wall_time: start.elapsed(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MomentName {
    TrSigmaSq,
    TrSigma0Sigma,
    TrSSq,
    TrSigma0S,
    TrSigmaS,
}

impl MomentName {
    pub const ALL: [MomentName; 5] = [
        MomentName::TrSigmaSq,
        MomentName::TrSigma0Sigma,
        MomentName::TrSSq,
        MomentName::TrSigma0S,
        MomentName::TrSigmaS,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MomentName::TrSigmaSq => "TrSigmaSq",
            MomentName::TrSigma0Sigma => "TrSigma0Sigma",
            MomentName::TrSSq => "TrSSq",
            MomentName::TrSigma0S => "TrSigma0S",
            MomentName::TrSigmaS => "TrSigmaS",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub name: MomentName,
    pub value: f64,
    pub stderr: f64,
    pub n: u64,
    pub analytic: f64,
}

impl MomentEstimate {
    pub fn z_score(&self) -> f64 {
        z_score(self.value, self.analytic, self.stderr)
    }
}

/// Estimates of the five trace terms for the reference `|0⟩⊗|0⟩` and `φ`
/// drawn from `measure`.
pub fn estimate_moments(
    dims: Bipartition,
    trials: u64,
    master_seed: u64,
    measure: MeasureKind,
) -> Result<Vec<MomentEstimate>> {
    check_trial_count(trials, 100)?;
    let phi0 = PureState::basis(dims, 0, 0)?;
    let terms = collect_trials(trials, |t| {
        let mut rng = trial_stream(master_seed, 0, t).generator();
        let phi = unbiased_state(dims, measure, &mut rng)?;
        PurityTerms::compute(&phi0, &phi)
    })?;
    let expected = expected_moments(dims, measure);
    Ok(MomentName::ALL
        .iter()
        .map(|&name| {
            let (pick, analytic): (fn(&PurityTerms) -> f64, f64) = match name {
                MomentName::TrSigmaSq => (|x| x.tr_sigma_sq, expected.tr_sigma_sq),
                MomentName::TrSigma0Sigma => (|x| x.tr_sigma0_sigma, expected.tr_sigma0_sigma),
                MomentName::TrSSq => (|x| x.tr_s_sq, expected.tr_s_sq),
                MomentName::TrSigma0S => (|x| x.tr_sigma0_s, expected.cross_terms),
                MomentName::TrSigmaS => (|x| x.tr_sigma_s, expected.cross_terms),
            };
            let values: Vec<f64> = terms.iter().map(pick).collect();
            let stats = SampleStats::from_values(&values);
            MomentEstimate {
                name,
                value: stats.mean,
                stderr: stats.stderr,
                n: stats.n,
                analytic,
            }
        })
        .collect())
}

/// Estimated coefficients of `δ_ij` and `δ_μν` in the four-point function
/// `E[X_{iμ}X*_{jμ}X_{jν}X*_{iν}]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FourthMoments {
    /// From index pairs with `i = j`, `μ ≠ ν`.
    pub delta_ij_coeff: SampleStats,
    /// From index pairs with `i ≠ j`, `μ = ν`.
    pub delta_munu_coeff: SampleStats,
    /// `E|X_{iμ}|⁴`, where both deltas fire.
    pub diagonal: SampleStats,
    /// Predicted coefficient for the measure.
    pub expected_coeff: f64,
}

/// Monte Carlo estimate of the four-point coefficients.
///
/// Each trial contributes the class averages of `|X_{iμ}|²|X_{iν}|²`
/// (`μ ≠ ν`), `|X_{iμ}|²|X_{jμ}|²` (`i ≠ j`) and `|X_{iμ}|⁴`. A class with no
/// members (`M = 1` or `N = 1`) falls back to half the diagonal moment.
pub fn fourth_moment_oracle(
    dims: Bipartition,
    trials: u64,
    master_seed: u64,
    measure: MeasureKind,
) -> Result<FourthMoments> {
    check_trial_count(trials, 2)?;
    let (n, m) = (dims.n_a(), dims.n_b());
    let per_trial = collect_trials(trials, |t| {
        let mut rng = trial_stream(master_seed, 0, t).generator();
        let phi = unbiased_state(dims, measure, &mut rng)?;
        let p: Vec<f64> = phi.amplitudes().iter().map(|z| z.norm_sqr()).collect();
        let diag_sum: f64 = p.iter().map(|x| x * x).sum();
        let diag = diag_sum / (n * m) as f64;
        let same_row = if m > 1 {
            let s: f64 = (0..n)
                .map(|i| {
                    let row = &p[i * m..(i + 1) * m];
                    let tot: f64 = row.iter().sum();
                    tot * tot - row.iter().map(|x| x * x).sum::<f64>()
                })
                .sum();
            s / (n * m * (m - 1)) as f64
        } else {
            diag / 2.0
        };
        let same_col = if n > 1 {
            let s: f64 = (0..m)
                .map(|mu| {
                    let tot: f64 = (0..n).map(|i| p[i * m + mu]).sum();
                    tot * tot - (0..n).map(|i| p[i * m + mu].powi(2)).sum::<f64>()
                })
                .sum();
            s / (m * n * (n - 1)) as f64
        } else {
            diag / 2.0
        };
        Ok([same_row, same_col, diag])
    })?;
    let column = |k: usize| -> SampleStats {
        let v: Vec<f64> = per_trial.iter().map(|x| x[k]).collect();
        SampleStats::from_values(&v)
    };
    Ok(FourthMoments {
        delta_ij_coeff: column(0),
        delta_munu_coeff: column(1),
        diagonal: column(2),
        expected_coeff: fourth_moment_coefficient(dims, measure),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailRow {
    pub eps4: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub empirical_norm_tail: f64,
    pub norm_bound: f64,
    pub norm_binomial_stderr: f64,
    pub empirical_purity_tail: f64,
    pub purity_bound: f64,
    pub purity_binomial_stderr: f64,
    pub n: u64,
}

/// `sqrt(p(1−p)/n)` with `p` the bound clamped to `[0, 1]`.
fn binomial_stderr(bound: f64, n: u64) -> f64 {
    let p = bound.clamp(0.0, 1.0);
    (p * (1.0 - p) / n as f64).sqrt()
}

impl TailRow {
    /// Empirical norm and purity tails both at most `bound + k·stderr`.
    pub fn within_bounds(&self, k: f64) -> bool {
        self.empirical_norm_tail <= self.norm_bound + k * self.norm_binomial_stderr
            && self.empirical_purity_tail <= self.purity_bound + k * self.purity_binomial_stderr
    }
}

/// Fractions of trials with `|‖ψ‖² − 1| > α` and `|π − π̄| > α` (`π̄` the
/// sample mean), paired with the concentration bounds, for every `ε⁴` in the
/// config grid and every `α`.
pub fn tail_frequency(config: &ExperimentConfig, alpha_grid: &[f64]) -> Result<Vec<TailRow>> {
    config.validate()?;
    for &a in alpha_grid {
        if !(a > 0.0) {
            return Err(Error::domain(format!("alpha = {a} must be positive")));
        }
    }
    let mut rows = Vec::new();
    for (g, &eps4) in config.eps4_grid.iter().enumerate() {
        let epsilon = eps4.powf(0.25);
        let draws = draw_grid_point(config, g as u64, eps4)?;
        let purities: Vec<f64> = draws.iter().map(|&(_, p)| p).collect();
        let mean = SampleStats::from_values(&purities).mean;
        let n = draws.len() as u64;
        for &alpha in alpha_grid {
            let norm_hits = draws.iter().filter(|&&(ns, _)| (ns - 1.0).abs() > alpha).count();
            let purity_hits = purities.iter().filter(|&&p| (p - mean).abs() > alpha).count();
            let norm_bound = norm_tail_bound(alpha, config.dims, epsilon)?.bound;
            let purity_bound = purity_tail_bound(alpha, config.dims, epsilon)?.bound;
            rows.push(TailRow {
                eps4,
                epsilon,
                alpha,
                empirical_norm_tail: norm_hits as f64 / n as f64,
                norm_bound,
                norm_binomial_stderr: binomial_stderr(norm_bound, n),
                empirical_purity_tail: purity_hits as f64 / n as f64,
                purity_bound,
                purity_binomial_stderr: binomial_stderr(purity_bound, n),
                n,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub eta: f64,
    pub mean_purity: f64,
    pub stderr: f64,
    /// `1/π̄`, the effective dimension of the noise-averaged reduced state.
    pub inv_mean_purity: f64,
    pub analytic_d_eff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdScan {
    pub rows: Vec<ThresholdRow>,
    /// First `η` at which `1/π̄` reaches 2, linearly interpolated between grid
    /// points; `None` when the scan never gets there.
    pub crossing: Option<f64>,
    pub analytic: ThresholdResult,
}

/// Noise scan of `√(1−η²)|0⟩⊗|0⟩ + η|φ⟩` with Gaussian `φ`.
pub fn threshold_scan(
    dims: Bipartition,
    eta_grid: &[f64],
    trials: u64,
    master_seed: u64,
) -> Result<ThresholdScan> {
    check_trial_count(trials, 2)?;
    if eta_grid.is_empty() {
        return Err(Error::Config("eta grid must not be empty".into()));
    }
    if eta_grid.iter().any(|e| !(0.0..=1.0).contains(e)) {
        return Err(Error::domain("eta grid values must lie in [0, 1]"));
    }
    let product = PureState::basis(dims, 0, 0)?;
    let mut rows = Vec::with_capacity(eta_grid.len());
    for (g, &eta) in eta_grid.iter().enumerate() {
        let purities = collect_trials(trials, |t| {
            let stream = trial_stream(master_seed, g as u64, t);
            let psi = noisy_separable_sample(eta, dims, &stream, Some(&product))?;
            let p = purity(&partial_trace_b(&psi));
            if !p.is_finite() {
                return Err(Error::NonFinite {
                    trial: t,
                    stream: stream.stream_id(),
                });
            }
            Ok(p)
        })?;
        let stats = SampleStats::from_values(&purities);
        let epsilon = (1.0 - eta * eta).sqrt();
        rows.push(ThresholdRow {
            eta,
            mean_purity: stats.mean,
            stderr: stats.stderr,
            inv_mean_purity: 1.0 / stats.mean,
            analytic_d_eff: 1.0 / mean_purity_separable(epsilon, dims)?,
        });
    }
    let crossing = locate_crossing(&rows, 2.0);
    Ok(ThresholdScan {
        rows,
        crossing,
        analytic: analytics::eta_star(dims),
    })
}

fn locate_crossing(rows: &[ThresholdRow], level: f64) -> Option<f64> {
    let first = rows.iter().position(|r| r.inv_mean_purity >= level)?;
    if first == 0 {
        return Some(rows[0].eta);
    }
    let (a, b) = (&rows[first - 1], &rows[first]);
    let t = (level - a.inv_mean_purity) / (b.inv_mean_purity - a.inv_mean_purity);
    Some(a.eta + t * (b.eta - a.eta))
}
