//! Command-line front end. Each subcommand resolves its flags, runs, and
//! returns a [`Table`] whose metadata echoes the resolved configuration.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::analytics::{
    eta_star, eta_star_asymptotic, mean_purity_for_measure, pi_unbiased, pi_unbiased_exact,
    predict,
};
use crate::error::{Error, Result};
use crate::linalg::{effective_dimension, partial_trace_b, purity, Bipartition, PureState};
use crate::montecarlo::{
    estimate_moments, fourth_moment_oracle, run_purity_experiment, tail_frequency,
    threshold_scan, ExperimentConfig, SpecTemplate, DEFAULT_TRIALS,
};
use crate::report::{OutputFormat, Table};
use crate::sampling::{
    fixed_purity_sample, polarized_sample, MeasureKind, PolarizationKind, PolarizationSpec,
    RngStream,
};

#[derive(Debug, Parser)]
#[command(name = "polarized", version, about = "Polarized ensembles of bipartite random pure states")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct Dims {
    /// Dimension N of subsystem A.
    #[arg(long = "dim-a")]
    pub dim_a: usize,
    /// Dimension M of subsystem B.
    #[arg(long = "dim-b")]
    pub dim_b: usize,
}

impl Dims {
    fn resolve(&self) -> Result<Bipartition> {
        Bipartition::new(self.dim_a, self.dim_b)
    }
}

#[derive(Debug, Clone, Copy, Args)]
#[group(required = true, multiple = false)]
pub struct Bias {
    /// Bias ε in [0, 1].
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Bias given as ε⁴ in [0, 1].
    #[arg(long)]
    pub eps4: Option<f64>,
}

#[derive(Debug, Clone, Copy, Args)]
#[group(required = false, multiple = false)]
pub struct OptionalBias {
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub eps4: Option<f64>,
}

fn resolve_epsilon(epsilon: Option<f64>, eps4: Option<f64>) -> Result<f64> {
    let eps = match (epsilon, eps4) {
        (Some(e), None) => e,
        (None, Some(e4)) => {
            if !(0.0..=1.0).contains(&e4) {
                return Err(Error::domain(format!("eps4 = {e4} must lie in [0, 1]")));
            }
            e4.powf(0.25)
        }
        (None, None) => 0.0,
        (Some(_), Some(_)) => return Err(Error::Config("give only one of --epsilon, --eps4".into())),
    };
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::domain(format!("epsilon = {eps} must lie in [0, 1]")));
    }
    Ok(eps)
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form typical purities.
    Predict {
        #[command(flatten)]
        dims: Dims,
        #[command(flatten)]
        bias: Bias,
        /// unbiased | separable | maxent | pi0=<value> | fixed:<path>
        #[arg(long, default_value = "unbiased")]
        polarization: String,
        #[arg(long, value_enum, default_value_t = MeasureKind::Gaussian)]
        measure: MeasureKind,
        /// Also report the separability threshold.
        #[arg(long = "eta-star")]
        eta_star: bool,
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        output: OutputFormat,
    },
    /// Draw one state of a polarized ensemble.
    Sample {
        #[command(flatten)]
        dims: Dims,
        #[command(flatten)]
        bias: Bias,
        #[arg(long, default_value = "separable")]
        polarization: String,
        #[arg(long, value_enum, default_value_t = MeasureKind::Gaussian)]
        measure: MeasureKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        stream: u64,
        /// Keep the reference state fixed instead of drawing it from its local orbit.
        #[arg(long = "no-local-randomization")]
        no_local_randomization: bool,
        #[arg(long)]
        normalize: bool,
        #[arg(long = "emit-state")]
        emit_state: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        output: OutputFormat,
    },
    /// Mean purity versus ε⁴ against the analytic curve.
    Experiment(ExperimentArgs),
    /// Monte Carlo estimates of the trace moments and four-point coefficients.
    Moments {
        #[command(flatten)]
        dims: Dims,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = MeasureKind::Gaussian)]
        measure: MeasureKind,
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        output: OutputFormat,
    },
    /// Noise scan of a product state and its separability threshold.
    Threshold {
        #[command(flatten)]
        dims: Dims,
        /// a:b:step or a comma-separated list.
        #[arg(long = "eta-grid", default_value = "0:1:0.02")]
        eta_grid: String,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        output: OutputFormat,
    },
    /// Empirical tail frequencies against the concentration bounds.
    Concentration {
        #[command(flatten)]
        dims: Dims,
        /// One or more deviation thresholds, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        alpha: Vec<f64>,
        #[command(flatten)]
        bias: OptionalBias,
        #[arg(long, default_value = "separable")]
        polarization: String,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = MeasureKind::Gaussian)]
        measure: MeasureKind,
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        output: OutputFormat,
    },
    /// Draw a state from an ensemble with prescribed typical purity.
    FixedPurity {
        #[command(flatten)]
        dims: Dims,
        #[arg(long = "target-purity")]
        target_purity: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        stream: u64,
        #[arg(long, value_enum, default_value_t = MeasureKind::Gaussian)]
        measure: MeasureKind,
        #[arg(long = "emit-state")]
        emit_state: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        output: OutputFormat,
    },
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// JSON file with the full experiment configuration.
    #[arg(long, conflicts_with_all = ["dim_a", "dim_b", "eps4_grid", "polarization", "trials", "seed", "measure", "normalize", "no_local_randomization"])]
    pub config: Option<PathBuf>,
    #[arg(long = "dim-a", required_unless_present = "config")]
    pub dim_a: Option<usize>,
    #[arg(long = "dim-b", required_unless_present = "config")]
    pub dim_b: Option<usize>,
    /// a:b:step or a comma-separated list of ε⁴ values.
    #[arg(long = "eps4-grid")]
    pub eps4_grid: Option<String>,
    #[arg(long)]
    pub polarization: Option<String>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub measure: Option<MeasureKind>,
    #[arg(long)]
    pub normalize: bool,
    #[arg(long = "no-local-randomization")]
    pub no_local_randomization: bool,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub output: OutputFormat,
}

impl clap::ValueEnum for MeasureKind {
    fn value_variants<'a>() -> &'a [Self] {
        &[MeasureKind::Gaussian, MeasureKind::Sphere]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(self.name()))
    }
}

/// `--polarization` value.
#[derive(Debug, Clone, PartialEq)]
pub enum PolarizationArg {
    Kind(PolarizationKind),
    Pi0(f64),
}

fn read_state(path: &Path) -> Result<PureState> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read state file {}: {e}", path.display())))?;
    PureState::from_json(&text)
        .map_err(|e| Error::Config(format!("state file {}: {e}", path.display())))
}

pub fn parse_polarization(text: &str) -> Result<PolarizationArg> {
    let kind = match text {
        "unbiased" => PolarizationKind::Unbiased,
        "separable" => PolarizationKind::Separable,
        "maxent" => PolarizationKind::MaxEntangled,
        other => {
            if let Some(v) = other.strip_prefix("pi0=") {
                let pi0 = v
                    .parse()
                    .map_err(|_| Error::Config(format!("--polarization: bad pi0 value {v:?}")))?;
                return Ok(PolarizationArg::Pi0(pi0));
            }
            if let Some(path) = other.strip_prefix("fixed:") {
                return Ok(PolarizationArg::Kind(PolarizationKind::FixedState(read_state(
                    Path::new(path),
                )?)));
            }
            return Err(Error::Config(format!(
                "--polarization: expected unbiased, separable, maxent, pi0=<value> or fixed:<path>, got {other:?}"
            )));
        }
    };
    Ok(PolarizationArg::Kind(kind))
}

fn polarization_kind(text: &str) -> Result<PolarizationKind> {
    match parse_polarization(text)? {
        PolarizationArg::Kind(k) => Ok(k),
        PolarizationArg::Pi0(_) => Err(Error::Config(
            "--polarization pi0=<value> is only accepted by `predict`".into(),
        )),
    }
}

/// Parse `a:b:step` (inclusive, evenly spaced) or `v1,v2,...`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = |what: &str| Error::Config(format!("grid {text:?}: {what}"));
    if let Some((a, rest)) = text.split_once(':') {
        let (b, step) = rest.split_once(':').ok_or_else(|| bad("expected a:b:step"))?;
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
        let (a, b, step) = (parse(a)?, parse(b)?, parse(step)?);
        if !(step > 0.0) || b < a {
            return Err(bad("need step > 0 and b >= a"));
        }
        let intervals = (b - a) / step;
        let count = intervals.round();
        if (intervals - count).abs() > 1e-9 * count.max(1.0) {
            return Err(bad("(b - a) is not a multiple of step"));
        }
        let count = count as usize;
        if count == 0 {
            return Ok(vec![a]);
        }
        Ok((0..=count)
            .map(|k| a + (b - a) * (k as f64 / count as f64))
            .collect())
    } else {
        text.split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad("not a number")))
            .collect()
    }
}

fn dims_json(d: Bipartition) -> Value {
    json!({"n_a": d.n_a(), "n_b": d.n_b()})
}

fn write_state(path: &Path, state: &PureState) -> Result<()> {
    fs::write(path, state.to_json()? + "\n")?;
    Ok(())
}

/// Run a parsed command and return the rendered output.
pub fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Predict {
            dims,
            bias,
            polarization,
            measure,
            eta_star: with_threshold,
            output,
        } => {
            let d = dims.resolve()?;
            let eps = resolve_epsilon(bias.epsilon, bias.eps4)?;
            let (pi0, mean) = match parse_polarization(&polarization)? {
                PolarizationArg::Pi0(pi0) => (pi0, mean_purity_for_measure(eps, pi0, d, measure)?),
                PolarizationArg::Kind(kind) => {
                    let p = predict(&kind, eps, d, measure)?;
                    (p.pi0, p.mean_purity)
                }
            };
            let mut columns = vec!["epsilon", "eps4", "pi0", "pi_unb", "pi_unb_exact", "mean_purity"];
            let mut row = vec![
                eps.into(),
                eps.powi(4).into(),
                pi0.into(),
                pi_unbiased(d).into(),
                pi_unbiased_exact(d).into(),
                mean.into(),
            ];
            if with_threshold {
                let t = eta_star(d);
                columns.extend(["eta_star", "eta_star_squared", "eta_star_saturated", "eta_star_asymptotic"]);
                row.extend([
                    t.eta_star.into(),
                    t.eta_star_squared.into(),
                    (t.saturated as u64).into(),
                    eta_star_asymptotic().into(),
                ]);
            }
            let mut table = Table::new(&columns).meta(
                "config",
                json!({
                    "subcommand": "predict", "dims": dims_json(d), "epsilon": eps,
                    "polarization": polarization, "measure": measure, "eta_star": with_threshold,
                }),
            );
            table.push(row);
            Ok(table.render(output))
        }
        Command::Sample {
            dims,
            bias,
            polarization,
            measure,
            seed,
            stream,
            no_local_randomization,
            normalize,
            emit_state,
            output,
        } => {
            let d = dims.resolve()?;
            let eps = resolve_epsilon(bias.epsilon, bias.eps4)?;
            let kind = polarization_kind(&polarization)?;
            let spec = PolarizationSpec::new(kind, eps, !no_local_randomization)?;
            let psi = polarized_sample(&spec, d, measure, &RngStream::new(seed, stream))?;
            let psi = if normalize { psi.normalized()? } else { psi };
            let rho = partial_trace_b(&psi);
            let mut table = Table::new(&["epsilon", "norm_sq", "purity", "effective_dimension"]).meta(
                "config",
                json!({
                    "subcommand": "sample", "dims": dims_json(d), "epsilon": eps,
                    "polarization": polarization, "measure": measure, "seed": seed,
                    "stream": stream, "randomize_local": !no_local_randomization,
                    "normalize": normalize,
                }),
            );
            table.push(vec![
                eps.into(),
                psi.norm_sqr().into(),
                purity(&rho).into(),
                effective_dimension(&rho)?.into(),
            ]);
            if let Some(path) = emit_state {
                write_state(&path, &psi)?;
            }
            Ok(table.render(output))
        }
        Command::Experiment(args) => run_experiment(args),
        Command::Moments {
            dims,
            trials,
            seed,
            measure,
            output,
        } => {
            let d = dims.resolve()?;
            let estimates = estimate_moments(d, trials, seed, measure)?;
            let fourth = fourth_moment_oracle(d, trials, seed, measure)?;
            let mut table = Table::new(&["name", "estimate", "stderr", "analytic", "z_score", "n"]).meta(
                "config",
                json!({
                    "subcommand": "moments", "dims": dims_json(d), "trials": trials,
                    "seed": seed, "measure": measure, "reference": "basis product |0>|0>",
                }),
            );
            for e in &estimates {
                table.push(vec![
                    e.name.as_str().into(),
                    e.value.into(),
                    e.stderr.into(),
                    e.analytic.into(),
                    e.z_score().into(),
                    e.n.into(),
                ]);
            }
            let c = fourth.expected_coeff;
            for (name, stats, analytic) in [
                ("FourthDeltaIj", fourth.delta_ij_coeff, c),
                ("FourthDeltaMuNu", fourth.delta_munu_coeff, c),
                ("FourthDiagonal", fourth.diagonal, 2.0 * c),
            ] {
                table.push(vec![
                    name.into(),
                    stats.mean.into(),
                    stats.stderr.into(),
                    analytic.into(),
                    stats.z_score(analytic).into(),
                    stats.n.into(),
                ]);
            }
            Ok(table.render(output))
        }
        Command::Threshold {
            dims,
            eta_grid,
            trials,
            seed,
            output,
        } => {
            let d = dims.resolve()?;
            let grid = parse_grid(&eta_grid)?;
            let scan = threshold_scan(d, &grid, trials, seed)?;
            let asymptotic = eta_star_asymptotic();
            let crossing = scan.crossing.unwrap_or(f64::NAN);
            let mut table = Table::new(&[
                "eta",
                "mean_purity",
                "stderr",
                "inv_mean_purity",
                "analytic_d_eff",
                "eta_star",
                "eta_star_asymptotic",
                "crossing",
            ])
            .meta(
                "config",
                json!({
                    "subcommand": "threshold", "dims": dims_json(d), "eta_grid": grid,
                    "trials": trials, "seed": seed, "measure": MeasureKind::Gaussian,
                }),
            )
            .meta("eta_star_saturated", Value::from(scan.analytic.saturated));
            for r in &scan.rows {
                table.push(vec![
                    r.eta.into(),
                    r.mean_purity.into(),
                    r.stderr.into(),
                    r.inv_mean_purity.into(),
                    r.analytic_d_eff.into(),
                    scan.analytic.eta_star.into(),
                    asymptotic.into(),
                    crossing.into(),
                ]);
            }
            Ok(table.render(output))
        }
        Command::Concentration {
            dims,
            alpha,
            bias,
            polarization,
            trials,
            seed,
            measure,
            output,
        } => {
            let d = dims.resolve()?;
            let eps = resolve_epsilon(bias.epsilon, bias.eps4)?;
            let config = ExperimentConfig {
                dims: d,
                spec: SpecTemplate {
                    kind: polarization_kind(&polarization)?,
                    randomize_local: true,
                },
                eps4_grid: vec![eps.powi(4)],
                trials,
                master_seed: seed,
                measure,
                normalize: false,
            };
            let rows = tail_frequency(&config, &alpha)?;
            let mut table = Table::new(&[
                "epsilon",
                "alpha",
                "empirical_norm_tail",
                "norm_bound",
                "norm_binomial_stderr",
                "empirical_purity_tail",
                "purity_bound",
                "purity_binomial_stderr",
                "n",
            ])
            .meta("config", json!({"subcommand": "concentration", "alpha": alpha, "experiment": config}));
            for r in &rows {
                table.push(vec![
                    r.epsilon.into(),
                    r.alpha.into(),
                    r.empirical_norm_tail.into(),
                    r.norm_bound.into(),
                    r.norm_binomial_stderr.into(),
                    r.empirical_purity_tail.into(),
                    r.purity_bound.into(),
                    r.purity_binomial_stderr.into(),
                    r.n.into(),
                ]);
            }
            Ok(table.render(output))
        }
        Command::FixedPurity {
            dims,
            target_purity,
            seed,
            stream,
            measure,
            emit_state,
            output,
        } => {
            let d = dims.resolve()?;
            let draw = fixed_purity_sample(target_purity, d, measure, &RngStream::new(seed, stream))?;
            let rho = partial_trace_b(&draw.state);
            let mut table = Table::new(&["target_purity", "epsilon", "pi0", "kind", "purity", "norm_sq"]).meta(
                "config",
                json!({
                    "subcommand": "fixed-purity", "dims": dims_json(d),
                    "target_purity": target_purity, "seed": seed, "stream": stream,
                    "measure": measure,
                }),
            );
            table.push(vec![
                target_purity.into(),
                draw.choice.epsilon.into(),
                draw.choice.pi0.into(),
                draw.choice.kind.name().into(),
                purity(&rho).into(),
                draw.state.norm_sqr().into(),
            ]);
            if let Some(path) = emit_state {
                write_state(&path, &draw.state)?;
            }
            Ok(table.render(output))
        }
    }
}

fn run_experiment(args: ExperimentArgs) -> Result<String> {
    let config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Error::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            ExperimentConfig::from_json(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => {
            let dims = Bipartition::new(
                args.dim_a.expect("required by clap"),
                args.dim_b.expect("required by clap"),
            )?;
            let config = ExperimentConfig {
                dims,
                spec: SpecTemplate {
                    kind: polarization_kind(args.polarization.as_deref().unwrap_or("separable"))?,
                    randomize_local: !args.no_local_randomization,
                },
                eps4_grid: parse_grid(args.eps4_grid.as_deref().unwrap_or("0:1:0.1"))?,
                trials: args.trials.unwrap_or(DEFAULT_TRIALS),
                master_seed: args.seed.unwrap_or(0),
                measure: args.measure.unwrap_or_default(),
                normalize: args.normalize,
            };
            config.validate()?;
            config
        }
    };
    let result = run_purity_experiment(&config)?;
    eprintln!("wall_time_s: {:.3}", result.wall_time.as_secs_f64());
    let mut table = Table::new(&["eps4", "sample_mean", "sample_std", "stderr", "analytic_mean", "z_score"])
        .meta("config", serde_json::to_value(&config)?);
    for r in &result.rows {
        table.push(vec![
            r.eps4.into(),
            r.sample_mean.into(),
            r.sample_std.into(),
            r.stderr.into(),
            r.analytic_mean.into(),
            r.z_score.into(),
        ]);
    }
    Ok(table.render(args.output))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        let g = parse_grid("0:1:0.1").unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(g[3], 0.3);
        assert_eq!(g[10], 1.0);
        assert_eq!(parse_grid("0:1:0.02").unwrap().len(), 51);
        assert_eq!(parse_grid("0.5").unwrap(), vec![0.5]);
        assert_eq!(parse_grid("0, 0.25,1").unwrap(), vec![0.0, 0.25, 1.0]);
        assert!(parse_grid("0:1:0.3").is_err());
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("a,b").is_err());
    }

    #[test]
    fn polarization_values() {
        assert_eq!(parse_polarization("maxent").unwrap(), PolarizationArg::Kind(PolarizationKind::MaxEntangled));
        assert_eq!(parse_polarization("pi0=0.5").unwrap(), PolarizationArg::Pi0(0.5));
        assert!(parse_polarization("entangled").is_err());
        assert!(parse_polarization("fixed:/nonexistent/state.json").is_err());
        assert!(polarization_kind("pi0=0.5").is_err());
    }

    #[test]
    fn epsilon_resolution() {
        assert_eq!(resolve_epsilon(None, Some(1.0)).unwrap(), 1.0);
        assert_eq!(resolve_epsilon(Some(0.3), None).unwrap(), 0.3);
        assert_eq!(resolve_epsilon(None, None).unwrap(), 0.0);
        assert!(resolve_epsilon(None, Some(1.5)).is_err());
        assert!(resolve_epsilon(Some(-0.1), None).is_err());
    }
}
