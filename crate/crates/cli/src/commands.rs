use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use unobs_core::equivalence::{
    decomposition_table, eb_shrinkage, marginal_cov_extended, psd_slack, DecompRow, ExtendedSpec,
};
use unobs_core::estimation::{
    fit_ml, loglik_cs, simulate_cs, simulate_extended, write_latent, FitOptions, FitResult,
    SimLayout,
};
use unobs_core::heavytail::{
    pit_sample, running_mean_trace, we_moment, MomentResult, WeibullExpSpec,
};
use unobs_core::io::{fmt_f64, read_dataset, write_dataset};
use unobs_core::model::validate_cs;
use unobs_core::nalgebra::DVector;
use unobs_core::{CSParams, Dataset, Seed};

use crate::args::{
    Command, EbArgs, EquivalenceArgs, FitArgs, HeavytailCommand, Model, PitArgs, PitDist,
    SimulateArgs, WeArgs,
};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Equivalence(a) => equivalence(a),
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Eb(a) => eb(a),
        Command::Heavytail(c) => heavytail(c),
        Command::Pit(a) => pit(a),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut w = output(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_lines(path: Option<&Path>, values: &[f64]) -> Result<()> {
    let mut w = output(path)?;
    for v in values {
        writeln!(w, "{}", fmt_f64(*v))?;
    }
    w.flush()?;
    Ok(())
}

fn load(path: &Path) -> Result<Dataset> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    read_dataset(file).with_context(|| format!("reading {}", path.display()))
}

#[derive(Serialize)]
struct DecompJson {
    sigma2: f64,
    d: f64,
    two_tau: f64,
    total: f64,
}

impl From<DecompRow> for DecompJson {
    fn from(r: DecompRow) -> Self {
        Self {
            sigma2: r.sigma2_part,
            d: r.d_part,
            two_tau: r.two_tau_part,
            total: r.total(),
        }
    }
}

#[derive(Serialize)]
struct Decomposition {
    variance: DecompJson,
    covariance: DecompJson,
}

#[derive(Serialize)]
struct EquivalenceRecord {
    lambda2: f64,
    nu2: f64,
    alpha: f64,
    n: usize,
    d: f64,
    tau: f64,
    slack: f64,
    /// `φ + nλ > 0`; shrinkage is undefined otherwise.
    marginal_pd: bool,
    shrinkage: Option<f64>,
    joint_psd: bool,
    joint_min_eigenvalue: f64,
    marginal_cov: Vec<f64>,
    decomposition: Decomposition,
}

fn equivalence(a: EquivalenceArgs) -> Result<()> {
    if a.n == 0 {
        bail!("cluster size must be at least 1");
    }
    let records = a
        .alpha_grid
        .iter()
        .map(|&alpha| {
            let spec = ExtendedSpec::new(a.lambda2, a.nu2, alpha)?;
            let (variance, covariance) = decomposition_table(a.lambda2, a.nu2, alpha)?;
            Ok(EquivalenceRecord {
                lambda2: a.lambda2,
                nu2: a.nu2,
                alpha,
                n: a.n,
                d: spec.d(),
                tau: spec.tau(),
                slack: psd_slack(&spec),
                marginal_pd: validate_cs(&[a.n], a.lambda2, a.nu2).valid,
                shrinkage: eb_shrinkage(&spec, a.n).ok(),
                joint_psd: spec.joint_is_psd(a.n),
                joint_min_eigenvalue: spec.joint_min_eigenvalue(a.n),
                marginal_cov: marginal_cov_extended(&spec, a.n).to_row_major(),
                decomposition: Decomposition {
                    variance: variance.into(),
                    covariance: covariance.into(),
                },
            })
        })
        .collect::<unobs_core::Result<Vec<_>>>()?;
    write_json(a.out.as_deref(), &records)
}

fn simulate(a: SimulateArgs) -> Result<()> {
    if a.clusters == 0 || a.cluster_size == 0 {
        bail!("--clusters and --cluster-size must be at least 1");
    }
    let layout = SimLayout::balanced(a.clusters, a.cluster_size);
    let seed = Seed(a.seed);
    let data = match a.model {
        Model::Cs => {
            if a.latent.is_some() {
                bail!("--latent is only available with --model extended");
            }
            simulate_cs(&CSParams::new(vec![a.xi], a.lambda, a.phi), &layout, seed)?
        }
        Model::Extended => {
            let alpha = a.alpha.context("--model extended needs --alpha")?;
            let spec = ExtendedSpec::new(a.lambda, a.phi, alpha)?;
            let (data, latent) = simulate_extended(&spec, &[a.xi], &layout, seed)?;
            if let Some(p) = &a.latent {
                let mut w = output(Some(p))?;
                write_latent(&data, &latent, &mut w)?;
                w.flush()?;
            }
            data
        }
    };
    let mut w = output(a.out.as_deref())?;
    write_dataset(&data, &mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct FitReport {
    xi: Vec<f64>,
    lambda: f64,
    phi: f64,
    loglik: f64,
    converged: bool,
    iterations: usize,
    constraint_active: bool,
}

impl From<&FitResult> for FitReport {
    fn from(f: &FitResult) -> Self {
        Self {
            xi: f.params.xi.clone(),
            lambda: f.params.lambda,
            phi: f.params.phi,
            loglik: f.loglik,
            converged: f.converged,
            iterations: f.iterations,
            constraint_active: f.constraint_active,
        }
    }
}

fn fit(a: FitArgs) -> Result<()> {
    let data = load(&a.data)?;
    let result = fit_ml(&data, FitOptions::default())?;
    write_json(a.out.as_deref(), &FitReport::from(&result))
}

#[derive(Serialize)]
struct Prediction {
    cluster: String,
    n: usize,
    mean_residual: f64,
    shrinkage: f64,
    prediction: f64,
}

#[derive(Serialize)]
struct EbMember {
    alpha: f64,
    d: f64,
    tau: f64,
    /// Log-likelihood under this member's implied marginal model.
    loglik: f64,
    predictions: Vec<Prediction>,
}

#[derive(Serialize)]
struct EbReport {
    fit: FitReport,
    members: Vec<EbMember>,
}

fn eb(a: EbArgs) -> Result<()> {
    let data = load(&a.data)?;
    let fitted = fit_ml(&data, FitOptions::default())?;
    let CSParams { xi, lambda, phi } = &fitted.params;
    let residual_means: Vec<f64> = data
        .clusters()
        .iter()
        .map(|c| (&c.y - &c.x * DVector::from_column_slice(xi)).mean())
        .collect();
    let members = a
        .alpha_grid
        .iter()
        .map(|&alpha| {
            let spec = ExtendedSpec::new(*lambda, *phi, alpha)?;
            let implied = CSParams::new(xi.clone(), spec.d() + 2.0 * spec.tau(), spec.sigma2());
            let predictions = data
                .clusters()
                .iter()
                .zip(&residual_means)
                .map(|(c, &r)| {
                    let c_n = eb_shrinkage(&spec, c.len())?;
                    Ok(Prediction {
                        cluster: c.id.clone(),
                        n: c.len(),
                        mean_residual: r,
                        shrinkage: c_n,
                        prediction: c_n * r,
                    })
                })
                .collect::<unobs_core::Result<Vec<_>>>()?;
            Ok(EbMember {
                alpha,
                d: spec.d(),
                tau: spec.tau(),
                loglik: loglik_cs(&data, &implied)?,
                predictions,
            })
        })
        .collect::<unobs_core::Result<Vec<_>>>()?;
    write_json(
        a.out.as_deref(),
        &EbReport {
            fit: FitReport::from(&fitted),
            members,
        },
    )
}

fn we_spec(d: WeArgs) -> Result<WeibullExpSpec> {
    Ok(WeibullExpSpec::new(d.phi, d.rho, d.delta)?)
}

fn heavytail(c: HeavytailCommand) -> Result<()> {
    match c {
        HeavytailCommand::Moments { dist, k, out } => {
            let spec = we_spec(dist)?;
            let rows: Vec<MomentResult> = k.map(|k| we_moment(&spec, k)).collect();
            write_json(out.as_deref(), &rows)
        }
        HeavytailCommand::Sample { dist, n, seed, out } => {
            let spec = we_spec(dist)?;
            write_lines(out.as_deref(), &spec.sample(n, Seed(seed)))
        }
        HeavytailCommand::Trace {
            dist,
            n,
            stride,
            seed,
            out,
        } => {
            let spec = we_spec(dist)?;
            let trace = running_mean_trace(&spec, n, stride, Seed(seed))?;
            let mut w = output(out.as_deref())?;
            writeln!(w, "n,running_mean")?;
            for (i, m) in trace {
                writeln!(w, "{i},{}", fmt_f64(m))?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

fn pit(a: PitArgs) -> Result<()> {
    let draws = match a.dist {
        PitDist::WeibullExp => {
            let spec = we_spec(a.params)?;
            // u is strictly inside (0, 1) here, so the quantile cannot fail
            pit_sample(|u| spec.quantile(u).unwrap_or(f64::NAN), a.n, Seed(a.seed))?
        }
    };
    write_lines(a.out.as_deref(), &draws)
}
