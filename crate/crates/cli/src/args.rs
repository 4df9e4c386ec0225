use std::num::NonZeroUsize;
use std::ops::RangeInclusive;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Compound-symmetry mixed models and heavy-tailed frailty distributions.
#[derive(Debug, Parser)]
#[command(name = "unobs-lab", version, about)]
pub struct Cli {
    /// Worker threads for parallel sections. Output does not depend on it.
    #[arg(long, env = "UNOBS_LAB_THREADS", global = true)]
    pub threads: Option<NonZeroUsize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Report the correlated random-intercept members sharing one marginal model.
    Equivalence(EquivalenceArgs),
    /// Simulate clustered data as long-format CSV.
    Simulate(SimulateArgs),
    /// Maximum-likelihood fit of the compound-symmetry model.
    Fit(FitArgs),
    /// Empirical Bayes predictions under several members of the family.
    Eb(EbArgs),
    /// Weibull-exponential moments, samples and running-mean traces.
    #[command(subcommand)]
    Heavytail(HeavytailCommand),
    /// Sample through a normal probability integral transform.
    Pit(PitArgs),
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct EquivalenceArgs {
    /// Between-cluster component (may be negative).
    #[arg(long)]
    pub lambda2: f64,
    /// Residual variance.
    #[arg(long)]
    pub nu2: f64,
    /// Comma-separated alpha values in [-1, 1].
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    pub alpha_grid: Vec<f64>,
    /// Cluster size.
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Cs,
    Extended,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub model: Model,
    /// Between-cluster component.
    #[arg(long)]
    pub lambda: f64,
    /// Residual variance.
    #[arg(long)]
    pub phi: f64,
    /// Intercept.
    #[arg(long, default_value_t = 0.0)]
    pub xi: f64,
    #[arg(long)]
    pub clusters: usize,
    #[arg(long)]
    pub cluster_size: usize,
    /// Family index; required with `--model extended`.
    #[arg(long, required_if_eq("model", "extended"))]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Sidecar CSV with the latent (b, eps) draws; `--model extended` only.
    #[arg(long)]
    pub latent: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Long-format CSV: cluster,unit,y,x1,...
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct EbArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    pub alpha_grid: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct WeArgs {
    #[arg(long)]
    pub phi: f64,
    #[arg(long)]
    pub rho: f64,
    #[arg(long)]
    pub delta: f64,
}

#[derive(Debug, Subcommand)]
pub enum HeavytailCommand {
    /// Tagged moments for each order in `--k` (e.g. `3` or `1..4`, inclusive).
    #[command(allow_negative_numbers = true)]
    Moments {
        #[command(flatten)]
        dist: WeArgs,
        #[arg(long, value_parser = parse_k_range)]
        k: RangeInclusive<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One draw per line.
    #[command(allow_negative_numbers = true)]
    Sample {
        #[command(flatten)]
        dist: WeArgs,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// CSV `n,running_mean` every `--stride` draws.
    #[command(allow_negative_numbers = true)]
    Trace {
        #[command(flatten)]
        dist: WeArgs,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        stride: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PitDist {
    WeibullExp,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct PitArgs {
    #[arg(long, value_enum)]
    pub dist: PitDist,
    #[command(flatten)]
    pub params: WeArgs,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_k_range(s: &str) -> Result<RangeInclusive<u32>, String> {
    let parse = |t: &str| {
        t.trim()
            .parse::<u32>()
            .map_err(|e| format!("bad moment order {t:?}: {e}"))
    };
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (parse(a)?, parse(b.strip_prefix('=').unwrap_or(b))?),
        None => {
            let k = parse(s)?;
            (k, k)
        }
    };
    if lo == 0 || lo > hi {
        return Err(format!("moment range {s:?} must satisfy 1 <= start <= end"));
    }
    Ok(lo..=hi)
}
