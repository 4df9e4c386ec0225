//! Maximum-likelihood fitting of the compound-symmetry marginal model and
//! seeded simulation from the hierarchies that induce it.
//!
//! `λ` is never clamped at zero: the feasible set is `φ > 0` and
//! `φ + nᵢλ > 0` for every cluster size present.

mod nelder_mead;
mod simulate;

pub use nelder_mead::{minimize, SimplexOptions, SimplexResult};
pub use simulate::{simulate_cs, simulate_extended, write_latent, Design, Latent, SimLayout};

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::Serialize;

use crate::model::{cs_logdet, cs_quad_form, gls_mean, require_pd, CSParams, Dataset};
use crate::rng::Seed;
use crate::{Error, Result};

/// Result of a likelihood fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub params: CSParams,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Optimum lies within [`BOUNDARY_TOL`] of `φ + nλ = 0` or `φ = 0`.
    pub constraint_active: bool,
}

/// Distance to the positive-definiteness boundary that counts as "on" it.
pub const BOUNDARY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Simplex diameter in `(λ, ln φ)` coordinates at which to stop.
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-9,
        }
    }
}

/// Gaussian log-likelihood of the marginal model `Yᵢ ~ N(Xᵢξ, λJ + φI)`.
pub fn loglik_cs(data: &Dataset, params: &CSParams) -> Result<f64> {
    if params.xi.len() != data.p() {
        return Err(Error::Validation(format!(
            "xi has {} coefficients but the design has {} columns",
            params.xi.len(),
            data.p()
        )));
    }
    require_pd(&data.cluster_sizes(), params.lambda, params.phi)?;
    let xi = DVector::from_column_slice(&params.xi);
    Ok(loglik_unchecked(data, &xi, params.lambda, params.phi))
}

fn loglik_unchecked(data: &Dataset, xi: &DVector<f64>, lambda: f64, phi: f64) -> f64 {
    let ln2pi = (2.0 * PI).ln();
    data.clusters()
        .iter()
        .map(|cl| {
            let r = &cl.y - &cl.x * xi;
            let n = cl.len();
            -0.5 * (n as f64 * ln2pi + cs_logdet(n, lambda, phi) + cs_quad_form(&r, lambda, phi))
        })
        .sum()
}

fn is_on_boundary(data: &Dataset, lambda: f64, phi: f64) -> bool {
    phi < BOUNDARY_TOL || phi + data.max_cluster_size() as f64 * lambda.min(0.0) < BOUNDARY_TOL
}

/// Method-of-moments start: pooled within-cluster variance of OLS residuals
/// for `φ`, between-minus-within for `λ`, pulled inside the feasible region.
fn starting_values(data: &Dataset) -> Result<(f64, f64)> {
    let xi = gls_mean(data, 0.0, 1.0)?;
    let resid: Vec<DVector<f64>> = data.clusters().iter().map(|c| &c.y - &c.x * &xi).collect();

    let (mut ssw, mut dfw) = (0.0, 0usize);
    for r in &resid {
        let m = r.mean();
        ssw += r.iter().map(|v| (v - m).powi(2)).sum::<f64>();
        dfw += r.len() - 1;
    }
    let means: Vec<f64> = resid.iter().map(|r| r.mean()).collect();
    let gm = means.iter().sum::<f64>() / means.len() as f64;
    let between =
        means.iter().map(|m| (m - gm).powi(2)).sum::<f64>() / (means.len() as f64 - 1.0).max(1.0);
    let nbar = data.n_obs() as f64 / data.n_clusters() as f64;

    let phi0 = if dfw > 0 { ssw / dfw as f64 } else { 0.0 };
    if phi0 > 0.0 && phi0.is_finite() {
        let floor = -0.5 * phi0 / data.max_cluster_size() as f64;
        return Ok(((between - phi0 / nbar).max(floor), phi0));
    }
    let all: Vec<f64> = resid.iter().flat_map(|r| r.iter().copied()).collect();
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    let var = all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / all.len() as f64;
    if var > 0.0 {
        Ok((0.0, var))
    } else {
        Err(Error::Boundary("residuals have zero variance".into()))
    }
}

/// Maximizes the likelihood over `(λ, φ)` with `ξ` profiled out by GLS.
///
/// The search runs a Nelder-Mead simplex on `(λ, ln φ)`; points outside the
/// positive-definite region score `+∞`. After convergence the simplex is
/// rebuilt around the best point and the search repeated until it no longer
/// improves, which guards against premature collapse.
pub fn fit_ml(data: &Dataset, opts: FitOptions) -> Result<FitResult> {
    if data.n_clusters() < 2 {
        return Err(Error::Validation(
            "fitting needs at least two clusters".into(),
        ));
    }
    if data.max_cluster_size() < 2 {
        return Err(Error::Unidentified);
    }
    let sizes = data.cluster_sizes();
    let objective = |theta: &[f64]| -> f64 {
        let (lambda, phi) = (theta[0], theta[1].exp());
        if require_pd(&sizes, lambda, phi).is_err() {
            return f64::INFINITY;
        }
        match gls_mean(data, lambda, phi) {
            Ok(xi) => -loglik_unchecked(data, &xi, lambda, phi),
            Err(_) => f64::INFINITY,
        }
    };

    let (lambda0, phi0) = starting_values(data)?;
    let mut x = vec![lambda0, phi0.ln()];
    let mut step = vec![0.25 * phi0.max(lambda0.abs()), 0.25];
    let mut best = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..4 {
        let budget = opts.max_iter.saturating_sub(iterations);
        if budget == 0 {
            break;
        }
        let r = minimize(
            &objective,
            &x,
            &step,
            SimplexOptions {
                diameter_tol: opts.tol,
                max_iter: budget,
            },
        );
        iterations += r.iterations;
        converged = r.converged;
        let improved = r.f < best - 1e-12 * best.abs().max(1.0);
        best = best.min(r.f);
        x = r.x;
        if !improved || !converged {
            break;
        }
        step = vec![1e-3 * step[0].max(1e-6), 1e-3];
    }
    if !best.is_finite() {
        return Err(Error::Domain("no feasible point found".into()));
    }

    let (lambda, phi) = (x[0], x[1].exp());
    let xi = gls_mean(data, lambda, phi)?;
    let loglik = loglik_unchecked(data, &xi, lambda, phi);
    Ok(FitResult {
        params: CSParams::new(xi.iter().copied().collect(), lambda, phi),
        loglik,
        converged,
        iterations,
        constraint_active: is_on_boundary(data, lambda, phi),
    })
}

/// Closed-form ML estimates for balanced intercept-only data:
/// `μ̂ = ȳ`, `φ̂ = SSW/(N(n−1))`, `λ̂ = SSB/(Nn) − φ̂/n`, with `λ̂` left
/// untruncated.
pub fn fit_balanced_closed_form(data: &Dataset) -> Result<FitResult> {
    let n = data
        .balanced_size()
        .ok_or_else(|| Error::UnsupportedLayout("closed form needs equal cluster sizes".into()))?;
    if !data.is_intercept_only() {
        return Err(Error::UnsupportedLayout(
            "closed form needs an intercept-only design".into(),
        ));
    }
    if n < 2 {
        return Err(Error::Unidentified);
    }
    let big_n = data.n_clusters() as f64;
    let nf = n as f64;
    let means: Vec<f64> = data.clusters().iter().map(|c| c.mean()).collect();
    let grand = means.iter().sum::<f64>() / big_n;
    let ssw: f64 = data
        .clusters()
        .iter()
        .zip(&means)
        .map(|(c, m)| c.y.iter().map(|v| (v - m).powi(2)).sum::<f64>())
        .sum();
    let ssb = nf * means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let phi = ssw / (big_n * (nf - 1.0));
    let lambda = ssb / (big_n * nf) - phi / nf;
    if !(phi > 0.0) {
        return Err(Error::Boundary(
            "within-cluster sum of squares is zero (phi = 0)".into(),
        ));
    }
    if !(phi + nf * lambda > 0.0) {
        return Err(Error::Boundary(
            "between-cluster sum of squares is zero (phi + n*lambda = 0)".into(),
        ));
    }
    let params = CSParams::new(vec![grand], lambda, phi);
    let loglik = loglik_cs(data, &params)?;
    Ok(FitResult {
        params,
        loglik,
        converged: true,
        iterations: 0,
        constraint_active: is_on_boundary(data, lambda, phi),
    })
}

/// Runs `task` for `reps` child seeds of `seed` on the current rayon pool.
/// Results are in replicate order regardless of scheduling.
pub fn replicate<T: Send>(
    seed: Seed,
    reps: usize,
    task: impl Fn(usize, Seed) -> T + Sync + Send,
) -> Vec<T> {
    use rayon::prelude::*;
    (0..reps)
        .into_par_iter()
        .map(|r| task(r, seed.derive(r as u64)))
        .collect()
}
