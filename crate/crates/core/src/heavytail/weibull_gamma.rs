//! Weibull outcomes with gamma random effects, one effect per component.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};

use super::weibull_exp::{sample_blocks, BLOCK};
use crate::rng::Seed;
use crate::{Error, Result};

/// How the gamma parameters are tied down.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintMode {
    /// `αⱼβⱼ = 1`: mean-one frailty.
    Frailty,
    /// `αⱼ = 1`, `βⱼ = 1/δⱼ`: exponential random effects.
    Bayarri,
    /// Both free. Not jointly identifiable with an intercept in `ξ`.
    Free,
}

/// Weibull scale `λ`, shape `ρ`, regression `ξ` with per-component covariates
/// `xⱼ`, and gamma shape/scale `(αⱼ, βⱼ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeibullGammaSpec {
    lambda: f64,
    rho: f64,
    xi: Vec<f64>,
    x: Vec<Vec<f64>>,
    alpha_g: Vec<f64>,
    beta_g: Vec<f64>,
    mode: ConstraintMode,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

impl WeibullGammaSpec {
    fn build(
        lambda: f64,
        rho: f64,
        xi: Vec<f64>,
        x: Vec<Vec<f64>>,
        alpha_g: Vec<f64>,
        beta_g: Vec<f64>,
        mode: ConstraintMode,
    ) -> Result<Self> {
        positive("lambda", lambda)?;
        positive("rho", rho)?;
        if x.is_empty() {
            return Err(Error::Validation(
                "at least one component is required".into(),
            ));
        }
        if x.iter().any(|row| row.len() != xi.len()) {
            return Err(Error::Validation(format!(
                "every covariate vector must have length {}",
                xi.len()
            )));
        }
        if alpha_g.len() != x.len() || beta_g.len() != x.len() {
            return Err(Error::Validation(
                "one gamma (alpha, beta) pair is needed per component".into(),
            ));
        }
        for (&a, &b) in alpha_g.iter().zip(&beta_g) {
            positive("gamma shape", a)?;
            positive("gamma scale", b)?;
        }
        Ok(Self {
            lambda,
            rho,
            xi,
            x,
            alpha_g,
            beta_g,
            mode,
        })
    }

    /// Mean-one gamma frailty with shapes `alpha_g` (scales `1/αⱼ`).
    pub fn frailty(
        lambda: f64,
        rho: f64,
        xi: Vec<f64>,
        x: Vec<Vec<f64>>,
        alpha_g: Vec<f64>,
    ) -> Result<Self> {
        let beta_g = alpha_g.iter().map(|a| 1.0 / a).collect();
        Self::build(lambda, rho, xi, x, alpha_g, beta_g, ConstraintMode::Frailty)
    }

    /// Exponential random effects with rates `delta`.
    pub fn bayarri(
        lambda: f64,
        rho: f64,
        xi: Vec<f64>,
        x: Vec<Vec<f64>>,
        delta: Vec<f64>,
    ) -> Result<Self> {
        for &d in &delta {
            positive("delta", d)?;
        }
        let beta_g = delta.iter().map(|d| 1.0 / d).collect();
        Self::build(
            lambda,
            rho,
            xi,
            x,
            vec![1.0; delta.len()],
            beta_g,
            ConstraintMode::Bayarri,
        )
    }

    pub fn free(
        lambda: f64,
        rho: f64,
        xi: Vec<f64>,
        x: Vec<Vec<f64>>,
        alpha_g: Vec<f64>,
        beta_g: Vec<f64>,
    ) -> Result<Self> {
        Self::build(lambda, rho, xi, x, alpha_g, beta_g, ConstraintMode::Free)
    }

    pub fn mode(&self) -> ConstraintMode {
        self.mode
    }

    /// True when the gamma scale is aliased with the intercept: with both
    /// `αⱼ` and `βⱼ` free, `βⱼ` multiplies the rate just like `e^{ξ₀}` does.
    pub fn is_aliased(&self) -> bool {
        self.mode == ConstraintMode::Free
    }

    pub fn n_components(&self) -> usize {
        self.x.len()
    }

    pub fn alpha_g(&self) -> &[f64] {
        &self.alpha_g
    }

    pub fn beta_g(&self) -> &[f64] {
        &self.beta_g
    }

    /// `λe^{xⱼ'ξ}`.
    pub fn rate(&self, j: usize) -> f64 {
        let eta: f64 = self.x[j].iter().zip(&self.xi).map(|(a, b)| a * b).sum();
        self.lambda * eta.exp()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

/// Draws `n_draws` outcomes per component: `θ ~ Gamma(αⱼ, βⱼ)`, then `Y` with
/// survival `exp(−λ y^ρ θ e^{x'ξ})` by inverting the survival function.
///
/// Component `j` uses substreams starting at `j·2³²`.
pub fn wg_sample(spec: &WeibullGammaSpec, n_draws: usize, seed: Seed) -> Vec<Vec<f64>> {
    assert!(
        n_draws.div_ceil(BLOCK) < 1 << 32,
        "too many draws for the substream layout"
    );
    (0..spec.n_components())
        .map(|j| {
            let gamma =
                Gamma::new(spec.alpha_g[j], spec.beta_g[j]).expect("validated gamma parameters");
            let rate = spec.rate(j);
            let inv_rho = 1.0 / spec.rho;
            sample_blocks(n_draws, seed, (j as u64) << 32, |rng| {
                let theta: f64 = gamma.sample(rng);
                let e: f64 = rng.sample(Exp1);
                (e / (rate * theta)).powf(inv_rho)
            })
        })
        .collect()
}
