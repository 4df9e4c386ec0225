//! The Weibull-exponential family.
//!
//! A Weibull outcome with rate `λe^μ θ` and an exponential frailty
//! `θ ~ Exp(δ)` has density `φρy^{ρ−1}δ/(δ+φy^ρ)²` with `φ = λe^μ`.
//! Its survival function `δ/(δ+φy^ρ)` decays like `y^{−ρ}`, so `E(Yᵏ)` is
//! finite only for `k < ρ`; at `ρ = 1` no moment exists at all.

use rand::distr::Open01;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::quadrature::integrate;
use crate::rng::Seed;
use crate::special::{is_gamma_pole, ln_gamma_signed, POLE_TOL};
use crate::{Error, Result};

/// Draws per substream block; blocks are sampled independently.
pub(crate) const BLOCK: usize = 4096;

/// Parameters `(φ, ρ, δ)` of a Weibull-exponential law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeibullExpSpec {
    phi: f64,
    rho: f64,
    delta: f64,
}

impl WeibullExpSpec {
    pub fn new(phi: f64, rho: f64, delta: f64) -> Result<Self> {
        for (name, v) in [("phi", phi), ("rho", rho), ("delta", delta)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(Self { phi, rho, delta })
    }

    /// From the Weibull scale `λ`, shape `ρ`, frailty rate `δ` and linear
    /// predictor `μ`, folding `μ` into `φ = λe^μ`.
    pub fn from_weibull(lambda: f64, rho: f64, delta: f64, mu: f64) -> Result<Self> {
        Self::new(lambda * mu.exp(), rho, delta)
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Density. At `y = 0` with `ρ < 1` the density is unbounded and this
    /// returns `f64::INFINITY`.
    pub fn pdf(&self, y: f64) -> f64 {
        if y < 0.0 {
            return 0.0;
        }
        if y == 0.0 {
            return match self.rho.partial_cmp(&1.0) {
                Some(std::cmp::Ordering::Less) => f64::INFINITY,
                Some(std::cmp::Ordering::Equal) => self.phi / self.delta,
                _ => 0.0,
            };
        }
        let yr = y.powf(self.rho);
        let denom = self.delta + self.phi * yr;
        self.phi * self.rho * yr / y * self.delta / (denom * denom)
    }

    /// `F(y) = φy^ρ/(δ + φy^ρ)`.
    pub fn cdf(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        // each step is a monotone rounding, so the result is monotone in y
        1.0 / (1.0 + self.delta / (self.phi * y.powf(self.rho)))
    }

    /// `1 − F(y) = δ/(δ + φy^ρ)`.
    pub fn survival(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 1.0;
        }
        self.delta / (self.delta + self.phi * y.powf(self.rho))
    }

    /// `F⁻¹(u) = (δu/(φ(1−u)))^{1/ρ}` for `u ∈ (0, 1)`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain(format!(
                "quantile level u = {u} must lie in (0, 1)"
            )));
        }
        Ok((self.delta * u / (self.phi * (1.0 - u))).powf(1.0 / self.rho))
    }

    #[inline]
    fn quantile_unchecked(&self, u: f64) -> f64 {
        (self.delta * u / (self.phi * (1.0 - u))).powf(1.0 / self.rho)
    }

    /// Inverse-CDF draws. Block `b` of [`BLOCK`] draws uses substream `b`.
    pub fn sample(&self, n_draws: usize, seed: Seed) -> Vec<f64> {
        sample_blocks(n_draws, seed, 0, |rng| {
            self.quantile_unchecked(rng.sample(Open01))
        })
    }
}

/// Fills `n` values, block `b` drawn from substream `stream_base + b`.
pub(crate) fn sample_blocks<F>(n: usize, seed: Seed, stream_base: u64, draw: F) -> Vec<f64>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> f64 + Sync,
{
    let blocks = n.div_ceil(BLOCK);
    (0..blocks)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng = seed.stream(stream_base + b as u64);
            let len = BLOCK.min(n - b * BLOCK);
            (0..len).map(|_| draw(&mut rng)).collect::<Vec<_>>()
        })
        .collect()
}

/// Tagged outcome of evaluating `E(Yᵏ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentResult {
    pub k: u32,
    /// The Gamma factors avoid their poles (`k/ρ` is not a positive integer).
    pub formula_defined: bool,
    /// `∫ yᵏ f(y) dy < ∞`, i.e. `k < ρ`.
    pub integral_finite: bool,
    /// Present exactly when the integral is finite.
    pub value: Option<f64>,
}

/// `(k/ρ)(δ/φ)^{k/ρ} Γ(1−k/ρ) Γ(k/ρ)` evaluated in log space, or `None` at a
/// Gamma pole. The number is returned even when the integral diverges, in
/// which case it is meaningless (possibly negative).
pub fn we_moment_formula(spec: &WeibullExpSpec, k: u32) -> Option<f64> {
    let a = k as f64 / spec.rho;
    let (lg1, s1) = ln_gamma_signed(1.0 - a)?;
    let (lg2, s2) = ln_gamma_signed(a)?;
    let log_mag = a.ln() + a * (spec.delta / spec.phi).ln() + lg1 + lg2;
    Some(s1 * s2 * log_mag.exp())
}

/// Moment of order `k ≥ 1` with its definedness flags.
pub fn we_moment(spec: &WeibullExpSpec, k: u32) -> MomentResult {
    assert!(k >= 1, "moment order must be at least 1");
    let a = k as f64 / spec.rho;
    let formula_defined = !is_gamma_pole(1.0 - a);
    let integral_finite = formula_defined && (k as f64) < spec.rho;
    let value = if integral_finite {
        we_moment_formula(spec, k)
    } else {
        None
    };
    MomentResult {
        k,
        formula_defined,
        integral_finite,
        value,
    }
}

/// Whether `Γ(α − k/ρ)` in the general Weibull-gamma moment avoids its poles.
pub fn wg_moment_defined(alpha_g: f64, rho: f64, k: u32) -> bool {
    let arg = alpha_g - k as f64 / rho;
    let r = arg.round();
    !(r <= 0.0 && (arg - r).abs() <= POLE_TOL)
}

/// Absolute tolerance for [`truncated_moment`] and [`tail_moment`].
pub const MOMENT_TOL: f64 = 1e-10;

/// `∫₀ᵀ yᵏ f(y) dy`.
///
/// Integrates in `u = φy^ρ/δ`, where the integrand becomes
/// `(δu/φ)^{k/ρ}(1+u)^{−2}`; the range beyond `u = 1` is taken on a log scale.
pub fn truncated_moment(spec: &WeibullExpSpec, k: u32, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!(
            "truncation point T = {t} must be positive"
        )));
    }
    let a = k as f64 / spec.rho;
    let c = (spec.delta / spec.phi).powf(a);
    let upper = spec.phi * t.powf(spec.rho) / spec.delta;

    let near = integrate(
        |u| c * u.powf(a) / ((1.0 + u) * (1.0 + u)),
        0.0,
        upper.min(1.0),
        MOMENT_TOL / 2.0,
    )?;
    let mut total = near.value;
    if upper > 1.0 {
        // u = eᵗ: integrand c·exp((a−1)t − 2 ln(1 + e^{−t}))
        let far = integrate(
            |s| c * ((a - 1.0) * s - 2.0 * (-s).exp().ln_1p()).exp(),
            0.0,
            upper.ln(),
            MOMENT_TOL / 2.0,
        )?;
        total += far.value;
    }
    Ok(total)
}

/// `∫_T^∞ yᵏ f(y) dy`, infinite when `k ≥ ρ`.
///
/// With `a = k/ρ < 1` and `β = 1 − a`, the substitution `u = s^{−1/β}` turns
/// the tail into `(c/β) ∫₀^{U^{−β}} (1 + s^{1/β})^{−2} ds`, a bounded integrand.
pub fn tail_moment(spec: &WeibullExpSpec, k: u32, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!(
            "truncation point T = {t} must be positive"
        )));
    }
    let a = k as f64 / spec.rho;
    if a >= 1.0 {
        return Ok(f64::INFINITY);
    }
    let beta = 1.0 - a;
    let c = (spec.delta / spec.phi).powf(a);
    let upper = spec.phi * t.powf(spec.rho) / spec.delta;
    let est = integrate(
        |s| (1.0 + s.powf(1.0 / beta)).powi(-2),
        0.0,
        upper.powf(-beta),
        MOMENT_TOL * beta / c,
    )?;
    Ok(c / beta * est.value)
}

/// Running sample mean at `n = stride, 2·stride, …` (and at `n_total` if it is
/// not a multiple of `stride`).
pub fn running_mean_trace(
    spec: &WeibullExpSpec,
    n_total: usize,
    stride: usize,
    seed: Seed,
) -> Result<Vec<(usize, f64)>> {
    if stride == 0 || n_total < stride {
        return Err(Error::Validation(format!(
            "need n >= stride >= 1, got n = {n_total}, stride = {stride}"
        )));
    }
    let draws = spec.sample(n_total, seed);
    let mut out = Vec::with_capacity(n_total / stride + 1);
    let mut sum = 0.0;
    for (i, y) in draws.iter().enumerate() {
        sum += y;
        let n = i + 1;
        if n % stride == 0 || n == n_total {
            out.push((n, sum / n as f64));
        }
    }
    Ok(out)
}
