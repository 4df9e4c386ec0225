//! Hierarchical specifications that share one compound-symmetry marginal.
//!
//! Two families are covered:
//!
//! * the two-occasion pair of a random intercept with heterogeneous errors
//!   ([`SpecA`]) versus a random intercept plus random slope with homogeneous
//!   errors ([`SpecB`]);
//! * random intercepts correlated with the measurement errors, indexed by
//!   `α ∈ [−1, 1]` ([`ExtendedSpec`]). Every member has marginal covariance
//!   `λ²J + ν²I`, yet the empirical Bayes prediction of the intercept moves
//!   linearly with `α`.

use serde::Serialize;

use crate::linalg::SymMatrix;
use crate::model::{cs_covariance, validate_cs};
use crate::{Error, Result};

/// Random intercept with occasion-specific error variances (two occasions).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpecA {
    pub lambda2: f64,
    pub nu1sq: f64,
    pub nu2sq: f64,
}

impl SpecA {
    pub fn new(lambda2: f64, nu1sq: f64, nu2sq: f64) -> Result<Self> {
        if !(lambda2 >= 0.0) || !(nu1sq > 0.0) || !(nu2sq > 0.0) || !lambda2.is_finite() {
            return Err(Error::Domain(format!(
                "SpecA needs lambda2 >= 0 and positive error variances, got ({lambda2}, {nu1sq}, {nu2sq})"
            )));
        }
        Ok(Self {
            lambda2,
            nu1sq,
            nu2sq,
        })
    }
}

/// Uncorrelated random intercept and slope with a homogeneous error.
///
/// The slope variance may be negative: the image of a [`SpecA`] with
/// `ν₂² < ν₁²` is still a valid marginal model even though no random slope
/// can produce it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpecB {
    pub lambda1sq: f64,
    pub lambda2sq: f64,
    pub nusq: f64,
}

impl SpecB {
    pub fn is_valid_hierarchy(&self) -> bool {
        self.lambda2sq >= 0.0
    }
}

/// `[[λ²+ν₁², λ²], [λ², λ²+ν₂²]]`.
pub fn v1_matrix(spec: &SpecA) -> SymMatrix {
    let mut m = SymMatrix::zeros(2);
    m.set(0, 0, spec.lambda2 + spec.nu1sq);
    m.set(1, 0, spec.lambda2);
    m.set(1, 1, spec.lambda2 + spec.nu2sq);
    m
}

/// `[[λ₁²+ν², λ₁²], [λ₁², λ₁²+λ₂²+ν²]]`.
pub fn v2_matrix(spec: &SpecB) -> SymMatrix {
    let mut m = SymMatrix::zeros(2);
    m.set(0, 0, spec.lambda1sq + spec.nusq);
    m.set(1, 0, spec.lambda1sq);
    m.set(1, 1, spec.lambda1sq + spec.lambda2sq + spec.nusq);
    m
}

/// Maps heterogeneous errors onto a random slope with the same marginal.
pub fn map_a_to_b(spec: &SpecA) -> SpecB {
    SpecB {
        lambda1sq: spec.lambda2,
        lambda2sq: spec.nu2sq - spec.nu1sq,
        nusq: spec.nu1sq,
    }
}

/// Variance `d` of the random intercept and its covariance `τ` with each error.
///
/// With `ν = √ν²` and `s = √(λ²+ν²)`:
/// `d = λ² + 2ν² + 2ναs` and `τ = −(ν² + ναs)`. They are evaluated as
/// `d = (s+αν)² + ν²(1−α²)` and `τ = −ν(ν+αs)`, which are the same
/// polynomials but keep `d ≥ 0` exact in floating point.
pub fn derive_d_tau(lambda2: f64, nu2: f64, alpha: f64) -> Result<(f64, f64)> {
    if !(nu2 > 0.0) || !nu2.is_finite() {
        return Err(Error::Domain(format!("nu2 must be positive, got {nu2}")));
    }
    if !(lambda2 + nu2 > 0.0) || !lambda2.is_finite() {
        return Err(Error::Domain(format!(
            "lambda2 + nu2 must be positive, got {}",
            lambda2 + nu2
        )));
    }
    if !(-1.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!(
            "alpha = {alpha} lies outside the box [-1, 1]"
        )));
    }
    let nu = nu2.sqrt();
    let s = (lambda2 + nu2).sqrt();
    let d = (s + alpha * nu).powi(2) + nu2 * (1.0 - alpha * alpha);
    let tau = -nu * (nu + alpha * s);
    Ok((d, tau))
}

/// Member `α` of the correlated random-intercept family with marginal
/// `λ²J + ν²I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedSpec {
    lambda2: f64,
    nu2: f64,
    alpha: f64,
    d: f64,
    tau: f64,
}

impl ExtendedSpec {
    pub fn new(lambda2: f64, nu2: f64, alpha: f64) -> Result<Self> {
        let (d, tau) = derive_d_tau(lambda2, nu2, alpha)?;
        Ok(Self {
            lambda2,
            nu2,
            alpha,
            d,
            tau,
        })
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }
    pub fn nu2(&self) -> f64 {
        self.nu2
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    /// Random-intercept variance.
    pub fn d(&self) -> f64 {
        self.d
    }
    /// Covariance between the random intercept and each error.
    pub fn tau(&self) -> f64 {
        self.tau
    }
    /// Error variance `σ² = ν²`.
    pub fn sigma2(&self) -> f64 {
        self.nu2
    }
    /// `√(λ²+ν²)`.
    pub fn s(&self) -> f64 {
        (self.lambda2 + self.nu2).sqrt()
    }

    /// The member with `τ = 0` (the conventional random-intercepts model).
    /// Exists only for `λ² ≥ 0`.
    pub fn conventional_alpha(lambda2: f64, nu2: f64) -> Option<f64> {
        (lambda2 >= 0.0 && nu2 > 0.0).then(|| -(nu2.sqrt()) / (lambda2 + nu2).sqrt())
    }

    /// Smallest eigenvalue of the `(n+1)`-dimensional joint covariance of
    /// `(b, ε₁..εₙ)`.
    ///
    /// The arrowhead structure gives eigenvalues `σ²` (multiplicity `n−1`)
    /// and the two roots of `[[d, τ√n], [τ√n, σ²]]`.
    pub fn joint_min_eigenvalue(&self, n: usize) -> f64 {
        let (d, s2) = (self.d, self.nu2);
        let nt2 = n as f64 * self.tau * self.tau;
        let disc = ((d - s2).powi(2) + 4.0 * nt2).sqrt();
        let det = d * s2 - nt2;
        // smaller root written as det / larger root to avoid cancellation
        let small = if d + s2 + disc > 0.0 {
            2.0 * det / (d + s2 + disc)
        } else {
            0.0
        };
        if n >= 2 {
            small.min(s2)
        } else {
            small
        }
    }

    /// Whether the joint law of `(b, ε)` exists for clusters of size `n`,
    /// i.e. `nτ² ≤ dσ²` (up to rounding).
    pub fn joint_is_psd(&self, n: usize) -> bool {
        let scale = self.d.max(self.nu2).max(1.0);
        self.joint_min_eigenvalue(n) >= -1e-12 * scale
    }
}

/// Which row of the variance decomposition table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    Variance,
    Covariance,
}

/// One row of the decomposition `σ²-part + d + 2τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompRow {
    pub quantity: Quantity,
    pub sigma2_part: f64,
    pub d_part: f64,
    pub two_tau_part: f64,
}

impl DecompRow {
    pub fn total(&self) -> f64 {
        self.sigma2_part + self.d_part + self.two_tau_part
    }
}

/// Variance and covariance rows of the decomposition for member `α`.
pub fn decomposition_table(lambda2: f64, nu2: f64, alpha: f64) -> Result<(DecompRow, DecompRow)> {
    let (d, tau) = derive_d_tau(lambda2, nu2, alpha)?;
    Ok((
        DecompRow {
            quantity: Quantity::Variance,
            sigma2_part: nu2,
            d_part: d,
            two_tau_part: 2.0 * tau,
        },
        DecompRow {
            quantity: Quantity::Covariance,
            sigma2_part: 0.0,
            d_part: d,
            two_tau_part: 2.0 * tau,
        },
    ))
}

/// Joint covariance of `(b, ε₁, …, εₙ)`.
pub fn joint_cov(spec: &ExtendedSpec, n: usize) -> SymMatrix {
    SymMatrix::from_fn(n + 1, |i, j| match (i, j) {
        (0, 0) => spec.d,
        (_, 0) => spec.tau,
        (i, j) if i == j => spec.nu2,
        _ => 0.0,
    })
}

/// Law of the error vector given the random intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalErrorDist {
    pub mean: Vec<f64>,
    pub cov: SymMatrix,
}

/// `ε | b ~ N((τb/d)·1, σ²I − (τ²/d)J)`.
///
/// The covariance is only positive semidefinite when `nτ² ≤ dσ²`; see
/// [`ExtendedSpec::joint_is_psd`].
pub fn conditional_error_dist(
    spec: &ExtendedSpec,
    b: f64,
    n: usize,
) -> Result<ConditionalErrorDist> {
    if spec.d <= 0.0 {
        return Err(Error::DegenerateConditioning);
    }
    let shift = spec.tau * b / spec.d;
    let k = spec.tau * spec.tau / spec.d;
    let cov = SymMatrix::from_fn(n, |i, j| if i == j { spec.nu2 - k } else { -k });
    Ok(ConditionalErrorDist {
        mean: vec![shift; n],
        cov,
    })
}

/// `(d+2τ)J + σ²I`.
pub fn marginal_cov_extended(spec: &ExtendedSpec, n: usize) -> SymMatrix {
    let between = spec.d + 2.0 * spec.tau;
    SymMatrix::from_fn(n, |i, j| if i == j { between + spec.nu2 } else { between })
}

/// Coefficient `c(α)` with `E(bᵢ | Yᵢ) = c(α)·(ȳᵢ − x̄ᵢ'ξ)`.
///
/// `Cov(b, Yⱼ) = d + τ`, and `1'V⁻¹ = 1'/(σ² + nλ²)`, so
/// `c = n(d+τ)/(σ² + n(d+2τ))`.
pub fn eb_shrinkage(spec: &ExtendedSpec, n: usize) -> Result<f64> {
    validate_cs(&[n], spec.lambda2, spec.nu2)
        .into_result()
        .map_err(|_| Error::NotPositiveDefinite {
            cluster_size: n,
            value: spec.nu2 + n as f64 * spec.lambda2,
        })?;
    let nf = n as f64;
    Ok(nf * (spec.d + spec.tau) / (spec.nu2 + nf * (spec.d + 2.0 * spec.tau)))
}

/// Empirical Bayes prediction of each cluster's random intercept for one
/// member of the family, given mean residuals `r̄ᵢ` and cluster sizes.
pub fn eb_predictions(spec: &ExtendedSpec, clusters: &[(usize, f64)]) -> Result<Vec<f64>> {
    clusters
        .iter()
        .map(|&(n, rbar)| Ok(eb_shrinkage(spec, n)? * rbar))
        .collect()
}

/// `dσ² − τ²`.
pub fn psd_slack(spec: &ExtendedSpec) -> f64 {
    spec.d * spec.nu2 - spec.tau * spec.tau
}

/// Sanity check that the member reproduces `cs_covariance` for size `n`.
pub fn marginal_gap(spec: &ExtendedSpec, n: usize) -> f64 {
    marginal_cov_extended(spec, n).max_abs_diff(&cs_covariance(n, spec.lambda2, spec.nu2))
}
