//! Clustered data and compound-symmetry covariance algebra.
//!
//! The marginal covariance of a cluster of size `n` is `V = λJ + φI`. Its
//! eigenvalues are `φ` (multiplicity `n−1`) and `φ + nλ`, and its inverse is
//! `φ⁻¹I − λ/(φ(φ+nλ)) J`, so nothing here needs a general factorization.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use crate::linalg::SymMatrix;
use crate::{Error, Result};

/// Observations of one cluster with their design rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterData {
    pub id: String,
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
}

impl ClusterData {
    pub fn new(id: impl Into<String>, y: DVector<f64>, x: DMatrix<f64>) -> Result<Self> {
        let id = id.into();
        if y.is_empty() {
            return Err(Error::Validation(format!(
                "cluster {id:?} has no observations"
            )));
        }
        if x.nrows() != y.len() {
            return Err(Error::Validation(format!(
                "cluster {id:?}: design has {} rows but y has {} entries",
                x.nrows(),
                y.len()
            )));
        }
        Ok(Self { id, y, x })
    }

    /// Intercept-only cluster.
    pub fn intercept_only(id: impl Into<String>, y: Vec<f64>) -> Self {
        let n = y.len();
        Self::new(id, DVector::from_vec(y), DMatrix::from_element(n, 1, 1.0))
            .expect("intercept-only cluster needs at least one observation")
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.y.mean()
    }
}

/// Ordered collection of clusters sharing one design width.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    clusters: Vec<ClusterData>,
    covariate_names: Vec<String>,
}

impl Dataset {
    pub fn new(clusters: Vec<ClusterData>, covariate_names: Vec<String>) -> Result<Self> {
        if clusters.is_empty() {
            return Err(Error::Validation("dataset has no clusters".into()));
        }
        let p = covariate_names.len();
        if p == 0 {
            return Err(Error::Validation(
                "dataset needs at least one covariate column".into(),
            ));
        }
        for c in &clusters {
            if c.x.ncols() != p {
                return Err(Error::Validation(format!(
                    "cluster {:?} has {} covariates, expected {p}",
                    c.id,
                    c.x.ncols()
                )));
            }
        }
        Ok(Self {
            clusters,
            covariate_names,
        })
    }

    /// Intercept-only dataset; clusters are named by their index.
    pub fn intercept_only(groups: Vec<Vec<f64>>) -> Result<Self> {
        let clusters = groups
            .into_iter()
            .enumerate()
            .map(|(i, y)| {
                let n = y.len();
                ClusterData::new(
                    i.to_string(),
                    DVector::from_vec(y),
                    DMatrix::from_element(n, 1, 1.0),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(clusters, vec!["x1".into()])
    }

    pub fn clusters(&self) -> &[ClusterData] {
        &self.clusters
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    /// Number of regression coefficients.
    pub fn p(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn n_obs(&self) -> usize {
        self.clusters.iter().map(ClusterData::len).sum()
    }

    pub fn cluster_sizes(&self) -> BTreeSet<usize> {
        self.clusters.iter().map(ClusterData::len).collect()
    }

    pub fn max_cluster_size(&self) -> usize {
        self.clusters
            .iter()
            .map(ClusterData::len)
            .max()
            .unwrap_or(0)
    }

    /// Common cluster size if the design is balanced.
    pub fn balanced_size(&self) -> Option<usize> {
        let sizes = self.cluster_sizes();
        (sizes.len() == 1).then(|| *sizes.iter().next().unwrap())
    }

    /// True when the design is a single column of ones.
    pub fn is_intercept_only(&self) -> bool {
        self.p() == 1 && self.clusters.iter().all(|c| c.x.iter().all(|&v| v == 1.0))
    }
}

/// Marginal compound-symmetry parameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CSParams {
    pub xi: Vec<f64>,
    /// Between-cluster component; may be negative.
    pub lambda: f64,
    /// Residual variance.
    pub phi: f64,
}

impl CSParams {
    pub fn new(xi: Vec<f64>, lambda: f64, phi: f64) -> Self {
        Self { xi, lambda, phi }
    }

    pub fn validate_for(&self, sizes: &BTreeSet<usize>) -> Result<()> {
        validate_cs(sizes, self.lambda, self.phi).into_result()
    }
}

/// `λJ_n + φI_n`.
pub fn cs_covariance(n: usize, lambda: f64, phi: f64) -> SymMatrix {
    SymMatrix::from_fn(n, |i, j| if i == j { lambda + phi } else { lambda })
}

/// Outcome of [`validate_cs`].
#[derive(Debug, Clone, PartialEq)]
pub struct CsCheck {
    pub valid: bool,
    /// Cluster size whose eigenvalue `φ + nλ` is non-positive, if any.
    pub violating_size: Option<usize>,
    pub diagnostic: Option<String>,
}

impl CsCheck {
    pub fn into_result(self) -> Result<()> {
        if self.valid {
            return Ok(());
        }
        Err(match self.violating_size {
            Some(n) => Error::NotPositiveDefinite {
                cluster_size: n,
                value: f64::NAN,
            },
            None => Error::Domain(self.diagnostic.unwrap_or_default()),
        })
    }
}

/// Exact positive-definiteness check of `λJ + φI` for each cluster size.
pub fn validate_cs<'a>(
    sizes: impl IntoIterator<Item = &'a usize>,
    lambda: f64,
    phi: f64,
) -> CsCheck {
    if !(phi > 0.0) || !lambda.is_finite() {
        return CsCheck {
            valid: false,
            violating_size: None,
            diagnostic: Some(format!(
                "residual variance phi = {phi} must be positive and lambda finite"
            )),
        };
    }
    for &n in sizes {
        let ev = phi + n as f64 * lambda;
        if !(ev > 0.0) {
            return CsCheck {
                valid: false,
                violating_size: Some(n),
                diagnostic: Some(format!(
                    "phi + n*lambda = {ev} <= 0 for cluster size n = {n}"
                )),
            };
        }
    }
    CsCheck {
        valid: true,
        violating_size: None,
        diagnostic: None,
    }
}

/// Same as [`validate_cs`] but carrying the offending eigenvalue in the error.
pub(crate) fn require_pd(sizes: &BTreeSet<usize>, lambda: f64, phi: f64) -> Result<()> {
    let check = validate_cs(sizes, lambda, phi);
    match check.violating_size {
        Some(n) => Err(Error::NotPositiveDefinite {
            cluster_size: n,
            value: phi + n as f64 * lambda,
        }),
        None => check.into_result(),
    }
}

/// Within-cluster correlation `λ/(λ+φ)`.
pub fn icc(lambda: f64, phi: f64) -> Result<f64> {
    let total = lambda + phi;
    if !(total > 0.0) {
        return Err(Error::Domain(format!(
            "icc needs lambda + phi > 0, got {total}"
        )));
    }
    Ok(lambda / total)
}

/// Coefficient `c` in `V⁻¹ = φ⁻¹(I − cJ)`.
#[inline]
pub(crate) fn cs_inverse_coef(n: usize, lambda: f64, phi: f64) -> f64 {
    lambda / (phi + n as f64 * lambda)
}

/// `log det(λJ_n + φI_n)`.
#[inline]
pub(crate) fn cs_logdet(n: usize, lambda: f64, phi: f64) -> f64 {
    (n as f64 - 1.0) * phi.ln() + (phi + n as f64 * lambda).ln()
}

/// `r' V⁻¹ r` via the rank-one inverse.
#[inline]
pub(crate) fn cs_quad_form(r: &DVector<f64>, lambda: f64, phi: f64) -> f64 {
    let c = cs_inverse_coef(r.len(), lambda, phi);
    let s = r.sum();
    (r.norm_squared() - c * s * s) / phi
}

/// Generalized least squares estimate of the regression coefficients for fixed
/// `(λ, φ)`.
pub fn gls_mean(data: &Dataset, lambda: f64, phi: f64) -> Result<DVector<f64>> {
    require_pd(&data.cluster_sizes(), lambda, phi)?;
    let p = data.p();
    let mut xtvx = DMatrix::<f64>::zeros(p, p);
    let mut xtvy = DVector::<f64>::zeros(p);
    for cl in data.clusters() {
        let c = cs_inverse_coef(cl.len(), lambda, phi);
        let xt1 = cl.x.row_sum().transpose();
        let ysum = cl.y.sum();
        xtvx += (cl.x.tr_mul(&cl.x) - c * &xt1 * xt1.transpose()) / phi;
        xtvy += (cl.x.tr_mul(&cl.y) - c * ysum * &xt1) / phi;
    }
    let chol = xtvx.cholesky().ok_or(Error::RankDeficient)?;
    Ok(chol.solve(&xtvy))
}
