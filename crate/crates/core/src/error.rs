use thiserror::Error;

/// Errors raised by the model, estimation and heavy-tail routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("covariance not positive definite: phi + n*lambda = {value} <= 0 for cluster size {cluster_size}")]
    NotPositiveDefinite { cluster_size: usize, value: f64 },

    #[error("normal equations are rank deficient")]
    RankDeficient,

    #[error("lambda is not identified: every cluster has a single observation")]
    Unidentified,

    #[error("estimate on the boundary of the parameter space: {0}")]
    Boundary(String),

    #[error("unsupported layout: {0}")]
    UnsupportedLayout(String),

    #[error("joint covariance of (b, eps) is not positive semidefinite for cluster size {cluster_size}: smallest eigenvalue {eigenvalue:.6e}")]
    JointNotPsd {
        cluster_size: usize,
        eigenvalue: f64,
    },

    #[error("degenerate conditioning: random-intercept variance d is zero")]
    DegenerateConditioning,

    #[error(
        "quadrature did not converge: estimated error {achieved:.3e} > tolerance {requested:.3e}"
    )]
    Quadrature { achieved: f64, requested: f64 },

    #[error("non-finite quantile value at u = {u}")]
    NonFiniteQuantile { u: f64 },

    #[error("csv line {line}: {message}")]
    Csv { line: u64, message: String },

    #[error("matrix dimension {0} exceeds the cap of {cap}", cap = crate::linalg::MAX_DIM)]
    DimensionCap(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
