//! Compound-symmetry marginal models, the hierarchies that induce them, and the
//! Weibull-exponential family with its partially undefined moments.
//!
//! * [`model`]: clustered data and `λJ + φI` algebra.
//! * [`equivalence`]: hierarchies sharing one marginal, and empirical Bayes
//!   shrinkage across them.
//! * [`estimation`]: maximum likelihood with sign-unrestricted `λ` and seeded
//!   simulation.
//! * [`heavytail`]: Weibull-gamma and Weibull-exponential distributions,
//!   moments, quadrature and samplers.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod equivalence;
pub mod error;
pub mod estimation;
pub mod heavytail;
pub mod io;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod special;

pub use error::{Error, Result};
pub use linalg::SymMatrix;
pub use model::{CSParams, ClusterData, Dataset};
pub use nalgebra;
pub use rng::Seed;
