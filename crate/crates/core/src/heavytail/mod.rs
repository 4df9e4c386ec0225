//! Weibull-gamma hierarchies and the heavy-tailed Weibull-exponential family.

mod pit;
pub mod quadrature;
mod weibull_exp;
mod weibull_gamma;

pub use pit::{
    ks_coefficient, ks_critical, ks_critical_two_sample, ks_statistic, ks_two_sample, pit_sample,
};
pub use weibull_exp::{
    running_mean_trace, tail_moment, truncated_moment, we_moment, we_moment_formula,
    wg_moment_defined, MomentResult, WeibullExpSpec, MOMENT_TOL,
};
pub use weibull_gamma::{wg_sample, ConstraintMode, WeibullGammaSpec};
