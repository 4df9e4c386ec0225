//! Log-gamma with sign tracking and pole detection.

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

/// Distance below which an argument counts as a pole of Gamma.
pub const POLE_TOL: f64 = 1e-9;

/// True when `x` lies within [`POLE_TOL`] of a non-positive integer.
pub fn is_gamma_pole(x: f64) -> bool {
    let r = x.round();
    r <= 0.0 && (x - r).abs() <= POLE_TOL
}

/// `ln|Γ(x)|` and the sign of `Γ(x)`, or `None` at a pole.
pub fn ln_gamma_signed(x: f64) -> Option<(f64, f64)> {
    if !x.is_finite() || is_gamma_pole(x) {
        return None;
    }
    if x < 0.5 {
        // Γ(x)Γ(1−x) = π / sin(πx)
        let s = (PI * x).sin();
        let (lg, sg) = ln_gamma_signed(1.0 - x)?;
        let sign = if s < 0.0 { -sg } else { sg };
        return Some((PI.ln() - s.abs().ln() - lg, sign));
    }
    Some((ln_gamma(x), 1.0))
}

/// `Γ(x)`, or `None` at a pole.
pub fn gamma(x: f64) -> Option<f64> {
    ln_gamma_signed(x).map(|(lg, s)| s * lg.exp())
}
