//! Lorenz curve and the dispersion indices derived from it.

use super::Distribution;
use crate::numeric::integrate;

/// `L(p) = (1/μ)∫₀ᵖ F⁻¹(z) dz`. Piecewise linear closed form for finite
/// supports; for the continuous kinds the quantile integral is rewritten as
/// `μ − E[(D − q)⁺] − q(1 − p)` with `q = F⁻¹(p)`, which is closed-form and
/// first-order insensitive to quantile error.
pub fn lorenz(d: &Distribution, p: f64) -> f64 {
    let mean = d.mean();
    assert!(mean > 0.0, "lorenz needs mean > 0");
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    if let Some(points) = d.as_finite() {
        let mut cum_prob = 0.0;
        let mut cum_value = 0.0;
        for &(v, q) in &points {
            if cum_prob + q >= p {
                return (cum_value + v * (p - cum_prob)) / mean;
            }
            cum_prob += q;
            cum_value += v * q;
        }
        return 1.0;
    }
    let q = d.quantile(p);
    ((mean - d.tail_expectation(q) - q * (1.0 - p)) / mean).clamp(0.0, 1.0)
}

/// `P = E|D − μ| / (2μ)`; since `E(D − μ) = 0` this equals `E[(D − μ)⁺] / μ`.
pub fn pietra_index(d: &Distribution) -> f64 {
    let mean = d.mean();
    assert!(mean > 0.0, "pietra_index needs mean > 0");
    d.tail_expectation(mean) / mean
}

/// `G = 2∫₀¹ (p − L(p)) dp`, by adaptive quadrature on the Lorenz curve.
pub fn gini_index(d: &Distribution) -> f64 {
    let area = integrate(|p| lorenz(d, p), 0.0, 1.0, 1e-10)
        .expect("Lorenz curve is bounded and piecewise smooth");
    (1.0 - 2.0 * area).clamp(0.0, 1.0)
}
