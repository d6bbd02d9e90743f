//! Processing-time distribution models.
//!
//! A [`Distribution`] is a nonnegative law for one job's duration. It exposes
//! moments, CDF/quantile evaluation, the tail expectation `E[(D − a)⁺]`, the
//! extension cost `g(x) = E[max(x·D, 1)]`, Lorenz/Pietra/Gini functionals,
//! second-order dominance checks, and seeded sampling.
//!
//! Tail expectations are closed-form for every supported kind: direct sums for
//! the finite kinds, elementary piecewise forms for uniform/triangular, and
//! partial-expectation identities (normal CDF, regularized incomplete gamma)
//! for lognormal/gamma/weibull. The adaptive quadrature in [`crate::numeric`]
//! serves as an independent cross-check in the test suites.

mod dominance;
mod family;
mod lorenz;

pub use dominance::{dominates_so, Dominance, DEFAULT_GRID as DEFAULT_DOMINANCE_GRID};
pub use family::{triangular_max_delta, weibull_shape_for_scv, Family, FamilySpec};

use rand::Rng;
use rand_distr::Distribution as RandDistribution;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma as StatGamma, Normal};
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{Error, Result};

/// Values closer than this are merged when building finite supports.
pub const MERGE_EPS: f64 = 1e-12;

/// Finite-discrete probabilities must sum to 1 within this tolerance.
pub const PROB_SUM_EPS: f64 = 1e-12;

/// A nonnegative processing-time law.
///
/// Construct through the checked constructors ([`Distribution::finite`],
/// [`Distribution::scaled_bernoulli`], ...); values deserialized from JSON
/// should be passed through [`Distribution::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Distribution {
    /// Point masses `[(value, probability), ...]`, sorted by value.
    #[serde(rename = "finite")]
    Finite { points: Vec<(f64, f64)> },
    /// Single point mass.
    Deterministic { value: f64 },
    /// Takes value `x` with probability `p`, else 0.
    ScaledBernoulli { x: f64, p: f64 },
    /// `exp(mu + sigma·N(0,1))`.
    Lognormal { mu: f64, sigma: f64 },
    /// Shape/scale parameterization; mean `shape·scale`.
    Gamma { shape: f64, scale: f64 },
    /// Shape `k`, scale `lambda`; mean `lambda·Γ(1+1/k)`.
    Weibull { shape: f64, scale: f64 },
    /// Uniform on `[a, b]`.
    Uniform { a: f64, b: f64 },
    /// Triangular on `[a, b]` with mode `c`.
    Triangular { a: f64, b: f64, c: f64 },
}

use Distribution::*;

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg()))
    }
}

impl Distribution {
    /// Builds a finite-discrete law. Points are sorted ascending and values
    /// closer than [`MERGE_EPS`] are merged with their probabilities summed.
    pub fn finite(points: Vec<(f64, f64)>) -> Result<Self> {
        require(!points.is_empty(), || "finite support must be nonempty".into())?;
        for &(v, p) in &points {
            require(v.is_finite() && v >= 0.0, || format!("support value {v} outside [0, inf)"))?;
            require(p.is_finite() && p >= 0.0, || format!("negative probability {p}"))?;
        }
        let total: f64 = points.iter().map(|&(_, p)| p).sum();
        require((total - 1.0).abs() <= PROB_SUM_EPS, || {
            format!("probabilities sum to {total}, expected 1")
        })?;
        let mut pts = points;
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
        for (v, p) in pts {
            match merged.last_mut() {
                Some(last) if v - last.0 <= MERGE_EPS => {
                    // probability-weighted value keeps the mean unchanged
                    let w = last.1 + p;
                    if w > 0.0 {
                        last.0 = (last.0 * last.1 + v * p) / w;
                    }
                    last.1 = w;
                }
                _ => merged.push((v, p)),
            }
        }
        merged.retain(|&(_, p)| p > 0.0);
        require(!merged.is_empty(), || "all probabilities are zero".into())?;
        Ok(Finite { points: merged })
    }

    pub fn deterministic(value: f64) -> Result<Self> {
        require(value.is_finite() && value >= 0.0, || {
            format!("deterministic value {value} outside [0, inf)")
        })?;
        Ok(Deterministic { value })
    }

    pub fn scaled_bernoulli(x: f64, p: f64) -> Result<Self> {
        require(x.is_finite() && x > 0.0, || format!("scaled-bernoulli x = {x} must be > 0"))?;
        require(p.is_finite() && (0.0..=1.0).contains(&p), || {
            format!("scaled-bernoulli p = {p} outside [0, 1]")
        })?;
        Ok(ScaledBernoulli { x, p })
    }

    pub fn lognormal(mu: f64, sigma: f64) -> Result<Self> {
        require(mu.is_finite(), || format!("lognormal mu = {mu} not finite"))?;
        require(sigma.is_finite() && sigma > 0.0, || {
            format!("lognormal sigma = {sigma} must be > 0 (use deterministic for sigma = 0)")
        })?;
        Ok(Lognormal { mu, sigma })
    }

    pub fn gamma(shape: f64, scale: f64) -> Result<Self> {
        require(shape.is_finite() && shape > 0.0, || format!("gamma shape = {shape} must be > 0"))?;
        require(scale.is_finite() && scale > 0.0, || format!("gamma scale = {scale} must be > 0"))?;
        Ok(Gamma { shape, scale })
    }

    pub fn weibull(shape: f64, scale: f64) -> Result<Self> {
        require(shape.is_finite() && shape > 0.0, || {
            format!("weibull shape = {shape} must be > 0")
        })?;
        require(scale.is_finite() && scale > 0.0, || {
            format!("weibull scale = {scale} must be > 0")
        })?;
        Ok(Weibull { shape, scale })
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        require(a.is_finite() && b.is_finite() && a >= 0.0, || {
            format!("uniform bounds [{a}, {b}] outside [0, inf)")
        })?;
        require(a < b, || format!("uniform needs a < b, got [{a}, {b}]"))?;
        Ok(Uniform { a, b })
    }

    pub fn triangular(a: f64, b: f64, c: f64) -> Result<Self> {
        require(a.is_finite() && b.is_finite() && c.is_finite() && a >= 0.0, || {
            format!("triangular parameters ({a}, {b}, {c}) outside [0, inf)")
        })?;
        require(a < b && a <= c && c <= b, || {
            format!("triangular needs a <= c <= b and a < b, got a={a}, b={b}, c={c}")
        })?;
        Ok(Triangular { a, b, c })
    }

    /// Re-checks the constructor invariants, for values built by deserialization.
    pub fn validate(&self) -> Result<()> {
        match self.clone() {
            Finite { points } => Self::finite(points).map(|_| ()),
            Deterministic { value } => Self::deterministic(value).map(|_| ()),
            ScaledBernoulli { x, p } => Self::scaled_bernoulli(x, p).map(|_| ()),
            Lognormal { mu, sigma } => Self::lognormal(mu, sigma).map(|_| ()),
            Gamma { shape, scale } => Self::gamma(shape, scale).map(|_| ()),
            Weibull { shape, scale } => Self::weibull(shape, scale).map(|_| ()),
            Uniform { a, b } => Self::uniform(a, b).map(|_| ()),
            Triangular { a, b, c } => Self::triangular(a, b, c).map(|_| ()),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Finite { .. } => "finite",
            Deterministic { .. } => "deterministic",
            ScaledBernoulli { .. } => "scaled-bernoulli",
            Lognormal { .. } => "lognormal",
            Gamma { .. } => "gamma",
            Weibull { .. } => "weibull",
            Uniform { .. } => "uniform",
            Triangular { .. } => "triangular",
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Finite { points } => points.iter().map(|&(v, p)| v * p).sum(),
            Deterministic { value } => *value,
            ScaledBernoulli { x, p } => x * p,
            Lognormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
            Gamma { shape, scale } => shape * scale,
            Weibull { shape, scale } => scale * ln_gamma(1.0 + 1.0 / shape).exp(),
            Uniform { a, b } => 0.5 * (a + b),
            Triangular { a, b, c } => (a + b + c) / 3.0,
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Finite { points } => {
                let m = self.mean();
                points.iter().map(|&(v, p)| p * (v - m) * (v - m)).sum()
            }
            Deterministic { .. } => 0.0,
            ScaledBernoulli { x, p } => x * x * p * (1.0 - p),
            Lognormal { mu, sigma } => {
                let s2 = sigma * sigma;
                (s2.exp() - 1.0) * (2.0 * mu + s2).exp()
            }
            Gamma { shape, scale } => shape * scale * scale,
            Weibull { shape, scale } => {
                let g1 = ln_gamma(1.0 + 1.0 / shape).exp();
                let g2 = ln_gamma(1.0 + 2.0 / shape).exp();
                scale * scale * (g2 - g1 * g1)
            }
            Uniform { a, b } => (b - a) * (b - a) / 12.0,
            Triangular { a, b, c } => (a * a + b * b + c * c - a * b - a * c - b * c) / 18.0,
        }
    }

    /// Squared coefficient of variation `variance / mean²`.
    pub fn squared_cv(&self) -> Result<f64> {
        let m = self.mean();
        require(m > 0.0, || format!("squared_cv needs mean > 0, got {m}"))?;
        Ok(self.variance() / (m * m))
    }

    /// Right-continuous CDF `P(D <= t)`.
    pub fn cdf(&self, t: f64) -> f64 {
        match self {
            Finite { points } => {
                points.iter().take_while(|&&(v, _)| v <= t).map(|&(_, p)| p).sum()
            }
            Deterministic { value } => {
                if t >= *value {
                    1.0
                } else {
                    0.0
                }
            }
            ScaledBernoulli { x, p } => {
                if t < 0.0 {
                    0.0
                } else if t < *x {
                    1.0 - p
                } else {
                    1.0
                }
            }
            Lognormal { mu, sigma } => {
                if t <= 0.0 {
                    0.0
                } else {
                    std_normal().cdf((t.ln() - mu) / sigma)
                }
            }
            Gamma { shape, scale } => {
                if t <= 0.0 {
                    0.0
                } else {
                    1.0 - gamma_ur(*shape, t / scale)
                }
            }
            Weibull { shape, scale } => {
                if t <= 0.0 {
                    0.0
                } else {
                    -(-(t / scale).powf(*shape)).exp_m1()
                }
            }
            Uniform { a, b } => ((t - a) / (b - a)).clamp(0.0, 1.0),
            Triangular { a, b, c } => {
                if t <= *a {
                    0.0
                } else if t >= *b {
                    1.0
                } else if t < *c {
                    (t - a) * (t - a) / ((b - a) * (c - a))
                } else {
                    1.0 - (b - t) * (b - t) / ((b - a) * (b - c))
                }
            }
        }
    }

    /// Generalized inverse CDF `inf { y : F(y) >= u }`, clamped to the support.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self {
            Finite { points } => {
                let mut cum = 0.0;
                for &(v, p) in points {
                    cum += p;
                    if cum >= u - 1e-15 {
                        return v;
                    }
                }
                points.last().unwrap().0
            }
            Deterministic { value } => *value,
            ScaledBernoulli { x, p } => {
                if u <= 1.0 - p {
                    0.0
                } else {
                    *x
                }
            }
            Lognormal { mu, sigma } => {
                if u <= 0.0 {
                    0.0
                } else if u >= 1.0 {
                    f64::INFINITY
                } else {
                    (mu + sigma * std_normal().inverse_cdf(u)).exp()
                }
            }
            Gamma { shape, scale } => {
                if u <= 0.0 {
                    0.0
                } else if u >= 1.0 {
                    f64::INFINITY
                } else {
                    StatGamma::new(*shape, 1.0 / scale).unwrap().inverse_cdf(u)
                }
            }
            Weibull { shape, scale } => {
                if u >= 1.0 {
                    f64::INFINITY
                } else {
                    scale * (-(-u).ln_1p()).powf(1.0 / shape)
                }
            }
            Uniform { a, b } => a + (b - a) * u,
            Triangular { a, b, c } => {
                let fc = (c - a) / (b - a);
                if u <= fc {
                    a + ((b - a) * (c - a) * u).sqrt()
                } else {
                    b - ((b - a) * (b - c) * (1.0 - u)).sqrt()
                }
            }
        }
    }

    /// Tail expectation `E[(D − a)⁺]`, closed-form for every kind.
    pub fn tail_expectation(&self, a: f64) -> f64 {
        if a <= self.lower_bound() {
            return self.mean() - a;
        }
        if let Some(ub) = self.upper_bound() {
            if a >= ub {
                return 0.0;
            }
        }
        match self {
            Finite { points } => points.iter().map(|&(v, p)| p * (v - a).max(0.0)).sum(),
            Deterministic { value } => (value - a).max(0.0),
            ScaledBernoulli { x, p } => p * (x - a).max(0.0),
            Lognormal { mu, sigma } => {
                let n = std_normal();
                let la = a.ln();
                let m = (mu + 0.5 * sigma * sigma).exp();
                m * n.cdf((mu + sigma * sigma - la) / sigma) - a * n.cdf((mu - la) / sigma)
            }
            Gamma { shape, scale } => {
                let z = a / scale;
                shape * scale * gamma_ur(shape + 1.0, z) - a * gamma_ur(*shape, z)
            }
            Weibull { shape, scale } => {
                let z = (a / scale).powf(*shape);
                let m = scale * ln_gamma(1.0 + 1.0 / shape).exp();
                m * gamma_ur(1.0 + 1.0 / shape, z) - a * (-z).exp()
            }
            Uniform { a: lo, b: hi } => (hi - a) * (hi - a) / (2.0 * (hi - lo)),
            Triangular { a: lo, b: hi, c: mode } => {
                if a >= *mode {
                    (hi - a).powi(3) / (3.0 * (hi - lo) * (hi - mode))
                } else {
                    // a in (lo, mode): survival integral over [a, mode] plus the upper piece
                    let upper = (hi - mode) * (hi - mode) / (3.0 * (hi - lo));
                    (mode - a)
                        - ((mode - lo).powi(3) - (a - lo).powi(3)) / (3.0 * (hi - lo) * (mode - lo))
                        + upper
                }
            }
        }
    }

    /// Extension cost `g(x) = E[max(x·D, 1)] = 1 + x·E[(D − 1/x)⁺]`, with `g(0) = 1`.
    pub fn extension_cost(&self, x: f64) -> f64 {
        assert!(x >= 0.0, "extension_cost needs x >= 0, got {x}");
        if x == 0.0 {
            return 1.0;
        }
        1.0 + x * self.tail_expectation(1.0 / x)
    }

    /// Greatest lower bound of the support.
    pub fn lower_bound(&self) -> f64 {
        match self {
            Finite { points } => points[0].0,
            Deterministic { value } => *value,
            ScaledBernoulli { x, p } => {
                if *p >= 1.0 {
                    *x
                } else {
                    0.0
                }
            }
            Uniform { a, .. } | Triangular { a, .. } => *a,
            Lognormal { .. } | Gamma { .. } | Weibull { .. } => 0.0,
        }
    }

    /// Least upper bound of the support; `None` when unbounded.
    pub fn upper_bound(&self) -> Option<f64> {
        match self {
            Finite { points } => Some(points.last().unwrap().0),
            Deterministic { value } => Some(*value),
            ScaledBernoulli { x, p } => Some(if *p > 0.0 { *x } else { 0.0 }),
            Uniform { b, .. } | Triangular { b, .. } => Some(*b),
            Lognormal { .. } | Gamma { .. } | Weibull { .. } => None,
        }
    }

    /// True when the duration is in `[0, 1]` almost surely.
    pub fn is_short(&self) -> bool {
        self.upper_bound().is_some_and(|ub| ub <= 1.0)
    }

    /// The point-mass representation, when the support is finite.
    pub fn as_finite(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            Finite { points } => Some(points.clone()),
            Deterministic { value } => Some(vec![(*value, 1.0)]),
            ScaledBernoulli { x, p } => {
                if *p >= 1.0 {
                    Some(vec![(*x, 1.0)])
                } else if *p <= 0.0 {
                    Some(vec![(0.0, 1.0)])
                } else {
                    Some(vec![(0.0, 1.0 - p), (*x, *p)])
                }
            }
            _ => None,
        }
    }

    /// The law of `c·D` for `c > 0`.
    pub fn scaled_by(&self, c: f64) -> Result<Self> {
        require(c.is_finite() && c > 0.0, || format!("scale factor {c} must be > 0"))?;
        Ok(match self {
            Finite { points } => Finite {
                points: points.iter().map(|&(v, p)| (v * c, p)).collect(),
            },
            Deterministic { value } => Deterministic { value: value * c },
            ScaledBernoulli { x, p } => ScaledBernoulli { x: x * c, p: *p },
            Lognormal { mu, sigma } => Lognormal { mu: mu + c.ln(), sigma: *sigma },
            Gamma { shape, scale } => Gamma { shape: *shape, scale: scale * c },
            Weibull { shape, scale } => Weibull { shape: *shape, scale: scale * c },
            Uniform { a, b } => Uniform { a: a * c, b: b * c },
            Triangular { a, b, c: mode } => Triangular { a: a * c, b: b * c, c: mode * c },
        })
    }

    /// Draws one value. Inverse-CDF for the bounded kinds, standard transforms
    /// (via `rand_distr`) for lognormal/gamma/weibull. A fixed stream yields a
    /// fixed draw sequence.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Finite { points } => {
                let u: f64 = rng.gen();
                let mut cum = 0.0;
                for &(v, p) in points {
                    cum += p;
                    if u < cum {
                        return v;
                    }
                }
                points.last().unwrap().0
            }
            Deterministic { value } => *value,
            ScaledBernoulli { x, p } => {
                let u: f64 = rng.gen();
                if u < *p {
                    *x
                } else {
                    0.0
                }
            }
            Lognormal { mu, sigma } => {
                rand_distr::LogNormal::new(*mu, *sigma).unwrap().sample(rng)
            }
            Gamma { shape, scale } => rand_distr::Gamma::new(*shape, *scale).unwrap().sample(rng),
            // rand_distr's Weibull takes (scale, shape)
            Weibull { shape, scale } => {
                rand_distr::Weibull::new(*scale, *shape).unwrap().sample(rng)
            }
            Uniform { a, b } => {
                let u: f64 = rng.gen();
                a + (b - a) * u
            }
            Triangular { .. } => {
                let u: f64 = rng.gen();
                self.quantile(u)
            }
        }
    }

    /// Lorenz curve `L(p) = (1/μ)∫₀ᵖ F⁻¹(z) dz`.
    pub fn lorenz(&self, p: f64) -> f64 {
        lorenz::lorenz(self, p)
    }

    /// Pietra index `E|D − μ| / (2μ)`.
    pub fn pietra_index(&self) -> f64 {
        lorenz::pietra_index(self)
    }

    /// Gini index: twice the area between the diagonal and the Lorenz curve.
    pub fn gini_index(&self) -> f64 {
        lorenz::gini_index(self)
    }
}

pub(crate) fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).unwrap()
}
