//! Two-parameter distribution families bounded by a squared coefficient of
//! variation, and their unit-mean minimal elements.

use serde::{Deserialize, Serialize};

use super::Distribution;
use crate::error::{Error, Result};
use crate::numeric::bisect;
use statrs::function::gamma::ln_gamma;

/// One of the supported distribution families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    Lognormal,
    Gamma,
    Weibull,
    Uniform,
    ScaledBernoulli,
    /// Triangular laws whose mode sits at fraction `alpha` of the support.
    Triangular { alpha: f64 },
}

impl Family {
    /// Largest admissible squared coefficient of variation, if the family
    /// caps it (uniform and triangular do).
    pub fn max_delta(&self) -> Option<f64> {
        match self {
            Family::Uniform => Some(1.0 / 3.0),
            Family::Triangular { alpha } => Some(triangular_max_delta(*alpha)),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Family::Lognormal => "lognormal".into(),
            Family::Gamma => "gamma".into(),
            Family::Weibull => "weibull".into(),
            Family::Uniform => "uniform".into(),
            Family::ScaledBernoulli => "scaled-bernoulli".into(),
            Family::Triangular { alpha } => {
                let frac = match alpha {
                    a if *a == 0.0 => Some("0"),
                    a if *a == 0.25 => Some("1/4"),
                    a if *a == 0.5 => Some("1/2"),
                    a if *a == 0.75 => Some("3/4"),
                    a if *a == 1.0 => Some("1"),
                    _ => None,
                };
                match frac {
                    Some(s) => format!("triangular-{s}"),
                    None => format!("triangular-{alpha}"),
                }
            }
        }
    }
}

/// Feasibility cap on the squared coefficient of variation of a triangular
/// law with mode fraction `alpha`: `(α² − α + 1) / (2(1 + α)²)`.
pub fn triangular_max_delta(alpha: f64) -> f64 {
    (alpha * alpha - alpha + 1.0) / (2.0 * (1.0 + alpha) * (1.0 + alpha))
}

/// Weibull shape `k` solving `Γ(1+2/k) / Γ(1+1/k)² = delta + 1`, by bisection
/// on `[0.5, 200]`.
pub fn weibull_shape_for_scv(delta: f64) -> Result<f64> {
    let target = (delta + 1.0).ln();
    let r = |k: f64| ln_gamma(1.0 + 2.0 / k) - 2.0 * ln_gamma(1.0 + 1.0 / k) - target;
    bisect(r, 0.5, 200.0, 1e-12).map_err(|_| {
        Error::RootFind(format!("weibull shape for scv {delta} not bracketed by [0.5, 200]"))
    })
}

/// A family together with an upper bound `delta` on the squared coefficient
/// of variation of its members.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    #[serde(flatten)]
    family: Family,
    delta: f64,
}

impl FamilySpec {
    pub fn new(family: Family, delta: f64) -> Result<Self> {
        if !delta.is_finite() || delta < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "squared coefficient of variation bound {delta} must be >= 0"
            )));
        }
        if let Family::Triangular { alpha } = family {
            if !(0.0..=1.0).contains(&alpha) {
                return Err(Error::InvalidParameter(format!(
                    "triangular shape alpha = {alpha} outside [0, 1]"
                )));
            }
        }
        if let Some(cap) = family.max_delta() {
            if delta > cap + 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "{} family cannot reach squared cv {delta} (cap {cap})",
                    family.label()
                )));
            }
        }
        Ok(FamilySpec { family, delta })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// The unit-mean element dominated (at second order) by every normalized
    /// member of the family. `delta = 0` degenerates to a unit point mass for
    /// every family.
    pub fn minimal_element(&self) -> Result<Distribution> {
        minimal_element_at(self.family, self.delta)
    }

    /// A family member with the given mean and squared coefficient of
    /// variation `delta <= self.delta()`: the minimal element at `delta`
    /// scaled by `mean`.
    pub fn member(&self, mean: f64, delta: f64) -> Result<Distribution> {
        if delta > self.delta + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "member scv {delta} exceeds family bound {}",
                self.delta
            )));
        }
        minimal_element_at(self.family, delta)?.scaled_by(mean)
    }
}

fn minimal_element_at(family: Family, delta: f64) -> Result<Distribution> {
    if delta == 0.0 {
        return Distribution::deterministic(1.0);
    }
    match family {
        Family::Lognormal => {
            let s2 = (delta + 1.0).ln();
            Distribution::lognormal(-0.5 * s2, s2.sqrt())
        }
        Family::Gamma => Distribution::gamma(1.0 / delta, delta),
        Family::Weibull => {
            let k = weibull_shape_for_scv(delta)?;
            Distribution::weibull(k, 1.0 / ln_gamma(1.0 + 1.0 / k).exp())
        }
        Family::Uniform => {
            let h = (3.0 * delta).sqrt().min(1.0);
            Distribution::uniform(1.0 - h, 1.0 + h)
        }
        Family::ScaledBernoulli => Distribution::scaled_bernoulli(delta + 1.0, 1.0 / (delta + 1.0)),
        Family::Triangular { alpha } => {
            let gamma = (2.0 * delta / (alpha * alpha - alpha + 1.0)).sqrt();
            Distribution::triangular(
                (1.0 - (1.0 + alpha) * gamma).max(0.0),
                1.0 + (2.0 - alpha) * gamma,
                1.0 + (2.0 * alpha - 1.0) * gamma,
            )
        }
    }
}
