//! Stochastic extensible bin packing (SEBP): `n` stochastic jobs packed into
//! `m` unit-capacity machines that can be extended at linear overtime cost,
//! minimizing `E[Σ_i max(X_i, 1)]`.
//!
//! The crate provides
//! - processing-time [`distributions`] with moments, tail expectations,
//!   Lorenz/Pietra/Gini functionals, and dominance checks,
//! - the [`instances`] model plus generators for worst-case families,
//! - fixed and adaptive [`policies`] (LEPT variants, exact optima),
//! - exact and Monte Carlo cost [`evaluation`],
//! - closed-form and numeric [`bounds`], including the per-family
//!   approximation-guarantee table.

pub mod bounds;
pub mod distributions;
pub mod evaluation;
pub mod instances;
pub mod policies;
pub mod error;
pub mod numeric;

pub use error::{Error, Result};

#[cfg(test)]
pub(crate) mod testutil {
    use crate::distributions::Distribution;
    use crate::instances::Instance;

    pub fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "expected {b}, got {a} (tol {tol})");
    }

    /// Two machines; jobs {0.4, 1.2}@1/2, {0.5, 0.7}@1/2, and a 0.4 point mass.
    pub fn figure_instance() -> Instance {
        Instance::new(
            2,
            vec![
                Distribution::finite(vec![(0.4, 0.5), (1.2, 0.5)]).unwrap(),
                Distribution::finite(vec![(0.5, 0.5), (0.7, 0.5)]).unwrap(),
                Distribution::deterministic(0.4).unwrap(),
            ],
        )
        .unwrap()
    }
}
