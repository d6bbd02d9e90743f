//! Closed-form constants and guarantee bounds: the Poisson max ratio, the
//! non-splittability and fixed-assignment closed forms with their limits,
//! the per-family guarantee `sup_t (2 − 1/t)·g(t) + (1/t − 1)·g(2t)`, the
//! guarantee table, the Pietra-index bound, and per-instance bound reports.

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::distributions::{Family, FamilySpec};
use crate::error::{Error, Result};
use crate::evaluation::{expected_cost_fixed, expected_cost_mc, CostEstimate, EvalConfig, McPolicy};
use crate::instances::Instance;
use crate::numeric::golden_max;
use crate::policies::lept_f;

/// The fixed-assignment guarantee constant `1 + e⁻¹`.
pub fn lept_guarantee() -> f64 {
    1.0 + (-1.0f64).exp()
}

/// `(1/λ)·E[max(Y, λ)] = 1 + e^{−λ}λ^λ/λ!` for `Y ~ Poisson(λ)`, via
/// log-gamma for stability.
pub fn poisson_max_ratio(lambda: u64) -> f64 {
    assert!(lambda >= 1, "poisson_max_ratio needs lambda >= 1");
    let l = lambda as f64;
    1.0 + (-l + l * l.ln() - ln_gamma(l + 1.0)).exp()
}

/// `E[max(Y, threshold)]` for `Y ~ Binomial(n, p)`, by exact summation of
/// `E[Y] + Σ_{u<threshold} (threshold − u)·pmf(u)` in log space.
fn e_max_binomial(n: u64, p: f64, threshold: u64) -> f64 {
    assert!(threshold <= n);
    assert!((0.0..=1.0).contains(&p));
    if p <= 0.0 {
        return threshold as f64;
    }
    let nf = n as f64;
    let mean = nf * p;
    if p >= 1.0 {
        return nf.max(threshold as f64);
    }
    let lp = p.ln();
    let lq = (-p).ln_1p();
    let mut shortfall = 0.0;
    for u in 0..threshold {
        let uf = u as f64;
        let ln_pmf = ln_gamma(nf + 1.0) - ln_gamma(uf + 1.0) - ln_gamma(nf - uf + 1.0)
            + uf * lp
            + (nf - uf) * lq;
        shortfall += (threshold - u) as f64 * ln_pmf.exp();
    }
    mean + shortfall
}

/// Closed forms for the non-splittability instance with `m` unit-mean jobs
/// `(m/λ)·Bernoulli(λ/m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PonsForms {
    /// Optimal non-anticipatory cost `2m − λ` (one job per machine).
    pub opt_p: f64,
    /// Fractional optimum `(m/λ)·E[max(Binomial(m, λ/m), λ)]`, exact.
    pub opt_r: f64,
    pub ratio: f64,
    /// `2 / (1 + e^{−λ}λ^λ/λ!)`, the `m → ∞` limit of the ratio.
    pub limit_ratio: f64,
}

pub fn pons_closed_forms(lambda: u64, m: u64) -> Result<PonsForms> {
    if lambda == 0 || m < lambda {
        return Err(Error::InvalidParameter(format!(
            "pons forms need 1 <= lambda <= m, got lambda={lambda}, m={m}"
        )));
    }
    let opt_p = (2 * m - lambda) as f64;
    let opt_r = m as f64 / lambda as f64 * e_max_binomial(m, lambda as f64 / m as f64, lambda);
    Ok(PonsForms {
        opt_p,
        opt_r,
        ratio: opt_p / opt_r,
        limit_ratio: 2.0 / poisson_max_ratio(lambda),
    })
}

/// Closed forms for the fixed-assignment instance with `k·m` jobs
/// `Bernoulli(1/k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PofaForms {
    /// Optimal fixed-assignment cost `m(1 + (1 − 1/k)^k)` (k jobs per machine).
    pub opt_f: f64,
    /// Optimal non-anticipatory cost `E[max(Binomial(km, 1/k), m)]`, exact.
    pub opt_p: f64,
    pub ratio: f64,
    /// `(1 + e⁻¹) / (1 + e^{−m}m^m/m!)`, the `k → ∞` limit of the ratio.
    pub limit_ratio: f64,
}

pub fn pofa_closed_forms(k: u64, m: u64) -> Result<PofaForms> {
    if k == 0 || m == 0 {
        return Err(Error::InvalidParameter(format!("pofa forms need k, m >= 1, got k={k}, m={m}")));
    }
    let kf = k as f64;
    let opt_f = m as f64 * (1.0 + (1.0 - 1.0 / kf).powi(k as i32));
    let opt_p = e_max_binomial(k * m, 1.0 / kf, m);
    Ok(PofaForms {
        opt_f,
        opt_p,
        ratio: opt_f / opt_p,
        limit_ratio: lept_guarantee() / poisson_max_ratio(m),
    })
}

/// The per-family guarantee and the location of its supremum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FamilyBound {
    pub value: f64,
    pub t_star: f64,
}

const SCAN_LO: f64 = 1e-6;
const SCAN_STEP: f64 = 1e-3;

/// Maximizes `t ↦ (2 − 1/t)·g(t) + (1/t − 1)·g(2t)` over `(0, 1]` by a
/// coarse scan plus golden-section refinement; `g` need not be unimodal, the
/// scan guards against missed local maxima.
fn maximize_ratio_curve<G: Fn(f64) -> f64>(g: G) -> FamilyBound {
    let f = |t: f64| (2.0 - 1.0 / t) * g(t) + (1.0 / t - 1.0) * g(2.0 * t);
    let steps = (1.0 / SCAN_STEP) as usize;
    let mut best_t = 1.0;
    let mut best_v = f(1.0);
    for i in 0..=steps {
        let t = (SCAN_LO + i as f64 * SCAN_STEP).min(1.0);
        let v = f(t);
        if v > best_v {
            best_v = v;
            best_t = t;
        }
    }
    let lo = (best_t - 1.5 * SCAN_STEP).max(SCAN_LO);
    let hi = (best_t + 1.5 * SCAN_STEP).min(1.0);
    let (t_star, refined) = golden_max(f, lo, hi, 1e-8);
    if refined >= best_v {
        FamilyBound { value: refined, t_star }
    } else {
        FamilyBound { value: best_v, t_star: best_t }
    }
}

/// Approximation guarantee for instances drawn from the family:
/// `sup_{t∈(0,1]} (2 − 1/t)·g(t) + (1/t − 1)·g(2t)` with
/// `g = E[max(t·Z, 1)]` for the family's minimal element `Z`.
pub fn family_bound(spec: &FamilySpec) -> Result<FamilyBound> {
    let z = spec.minimal_element()?;
    Ok(maximize_ratio_curve(|t| z.extension_cost(t)))
}

/// One row family per table line, in the reference order.
pub fn default_table_families() -> Vec<Family> {
    vec![
        Family::Lognormal,
        Family::Gamma,
        Family::Weibull,
        Family::Uniform,
        Family::ScaledBernoulli,
        Family::Triangular { alpha: 0.0 },
        Family::Triangular { alpha: 0.25 },
        Family::Triangular { alpha: 0.5 },
        Family::Triangular { alpha: 0.75 },
        Family::Triangular { alpha: 1.0 },
    ]
}

/// The reference squared-cv grid `{0, 1/8, 1/6, 1/4, 1/3, 1/2, 1}`.
pub fn default_table_deltas() -> Vec<f64> {
    vec![0.0, 0.125, 1.0 / 6.0, 0.25, 1.0 / 3.0, 0.5, 1.0]
}

/// The family × delta guarantee table. `None` cells are infeasible
/// (the family cannot reach that squared coefficient of variation).
#[derive(Debug, Clone, PartialEq)]
pub struct GuaranteeTable {
    pub deltas: Vec<f64>,
    pub rows: Vec<(String, Vec<Option<f64>>)>,
    /// Soft monotonicity findings (values expected nondecreasing in delta).
    pub warnings: Vec<String>,
}

fn format_delta(delta: f64) -> String {
    for (v, s) in [
        (0.0, "0"),
        (0.125, "1/8"),
        (1.0 / 6.0, "1/6"),
        (0.25, "1/4"),
        (1.0 / 3.0, "1/3"),
        (0.5, "1/2"),
        (1.0, "1"),
    ] {
        if (delta - v).abs() < 1e-12 {
            return s.into();
        }
    }
    format!("{delta}")
}

impl GuaranteeTable {
    /// CSV with family rows and delta columns, 4-decimal cells, `-` for
    /// infeasible cells.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("family");
        for &d in &self.deltas {
            out.push(',');
            out.push_str(&format_delta(d));
        }
        out.push('\n');
        for (label, cells) in &self.rows {
            out.push_str(label);
            for cell in cells {
                out.push(',');
                match cell {
                    Some(v) => out.push_str(&format!("{v:.4}")),
                    None => out.push('-'),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Computes the guarantee table; rows run in parallel, output order is the
/// input order.
pub fn guarantee_table(families: &[Family], deltas: &[f64]) -> Result<GuaranteeTable> {
    let rows: Result<Vec<(String, Vec<Option<f64>>)>> = families
        .par_iter()
        .map(|family| {
            let mut cells = Vec::with_capacity(deltas.len());
            for &delta in deltas {
                match FamilySpec::new(*family, delta) {
                    Ok(spec) => cells.push(Some(family_bound(&spec)?.value)),
                    Err(_) => cells.push(None),
                }
            }
            Ok((family.label(), cells))
        })
        .collect();
    let rows = rows?;
    let mut warnings = Vec::new();
    for (label, cells) in &rows {
        let mut prev: Option<f64> = None;
        for (j, cell) in cells.iter().enumerate() {
            if let Some(v) = cell {
                if let Some(p) = prev {
                    if *v < p - 1e-6 {
                        warnings.push(format!(
                            "{label}: bound decreased from {p:.6} to {v:.6} at delta {}",
                            format_delta(deltas[j])
                        ));
                    }
                }
                prev = Some(*v);
            }
        }
    }
    Ok(GuaranteeTable { deltas: deltas.to_vec(), rows, warnings })
}

/// The distribution-free bound for a Pietra index cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PietraBound {
    /// Numeric maximum of `(2 − 1/t)·g_∞(t) + (1/t − 1)·g_∞(2t)` with
    /// `g_∞(t) = max(1 + ϱt, ϱ + t)`.
    pub value: f64,
    pub t_star: f64,
    /// `4 − 2√2 + 2ϱ(√2 − 1)`, which the numeric maximum reproduces.
    pub closed_form: f64,
}

/// Guarantee when every job's Pietra index is at most `varrho`; the numeric
/// maximization is the ground truth, the closed form is reported alongside.
pub fn pietra_bound(varrho: f64) -> PietraBound {
    assert!((0.0..1.0).contains(&varrho), "pietra bound needs 0 <= varrho < 1");
    let g_inf = |t: f64| (1.0 + varrho * t).max(varrho + t);
    let found = maximize_ratio_curve(g_inf);
    let sqrt2 = std::f64::consts::SQRT_2;
    PietraBound {
        value: found.value,
        t_star: found.t_star,
        closed_form: 4.0 - 2.0 * sqrt2 + 2.0 * varrho * (sqrt2 - 1.0),
    }
}

/// Lower/upper bound bundle for an instance, with the exact (or Monte Carlo)
/// cost of the greedy fixed assignment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub rho: f64,
    pub s: f64,
    pub beta: f64,
    /// `m·max(rho, 1)`.
    pub lb_trivial: f64,
    /// `max(s, m + beta)`.
    pub lb_truncated: f64,
    pub policy_value: CostEstimate,
    pub ratio_vs_lb: f64,
    /// The applicable guarantee constant `1 + e⁻¹`.
    pub guarantee: f64,
}

/// Builds the report with the exact engine only.
pub fn bound_report(inst: &Instance, cfg: &EvalConfig) -> Result<BoundReport> {
    bound_report_inner(inst, cfg, None)
}

/// Builds the report, falling back to Monte Carlo when exact evaluation is
/// impossible (continuous jobs) or over the support cap.
pub fn bound_report_with_mc(
    inst: &Instance,
    cfg: &EvalConfig,
    samples: u64,
    seed: u64,
) -> Result<BoundReport> {
    bound_report_inner(inst, cfg, Some((samples, seed)))
}

fn bound_report_inner(
    inst: &Instance,
    cfg: &EvalConfig,
    mc: Option<(u64, u64)>,
) -> Result<BoundReport> {
    let scalars = inst.derived_scalars();
    let m = inst.machines() as f64;
    let asg = lept_f(inst);
    let policy_value = match expected_cost_fixed(inst, &asg, cfg) {
        Ok(est) => est,
        Err(err @ (Error::NotDiscrete(_) | Error::SupportCapExceeded { .. })) => match mc {
            Some((samples, seed)) => expected_cost_mc(inst, McPolicy::Fixed(&asg), samples, seed),
            None => return Err(err),
        },
        Err(other) => return Err(other),
    };
    let lb_truncated = scalars.s.max(m + scalars.beta);
    Ok(BoundReport {
        rho: scalars.rho,
        s: scalars.s,
        beta: scalars.beta,
        lb_trivial: m * scalars.rho.max(1.0),
        lb_truncated,
        ratio_vs_lb: policy_value.value / lb_truncated,
        policy_value,
        guarantee: lept_guarantee(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{close, figure_instance};

    /// Truncated-series oracle for the Poisson max ratio, in log space, with the
    /// cutoff pushed until the remaining tail is below 1e-12.
    pub fn poisson_max_oracle(lambda: u64) -> f64 {
        let l = lambda as f64;
        let cutoff = lambda + 40 + (20.0 * l.sqrt()) as u64;
        let mut acc = 0.0;
        for k in 0..=cutoff {
            let kf = k as f64;
            let ln_pmf = -l + kf * l.ln() - ln_gamma(kf + 1.0);
            acc += kf.max(l) * ln_pmf.exp();
        }
        acc / l
    }

    #[test]
    fn poisson_ratio_examples() {
        close(poisson_max_ratio(1), 1.0 + (-1.0f64).exp(), 1e-12);
        close(poisson_max_ratio(2), 1.0 + 2.0 * (-2.0f64).exp(), 1e-12);
        close(poisson_max_ratio(20), 1.0888, 5e-5);
    }

    #[test]
    fn poisson_ratio_matches_series_oracle() {
        for lambda in 1..=30 {
            close(poisson_max_ratio(lambda), poisson_max_oracle(lambda), 1e-9);
        }
    }

    #[test]
    fn binomial_max_matches_enumeration() {
        // direct four-outcome oracle for Binomial(2, 1/2) and threshold 1
        // P = {1/4, 1/2, 1/4} over {0, 1, 2}: E[max(Y,1)] = 1.25
        close(e_max_binomial(2, 0.5, 1), 1.25, 1e-12);
        // Binomial(4, 1/2) vs threshold 2: (2·1 + 2·4 + 2·6 + 3·4 + 4·1)/16
        close(e_max_binomial(4, 0.5, 2), 2.375, 1e-12);
        // degenerate p
        close(e_max_binomial(5, 1.0, 3), 5.0, 0.0);
        close(e_max_binomial(5, 0.0, 3), 3.0, 0.0);
    }

    #[test]
    fn pons_examples() {
        let f = pons_closed_forms(1, 2).unwrap();
        close(f.opt_p, 3.0, 0.0);
        close(f.opt_r, 2.5, 1e-12);
        close(f.ratio, 1.2, 1e-12);

        let same = pons_closed_forms(5, 5).unwrap();
        close(same.opt_p, 5.0, 0.0);
        close(same.opt_r, 5.0, 1e-12);
        close(same.ratio, 1.0, 1e-12);

        close(pons_closed_forms(4, 8).unwrap().limit_ratio, 1.6731, 5e-5);
        assert!(pons_closed_forms(4, 2).is_err());
    }

    #[test]
    fn pofa_examples() {
        let unit = pofa_closed_forms(1, 7).unwrap();
        close(unit.opt_f, 7.0, 0.0);
        close(unit.opt_p, 7.0, 0.0);
        close(unit.ratio, 1.0, 0.0);

        let f = pofa_closed_forms(2, 2).unwrap();
        close(f.opt_f, 2.5, 1e-12);
        close(f.opt_p, 2.375, 1e-12);

        // the k-limit rises toward 1 + e⁻¹ as m grows
        let limits: Vec<f64> = [2u64, 10, 100, 1000]
            .iter()
            .map(|&m| pofa_closed_forms(2, m).unwrap().limit_ratio)
            .collect();
        assert!(limits.windows(2).all(|w| w[0] < w[1]));
        assert!(limits[3] < lept_guarantee());
    }

    #[test]
    fn pofa_ratio_stays_in_range() {
        for k in [1u64, 2, 3, 7, 50, 200] {
            for m in [1u64, 2, 5, 30, 100] {
                let f = pofa_closed_forms(k, m).unwrap();
                assert!(f.ratio >= 1.0 - 1e-12, "k={k} m={m}: ratio {}", f.ratio);
                assert!(f.ratio <= lept_guarantee() + 1e-12, "k={k} m={m}: ratio {}", f.ratio);
            }
        }
    }

    #[test]
    fn family_bound_degenerate_delta_is_deterministic_constant() {
        let expect = 4.0 - 2.0 * std::f64::consts::SQRT_2;
        for family in default_table_families() {
            let spec = FamilySpec::new(family, 0.0).unwrap();
            let b = family_bound(&spec).unwrap();
            close(b.value, expect, 1e-6);
            close(b.t_star, 1.0 / std::f64::consts::SQRT_2, 1e-3);
        }
    }

    #[test]
    fn family_bound_bernoulli_unit_delta_is_three_halves() {
        let spec = FamilySpec::new(Family::ScaledBernoulli, 1.0).unwrap();
        close(family_bound(&spec).unwrap().value, 1.5, 1e-9);
    }

    #[test]
    fn guarantee_table_spot_checks() {
        let table = guarantee_table(&default_table_families(), &default_table_deltas()).unwrap();
        let cell = |row: usize, col: usize| table.rows[row].1[col];
        close(cell(1, 6).unwrap(), 1.3896, 5e-4); // gamma, delta 1
        assert_eq!(cell(3, 5), None); // uniform, delta 1/2
        close(cell(5, 5).unwrap(), 1.3230, 5e-4); // triangular-0, delta 1/2
        close(cell(0, 3).unwrap(), 1.2334, 5e-4); // lognormal, delta 1/4
        assert!(table.warnings.is_empty(), "unexpected warnings: {:?}", table.warnings);
        // every feasible cell sits between the degenerate constant and the
        // trivial guarantee 2
        let floor = 4.0 - 2.0 * std::f64::consts::SQRT_2 - 1e-6;
        for (label, cells) in &table.rows {
            for v in cells.iter().flatten() {
                assert!(*v >= floor, "{label}: {v} below {floor}");
                assert!(*v <= 2.0 + 1e-9, "{label}: {v} above 2");
            }
        }
        let csv = table.to_csv();
        assert!(csv.starts_with("family,0,1/8,1/6,1/4,1/3,1/2,1\n"));
        assert!(csv.contains("uniform,1.1716,"));
    }

    #[test]
    fn fractional_optimum_agrees_with_binomial_forms() {
        // two routes to E[max(U, m)]: job convolution vs the log-space sum
        for (k, m) in [(3u64, 2u64), (2, 3), (5, 2)] {
            let inst = crate::instances::gen_pofa(k as usize, m as usize).unwrap();
            let via_pmf =
                crate::policies::opt_fractional(&inst, &EvalConfig::default()).unwrap();
            let via_sum = pofa_closed_forms(k, m).unwrap().opt_p;
            close(via_pmf, via_sum, 1e-10);
        }
    }

    #[test]
    fn pietra_bound_examples() {
        let b0 = pietra_bound(0.0);
        close(b0.value, 4.0 - 2.0 * std::f64::consts::SQRT_2, 1e-6);
        close(b0.value, b0.closed_form, 1e-6);
        close(b0.t_star, 1.0 / std::f64::consts::SQRT_2, 1e-4);

        let b5 = pietra_bound(0.5);
        close(b5.value, 4.0 - 2.0 * std::f64::consts::SQRT_2 + (std::f64::consts::SQRT_2 - 1.0), 1e-6);

        // the trivial guarantee 2 is approached as varrho → 1
        let b99 = pietra_bound(0.99);
        assert!(b99.closed_form < 2.0 && b99.closed_form > 1.99);
    }

    #[test]
    fn bound_report_on_figure_instance() {
        let report = bound_report(&figure_instance(), &EvalConfig::default()).unwrap();
        close(report.lb_truncated, 2.1, 1e-12);
        close(report.lb_trivial, 2.0, 1e-12);
        close(report.policy_value.value, 2.15, 1e-12);
        close(report.ratio_vs_lb, 2.15 / 2.1, 1e-12);
        assert!(report.ratio_vs_lb <= report.guarantee + 1e-9);
    }

    #[test]
    fn bound_report_trivial_short_instance() {
        let inst = Instance::new(
            2,
            vec![crate::distributions::Distribution::deterministic(0.5).unwrap(); 3],
        )
        .unwrap();
        let report = bound_report(&inst, &EvalConfig::default()).unwrap();
        close(report.ratio_vs_lb, 1.0, 1e-12);
    }

    #[test]
    fn bound_report_large_pofa_stays_under_guarantee() {
        let inst = crate::instances::gen_pofa(100, 10).unwrap();
        let report = bound_report(&inst, &EvalConfig::default()).unwrap();
        let expect = 10.0 * (1.0 + 0.99f64.powi(100));
        close(report.policy_value.value, expect, 1e-9);
        assert!(report.ratio_vs_lb <= report.guarantee + 1e-9);
    }

    #[test]
    fn bound_report_mc_fallback_for_continuous_jobs() {
        let spec = FamilySpec::new(Family::Lognormal, 0.25).unwrap();
        let inst = crate::instances::gen_random(&crate::instances::RandomSpec::new(
            6,
            2,
            crate::instances::JobRecipe::Family(spec),
            13,
        ))
        .unwrap();
        assert!(bound_report(&inst, &EvalConfig::default()).is_err());
        let report =
            bound_report_with_mc(&inst, &EvalConfig::default(), 20_000, 99).unwrap();
        assert_eq!(report.policy_value.samples, 20_000);
        assert!(report.ratio_vs_lb <= report.guarantee + 4.0 * report.policy_value.half_width);
    }
}
