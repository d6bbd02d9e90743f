//! Expected-cost computation.
//!
//! The exact engine convolves per-machine workload PMFs for finite-support
//! jobs and uses `E[max(X, 1)] = 1 + E[(X − 1)⁺]` to avoid cancellation.
//! Adaptive policies and the anticipative optimum are evaluated by joint
//! scenario enumeration. Everything else goes through the Monte Carlo engine,
//! which derives one ChaCha8 stream per realization from a 64-bit mix of
//! `(base_seed, realization_index)`, so results are bit-reproducible for a
//! fixed `(seed, samples)` pair regardless of worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::instances::Instance;
use crate::policies::{lept_order, lept_p_schedule_with_order, Assignment};

/// Caps for the exact engines. All configurable from the CLI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    /// Largest materialized workload support during convolution.
    pub max_support: usize,
    /// Largest joint-support enumeration for adaptive/anticipative evaluation.
    pub max_scenarios: usize,
    /// Job cap for the exact optimal fixed assignment search.
    pub max_jobs_fixed_opt: usize,
    /// Job cap for the exact deterministic optimum.
    pub max_jobs_det_opt: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            max_support: 10_000_000,
            max_scenarios: 1_000_000,
            max_jobs_fixed_opt: 12,
            max_jobs_det_opt: 20,
        }
    }
}

/// Sorted value/probability pairs for one machine's workload.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadPmf {
    points: Vec<(f64, f64)>,
}

impl WorkloadPmf {
    /// The workload of an empty machine: a unit mass at 0.
    pub fn unit() -> Self {
        WorkloadPmf { points: vec![(0.0, 1.0)] }
    }

    /// Validates, sorts, and merges near-duplicate values.
    pub fn from_points(points: Vec<(f64, f64)>) -> Result<Self> {
        let normalized = Distribution::finite(points)?
            .as_finite()
            .expect("finite by construction");
        Ok(WorkloadPmf { points: normalized })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn mean(&self) -> f64 {
        self.points.iter().map(|&(v, p)| v * p).sum()
    }

    /// `E[(X − 1)⁺]`.
    pub fn expected_excess(&self) -> f64 {
        self.points.iter().map(|&(v, p)| p * (v - 1.0).max(0.0)).sum()
    }

    /// `E[max(X, 1)] = 1 + E[(X − 1)⁺]`.
    pub fn expected_cost(&self) -> f64 {
        1.0 + self.expected_excess()
    }

    /// `E[max(X, floor)]`.
    pub fn expected_max_with(&self, floor: f64) -> f64 {
        self.points.iter().map(|&(v, p)| p * v.max(floor)).sum()
    }

    /// Distribution of `X + Y` for an independent finite `Y`.
    pub fn convolve_points(&self, other: &[(f64, f64)], cap: usize) -> Result<Self> {
        let raw = self.points.len() as u128 * other.len() as u128;
        if raw > cap as u128 {
            return Err(Error::SupportCapExceeded { support: raw.min(usize::MAX as u128) as usize, cap });
        }
        let mut out = Vec::with_capacity(raw as usize);
        for &(v1, p1) in &self.points {
            for &(v2, p2) in other {
                out.push((v1 + v2, p1 * p2));
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(out.len());
        for (v, p) in out {
            match merged.last_mut() {
                Some(last) if v - last.0 <= crate::distributions::MERGE_EPS => {
                    let w = last.1 + p;
                    last.0 = (last.0 * last.1 + v * p) / w;
                    last.1 = w;
                }
                _ => merged.push((v, p)),
            }
        }
        if merged.len() > cap {
            return Err(Error::SupportCapExceeded { support: merged.len(), cap });
        }
        Ok(WorkloadPmf { points: merged })
    }
}

/// Iterated convolution of finite-support jobs.
pub fn machine_pmf(jobs: &[&Distribution], cfg: &EvalConfig) -> Result<WorkloadPmf> {
    let mut pmf = WorkloadPmf::unit();
    for job in jobs {
        let support = job
            .as_finite()
            .ok_or_else(|| Error::NotDiscrete(format!("{} job in convolution", job.kind_name())))?;
        pmf = pmf.convolve_points(&support, cfg.max_support)?;
    }
    Ok(pmf)
}

/// How a cost value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    MonteCarlo,
}

/// An expected-cost value with its provenance; `half_width` is a 95%
/// confidence half-width (`1.96·std/√samples`), zero for exact values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub value: f64,
    pub method: Method,
    pub half_width: f64,
    pub samples: u64,
    pub seed: Option<u64>,
}

impl CostEstimate {
    pub fn exact(value: f64) -> Self {
        CostEstimate { value, method: Method::Exact, half_width: 0.0, samples: 0, seed: None }
    }
}

/// Policies the Monte Carlo engine can evaluate.
#[derive(Debug, Clone, Copy)]
pub enum McPolicy<'a> {
    Fixed(&'a Assignment),
    LeptP,
    Naive,
}

/// The stated 64-bit mix deriving realization `index`'s stream from the base
/// seed (splitmix64 of `base ^ (index+1)·0x9E3779B97F4A7C15`).
pub fn mix_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fixed chunk size for parallel sampling; results are merged in chunk order,
/// so the estimate does not depend on the number of workers.
const MC_CHUNK: u64 = 4096;

pub(crate) fn mc_mean<F>(inst: &Instance, samples: u64, seed: u64, cost: F) -> (f64, f64)
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    assert!(samples >= 2, "need at least two samples for a confidence interval");
    let jobs = inst.jobs();
    let chunks = samples.div_ceil(MC_CHUNK);
    let partials: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * MC_CHUNK;
            let hi = (lo + MC_CHUNK).min(samples);
            let mut p = vec![0.0f64; jobs.len()];
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for i in lo..hi {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, i));
                for (slot, job) in p.iter_mut().zip(jobs) {
                    *slot = job.sample(&mut rng);
                }
                let phi = cost(&p);
                sum += phi;
                sum_sq += phi * phi;
            }
            (sum, sum_sq)
        })
        .collect();
    let (sum, sum_sq) = partials
        .iter()
        .fold((0.0, 0.0), |(s, q), &(ps, pq)| (s + ps, q + pq));
    let n = samples as f64;
    let mean = sum / n;
    let variance = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    (mean, 1.96 * (variance / n).sqrt())
}

/// Exact expected cost of a fixed assignment: `Σ_i E[max(X_i, 1)]` from
/// per-machine workload PMFs.
pub fn expected_cost_fixed(inst: &Instance, asg: &Assignment, cfg: &EvalConfig) -> Result<CostEstimate> {
    let mut value = 0.0;
    for set in asg.job_sets() {
        if set.is_empty() {
            value += 1.0;
        } else {
            let jobs: Vec<&Distribution> = set.iter().map(|&j| &inst.jobs()[j]).collect();
            value += machine_pmf(&jobs, cfg)?.expected_cost();
        }
    }
    Ok(CostEstimate::exact(value))
}

/// Monte Carlo estimate of a policy's expected cost.
pub fn expected_cost_mc(inst: &Instance, policy: McPolicy, samples: u64, seed: u64) -> CostEstimate {
    let order = lept_order(inst);
    let m = inst.machines();
    let (value, half_width) = match policy {
        McPolicy::Fixed(asg) => mc_mean(inst, samples, seed, |p| asg.cost_for(p)),
        McPolicy::LeptP => mc_mean(inst, samples, seed, |p| {
            lept_p_schedule_with_order(&order, m, p).cost(p)
        }),
        McPolicy::Naive => mc_mean(inst, samples, seed, |p| {
            p.iter().sum::<f64>().max(1.0) + (m - 1) as f64
        }),
    };
    CostEstimate { value, method: Method::MonteCarlo, half_width, samples, seed: Some(seed) }
}

/// Walks the joint support of finite-support jobs, calling `visit` with each
/// realization and its probability.
pub(crate) fn enumerate_scenarios<F>(inst: &Instance, cap: usize, mut visit: F) -> Result<()>
where
    F: FnMut(&[f64], f64) -> Result<()>,
{
    let mut supports = Vec::with_capacity(inst.n());
    for job in inst.jobs() {
        supports.push(job.as_finite().ok_or_else(|| {
            Error::NotDiscrete(format!("{} job in scenario enumeration", job.kind_name()))
        })?);
    }
    let mut count: u128 = 1;
    for s in &supports {
        count = count.saturating_mul(s.len() as u128);
    }
    if count > cap as u128 {
        return Err(Error::ScenarioCapExceeded { scenarios: count, cap });
    }
    let n = supports.len();
    let mut index = vec![0usize; n];
    let mut realization = vec![0.0f64; n];
    loop {
        let mut prob = 1.0;
        for j in 0..n {
            let (v, p) = supports[j][index[j]];
            realization[j] = v;
            prob *= p;
        }
        visit(&realization, prob)?;
        // mixed-radix increment
        let mut j = 0;
        loop {
            if j == n {
                return Ok(());
            }
            index[j] += 1;
            if index[j] < supports[j].len() {
                break;
            }
            index[j] = 0;
            j += 1;
        }
    }
}

/// Exact expected cost of the static list policy, by joint-support
/// enumeration. Errors on continuous jobs or when the joint support exceeds
/// the scenario cap.
pub fn expected_cost_lept_p_exact(inst: &Instance, cfg: &EvalConfig) -> Result<CostEstimate> {
    let order = lept_order(inst);
    let m = inst.machines();
    let mut value = 0.0;
    enumerate_scenarios(inst, cfg.max_scenarios, |p, prob| {
        value += prob * lept_p_schedule_with_order(&order, m, p).cost(p);
        Ok(())
    })?;
    Ok(CostEstimate::exact(value))
}

/// `E[OPT(P)]`: the expected cost of re-optimizing after all durations are
/// revealed, by scenario enumeration with the exact deterministic optimum
/// per scenario.
pub fn expected_opt_anticipative(inst: &Instance, cfg: &EvalConfig) -> Result<CostEstimate> {
    let m = inst.machines();
    let mut value = 0.0;
    enumerate_scenarios(inst, cfg.max_scenarios, |p, prob| {
        value += prob * crate::policies::opt_deterministic(p, m, cfg)?;
        Ok(())
    })?;
    Ok(CostEstimate::exact(value))
}

/// Monte Carlo fallback for `E[OPT(P)]` (per-sample exact re-optimization).
pub fn expected_opt_anticipative_mc(
    inst: &Instance,
    samples: u64,
    seed: u64,
    cfg: &EvalConfig,
) -> Result<CostEstimate> {
    let nonzero_cap = inst.n() <= cfg.max_jobs_det_opt;
    if !nonzero_cap {
        return Err(Error::JobCapExceeded { jobs: inst.n(), cap: cfg.max_jobs_det_opt });
    }
    let m = inst.machines();
    let cfg = *cfg;
    let (value, half_width) = mc_mean(inst, samples, seed, move |p| {
        crate::policies::opt_deterministic(p, m, &cfg).expect("cap checked above")
    });
    Ok(CostEstimate { value, method: Method::MonteCarlo, half_width, samples, seed: Some(seed) })
}

/// Monte Carlo estimate of the fractional optimum `E[max(Σ_j P_j, m)]`.
pub fn opt_fractional_mc(inst: &Instance, samples: u64, seed: u64) -> CostEstimate {
    let m = inst.machines() as f64;
    let (value, half_width) = mc_mean(inst, samples, seed, |p| p.iter().sum::<f64>().max(m));
    CostEstimate { value, method: Method::MonteCarlo, half_width, samples, seed: Some(seed) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::{lept_f, naive_assignment};
    use crate::testutil::{close, figure_instance};

    #[test]
    fn convolution_examples() {
        let cfg = EvalConfig::default();
        let job2 = Distribution::finite(vec![(0.5, 0.5), (0.7, 0.5)]).unwrap();
        let job3 = Distribution::deterministic(0.4).unwrap();
        let pmf = machine_pmf(&[&job2, &job3], &cfg).unwrap();
        assert_eq!(pmf.points(), &[(0.9, 0.5), (1.1, 0.5)]);

        let single = machine_pmf(&[&job2], &cfg).unwrap();
        assert_eq!(single.points(), job2.as_finite().unwrap().as_slice());

        let coin = Distribution::scaled_bernoulli(1.0, 0.5).unwrap();
        let two = machine_pmf(&[&coin, &coin], &cfg).unwrap();
        assert_eq!(two.points(), &[(0.0, 0.25), (1.0, 0.5), (2.0, 0.25)]);
    }

    #[test]
    fn convolution_preserves_mean() {
        use rand::{Rng, SeedableRng};
        let cfg = EvalConfig::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.gen_range(1..=6);
            let jobs: Vec<Distribution> = (0..n)
                .map(|_| {
                    let v1 = rng.gen_range(0.0..2.0);
                    let v2 = rng.gen_range(0.0..2.0);
                    let p = rng.gen_range(0.05..0.95);
                    Distribution::finite(vec![(v1, p), (v2, 1.0 - p)]).unwrap()
                })
                .collect();
            let refs: Vec<&Distribution> = jobs.iter().collect();
            let pmf = machine_pmf(&refs, &cfg).unwrap();
            let mean_sum: f64 = jobs.iter().map(|j| j.mean()).sum();
            close(pmf.mean(), mean_sum, 1e-9);
            let total: f64 = pmf.points().iter().map(|&(_, p)| p).sum();
            close(total, 1.0, 1e-12);
        }
    }

    #[test]
    fn convolution_cap_is_enforced() {
        let cfg = EvalConfig { max_support: 8, ..EvalConfig::default() };
        let wide = Distribution::finite((0..4).map(|i| (i as f64 * 0.3, 0.25)).collect()).unwrap();
        assert!(matches!(
            machine_pmf(&[&wide, &wide], &cfg),
            Err(Error::SupportCapExceeded { .. })
        ));
    }

    #[test]
    fn exact_cost_of_figure_assignment() {
        let inst = figure_instance();
        let cfg = EvalConfig::default();
        let cost = expected_cost_fixed(&inst, &lept_f(&inst), &cfg).unwrap();
        close(cost.value, 2.15, 1e-12);
        assert_eq!(cost.method, Method::Exact);
        assert_eq!(cost.half_width, 0.0);

        // per-realization costs from the two stated realizations
        let asg = lept_f(&inst);
        close(asg.cost_for(&[1.2, 0.5, 0.4]), 2.2, 1e-15);
        close(asg.cost_for(&[0.4, 0.7, 0.4]), 2.1, 1e-15);
    }

    #[test]
    fn exact_cost_of_deterministic_assignment() {
        let inst = Instance::new(
            2,
            vec![
                Distribution::deterministic(1.4).unwrap(),
                Distribution::deterministic(0.3).unwrap(),
            ],
        )
        .unwrap();
        let asg = naive_assignment(&inst);
        let cost = expected_cost_fixed(&inst, &asg, &EvalConfig::default()).unwrap();
        close(cost.value, 1.7f64.max(1.0) + 1.0, 1e-12);
    }

    #[test]
    fn exact_cost_of_balanced_pofa() {
        let inst = crate::instances::gen_pofa(2, 2).unwrap();
        let asg = Assignment::new(&inst, vec![0, 0, 1, 1]).unwrap();
        let cost = expected_cost_fixed(&inst, &asg, &EvalConfig::default()).unwrap();
        close(cost.value, 2.5, 1e-12);
    }

    #[test]
    fn lept_p_exact_on_figure_instance() {
        // four-outcome oracle: (1.2,0.5)→2.2, (1.2,0.7)→2.3, (0.4,0.5)→2.0, (0.4,0.7)→2.0
        let inst = figure_instance();
        let cost = expected_cost_lept_p_exact(&inst, &EvalConfig::default()).unwrap();
        close(cost.value, 2.125, 1e-12);
    }

    #[test]
    fn anticipative_optimum_examples() {
        let cfg = EvalConfig::default();
        // all-deterministic: equals the deterministic optimum of the means
        let det = Instance::new(
            2,
            vec![
                Distribution::deterministic(1.2).unwrap(),
                Distribution::deterministic(0.5).unwrap(),
                Distribution::deterministic(0.4).unwrap(),
            ],
        )
        .unwrap();
        close(expected_opt_anticipative(&det, &cfg).unwrap().value, 2.2, 1e-12);

        // Figure instance: scenario costs 2.2, 2.3, 2.0, 2.0
        let fig = figure_instance();
        close(expected_opt_anticipative(&fig, &cfg).unwrap().value, 2.125, 1e-12);

        // pons(1,2): scenario optima 2, 3, 3, 4 with probability 1/4 each
        let pons = crate::instances::gen_pons(1, 2).unwrap();
        let e_opt = expected_opt_anticipative(&pons, &cfg).unwrap().value;
        close(e_opt, 3.0, 1e-12);
        let sc = pons.derived_scalars();
        assert!(e_opt >= sc.s.max(pons.machines() as f64 + sc.beta) - 1e-9);
    }

    #[test]
    fn scenario_enumeration_agrees_with_convolution() {
        // two exact routes to the same fixed-assignment cost
        use rand::{Rng, SeedableRng};
        let cfg = EvalConfig::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..30 {
            let n: usize = rng.gen_range(2..=6);
            let m: usize = rng.gen_range(1..=3);
            let jobs: Vec<Distribution> = (0..n)
                .map(|_| {
                    let v1 = rng.gen_range(0.05..1.8);
                    let v2 = rng.gen_range(0.05..1.8);
                    let p = rng.gen_range(0.1..0.9);
                    Distribution::finite(vec![(v1, p), (v2, 1.0 - p)]).unwrap()
                })
                .collect();
            let inst = Instance::new(m, jobs).unwrap();
            let asg = lept_f(&inst);
            let via_pmf = expected_cost_fixed(&inst, &asg, &cfg).unwrap().value;
            let mut via_scenarios = 0.0;
            enumerate_scenarios(&inst, cfg.max_scenarios, |p, prob| {
                via_scenarios += prob * asg.cost_for(p);
                Ok(())
            })
            .unwrap();
            close(via_pmf, via_scenarios, 1e-10);
        }
    }

    #[test]
    fn scenario_cap_is_enforced() {
        let cfg = EvalConfig { max_scenarios: 3, ..EvalConfig::default() };
        let inst = crate::instances::gen_pofa(2, 1).unwrap();
        assert!(matches!(
            expected_opt_anticipative(&inst, &cfg),
            Err(Error::ScenarioCapExceeded { .. })
        ));
    }

    #[test]
    fn mc_on_deterministic_instance_is_noiseless() {
        let inst = Instance::new(
            2,
            vec![
                Distribution::deterministic(1.2).unwrap(),
                Distribution::deterministic(0.8).unwrap(),
            ],
        )
        .unwrap();
        let asg = lept_f(&inst);
        let est = expected_cost_mc(&inst, McPolicy::Fixed(&asg), 1000, 7);
        close(est.value, 2.2, 1e-12);
        assert!(est.half_width < 1e-12);
    }

    #[test]
    fn mc_covers_exact_values() {
        let inst = figure_instance();
        let asg = lept_f(&inst);
        let est = expected_cost_mc(&inst, McPolicy::Fixed(&asg), 200_000, 42);
        assert!((est.value - 2.15).abs() <= 4.0 * est.half_width.max(1e-12));

        let est_p = expected_cost_mc(&inst, McPolicy::LeptP, 200_000, 42);
        assert!((est_p.value - 2.125).abs() <= 4.0 * est_p.half_width.max(1e-12));
    }

    #[test]
    fn mc_is_reproducible_and_seed_sensitive() {
        let inst = figure_instance();
        let asg = lept_f(&inst);
        let a = expected_cost_mc(&inst, McPolicy::Fixed(&asg), 10_000, 1);
        let b = expected_cost_mc(&inst, McPolicy::Fixed(&asg), 10_000, 1);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        let c = expected_cost_mc(&inst, McPolicy::Fixed(&asg), 10_000, 2);
        assert_ne!(a.value.to_bits(), c.value.to_bits());
    }

    #[test]
    fn mc_is_thread_count_independent() {
        let inst = figure_instance();
        let asg = lept_f(&inst);
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let quad = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = single.install(|| expected_cost_mc(&inst, McPolicy::Fixed(&asg), 50_000, 9));
        let b = quad.install(|| expected_cost_mc(&inst, McPolicy::Fixed(&asg), 50_000, 9));
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.half_width.to_bits(), b.half_width.to_bits());
    }

    #[test]
    fn naive_mc_matches_exact_closed_form() {
        let inst = figure_instance();
        // naive cost = E[max(P1+P2+P3, 1)] + 1; supports sum well above 1
        let cfg = EvalConfig::default();
        let exact = expected_cost_fixed(&inst, &naive_assignment(&inst), &cfg).unwrap();
        let mc = expected_cost_mc(&inst, McPolicy::Naive, 200_000, 3);
        assert!((mc.value - exact.value).abs() <= 4.0 * mc.half_width.max(1e-12));
    }

    #[test]
    fn cost_estimate_json_shape() {
        let est = CostEstimate::exact(2.15);
        assert_eq!(
            serde_json::to_string(&est).unwrap(),
            r#"{"value":2.15,"method":"exact","half_width":0.0,"samples":0,"seed":null}"#
        );
        let mc = CostEstimate {
            value: 1.0,
            method: Method::MonteCarlo,
            half_width: 0.01,
            samples: 1000,
            seed: Some(7),
        };
        assert!(serde_json::to_string(&mc).unwrap().contains(r#""method":"monte-carlo""#));
    }

    #[test]
    fn mix_seed_spreads() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| mix_seed(42, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(mix_seed(1, 0), mix_seed(2, 0));
    }
}
