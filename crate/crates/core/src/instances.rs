//! The SEBP instance model and generators for the worst-case families and
//! random test instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{Distribution, FamilySpec};
use crate::error::{Error, Result};

/// `m` identical unit-capacity machines and `n` independent stochastic jobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance")]
pub struct Instance {
    machines: usize,
    jobs: Vec<Distribution>,
}

#[derive(Deserialize)]
struct RawInstance {
    machines: usize,
    jobs: Vec<Distribution>,
}

impl TryFrom<RawInstance> for Instance {
    type Error = Error;

    fn try_from(raw: RawInstance) -> Result<Self> {
        Instance::new(raw.machines, raw.jobs)
    }
}

/// The instance-level scalars: average expected load, total expected load,
/// and overall expected excess beyond the unit capacity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scalars {
    pub rho: f64,
    pub s: f64,
    pub beta: f64,
}

impl Instance {
    pub fn new(machines: usize, jobs: Vec<Distribution>) -> Result<Self> {
        if machines == 0 {
            return Err(Error::InvalidInstance("need at least one machine".into()));
        }
        if jobs.is_empty() {
            return Err(Error::InvalidInstance("need at least one job".into()));
        }
        for (j, job) in jobs.iter().enumerate() {
            job.validate()?;
            let mean = job.mean();
            if !mean.is_finite() || mean <= 0.0 {
                return Err(Error::InvalidInstance(format!(
                    "job {} has mean {mean}; jobs must have positive finite mean",
                    j + 1
                )));
            }
        }
        Ok(Instance { machines, jobs })
    }

    pub fn machines(&self) -> usize {
        self.machines
    }

    pub fn jobs(&self) -> &[Distribution] {
        &self.jobs
    }

    pub fn n(&self) -> usize {
        self.jobs.len()
    }

    /// `rho = s/m`, `s = Σ E[P_j]`, `beta = Σ E[(P_j − 1)⁺]`.
    pub fn derived_scalars(&self) -> Scalars {
        let s: f64 = self.jobs.iter().map(|j| j.mean()).sum();
        let beta: f64 = self.jobs.iter().map(|j| j.tail_expectation(1.0)).sum();
        Scalars { rho: s / self.machines as f64, s, beta }
    }

    /// True when every job is in `[0, 1]` almost surely.
    pub fn is_short(&self) -> bool {
        self.jobs.iter().all(|j| j.is_short())
    }
}

/// `m` i.i.d. jobs `(m/λ)·Bernoulli(λ/m)`; every job has unit mean, so the
/// average load is 1. Requires `1 <= λ <= m`.
pub fn gen_pons(lambda: usize, m: usize) -> Result<Instance> {
    if lambda == 0 || m < lambda {
        return Err(Error::InvalidParameter(format!(
            "pons generator needs 1 <= lambda <= m, got lambda={lambda}, m={m}"
        )));
    }
    let x = m as f64 / lambda as f64;
    let p = lambda as f64 / m as f64;
    let job = Distribution::scaled_bernoulli(x, p)?;
    Instance::new(m, vec![job; m])
}

/// `k·m` i.i.d. `Bernoulli(1/k)` jobs, so `s = m` and the average load is 1.
pub fn gen_pofa(k: usize, m: usize) -> Result<Instance> {
    if k == 0 || m == 0 {
        return Err(Error::InvalidParameter(format!(
            "pofa generator needs k, m >= 1, got k={k}, m={m}"
        )));
    }
    let job = Distribution::scaled_bernoulli(1.0, 1.0 / k as f64)?;
    Instance::new(m, vec![job; k * m])
}

/// Two machines; two unit deterministic jobs and one `(1/ε)·Bernoulli(ε)`
/// job. All three means equal 1.
pub fn gen_ratio_f(epsilon: f64) -> Result<Instance> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "ratio-f generator needs epsilon in (0, 1], got {epsilon}"
        )));
    }
    let det = Distribution::deterministic(1.0)?;
    let stochastic = Distribution::scaled_bernoulli(1.0 / epsilon, epsilon)?;
    Instance::new(2, vec![det.clone(), det, stochastic])
}

/// Nudge applied to the stochastic job of the perturbed ratio-f instance.
pub const RATIO_F_PERTURBATION: f64 = 1e-9;

/// The ratio-f instance with the stochastic job's mean raised to `1 + 1e-9`,
/// which makes the greedy rule place it first and the two deterministic jobs
/// together on one machine, the configuration whose cost approaches `4 - eps`.
/// Costs differ from the unperturbed instance by at most `1e-9`.
pub fn gen_ratio_f_perturbed(epsilon: f64) -> Result<Instance> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "ratio-f generator needs epsilon in (0, 1], got {epsilon}"
        )));
    }
    let det = Distribution::deterministic(1.0)?;
    let stochastic =
        Distribution::scaled_bernoulli((1.0 + RATIO_F_PERTURBATION) / epsilon, epsilon)?;
    Instance::new(2, vec![det.clone(), det, stochastic])
}

/// How random jobs are drawn by [`gen_random`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JobRecipe {
    /// Members of a parametric family: scv uniform in `[0, spec.delta()]`,
    /// mean log-uniform in the configured range.
    Family(FamilySpec),
    /// Finite supports inside `[0, 1]` (short jobs).
    FiniteShort { max_points: usize },
    /// Finite supports inside `[0, 2.5]`, so some jobs exceed the capacity.
    FiniteMixed { max_points: usize },
}

/// Parameters for [`gen_random`].
#[derive(Debug, Clone, PartialEq)]
pub struct RandomSpec {
    pub n: usize,
    pub m: usize,
    pub recipe: JobRecipe,
    /// Log-uniform mean range for family jobs.
    pub mean_range: (f64, f64),
    pub seed: u64,
}

impl RandomSpec {
    pub fn new(n: usize, m: usize, recipe: JobRecipe, seed: u64) -> Self {
        RandomSpec { n, m, recipe, mean_range: (0.2, 2.0), seed }
    }
}

/// Deterministic random-instance source: the same spec always yields the
/// same instance. Requires `n > m` (with `n <= m` one job per machine is
/// trivially optimal).
pub fn gen_random(spec: &RandomSpec) -> Result<Instance> {
    if spec.n <= spec.m {
        return Err(Error::InvalidParameter(format!(
            "random generator needs n > m, got n={}, m={}",
            spec.n, spec.m
        )));
    }
    let (lo, hi) = spec.mean_range;
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::InvalidParameter(format!(
            "mean range ({lo}, {hi}) must satisfy 0 < lo <= hi"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut jobs = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        jobs.push(random_job(&spec.recipe, (lo, hi), &mut rng)?);
    }
    Instance::new(spec.m, jobs)
}

fn random_job(recipe: &JobRecipe, mean_range: (f64, f64), rng: &mut ChaCha8Rng) -> Result<Distribution> {
    match recipe {
        JobRecipe::Family(family) => {
            let (lo, hi) = mean_range;
            let mean = (rng.gen_range(lo.ln()..=hi.ln())).exp();
            let delta = if family.delta() > 0.0 {
                rng.gen_range(0.0..=family.delta())
            } else {
                0.0
            };
            family.member(mean, delta)
        }
        JobRecipe::FiniteShort { max_points } => random_finite(*max_points, 1.0, rng),
        JobRecipe::FiniteMixed { max_points } => random_finite(*max_points, 2.5, rng),
    }
}

fn random_finite(max_points: usize, value_cap: f64, rng: &mut ChaCha8Rng) -> Result<Distribution> {
    let k = rng.gen_range(2..=max_points.max(2));
    loop {
        let mut points: Vec<(f64, f64)> = Vec::with_capacity(k);
        let mut weight_total = 0.0;
        for _ in 0..k {
            let v = rng.gen_range(0.0..=value_cap);
            let w = rng.gen_range(0.05..1.0);
            points.push((v, w));
            weight_total += w;
        }
        for point in &mut points {
            point.1 /= weight_total;
        }
        let d = Distribution::finite(points)?;
        if d.mean() > 1e-6 {
            return Ok(d);
        }
    }
}
