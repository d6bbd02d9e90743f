//! Fixed and adaptive scheduling policies.
//!
//! `lept_f` builds the fixed assignment greedily in nonincreasing
//! expected-duration order; `lept_p_schedule` simulates the static list
//! policy on one realization. `opt_fixed_exact` and `opt_deterministic` are
//! exact branch-and-bound searches over machine-relabeling classes, and
//! `opt_fractional` evaluates the splittable relaxation
//! `E[max(Σ_j P_j, m)]`.

use serde::{Deserialize, Serialize};

use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::evaluation::{machine_pmf, EvalConfig, WorkloadPmf};
use crate::instances::Instance;

/// Per-machine statistics of a fixed assignment: job count `n`, expected
/// load `x`, truncated load `alpha = Σ E[min(P_j, 1)]`, and excess
/// `beta = Σ E[(P_j − 1)⁺]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MachineStats {
    #[serde(rename = "n")]
    pub jobs: usize,
    #[serde(rename = "x")]
    pub expected_load: f64,
    #[serde(rename = "alpha")]
    pub truncated_load: f64,
    #[serde(rename = "beta")]
    pub excess: f64,
}

/// A job → machine map with per-machine statistics. Machine indices are
/// 0-based in the API and 1-based in the JSON encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    machine_of: Vec<usize>,
    stats: Vec<MachineStats>,
}

#[derive(Serialize, Deserialize)]
struct RawAssignment {
    machine_of: Vec<usize>,
    stats: Vec<MachineStats>,
}

impl Serialize for Assignment {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        RawAssignment {
            machine_of: self.machine_of.iter().map(|&i| i + 1).collect(),
            stats: self.stats.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Assignment {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = RawAssignment::deserialize(deserializer)?;
        let machines = raw.stats.len();
        let mut machine_of = Vec::with_capacity(raw.machine_of.len());
        for one_based in raw.machine_of {
            if one_based == 0 || one_based > machines {
                return Err(serde::de::Error::custom(format!(
                    "machine index {one_based} outside 1..={machines}"
                )));
            }
            machine_of.push(one_based - 1);
        }
        Ok(Assignment { machine_of, stats: raw.stats })
    }
}

impl Assignment {
    /// Builds the assignment and its statistics; `machine_of` is 0-based.
    pub fn new(inst: &Instance, machine_of: Vec<usize>) -> Result<Self> {
        if machine_of.len() != inst.n() {
            return Err(Error::InvalidInstance(format!(
                "assignment covers {} jobs, instance has {}",
                machine_of.len(),
                inst.n()
            )));
        }
        let m = inst.machines();
        let mut stats = vec![
            MachineStats { jobs: 0, expected_load: 0.0, truncated_load: 0.0, excess: 0.0 };
            m
        ];
        for (j, &i) in machine_of.iter().enumerate() {
            if i >= m {
                return Err(Error::InvalidInstance(format!(
                    "job {} assigned to machine {} but instance has {m}",
                    j + 1,
                    i + 1
                )));
            }
            let job = &inst.jobs()[j];
            let mean = job.mean();
            let excess = job.tail_expectation(1.0);
            stats[i].jobs += 1;
            stats[i].expected_load += mean;
            stats[i].truncated_load += mean - excess;
            stats[i].excess += excess;
        }
        Ok(Assignment { machine_of, stats })
    }

    /// 0-based machine index per job.
    pub fn machine_of(&self) -> &[usize] {
        &self.machine_of
    }

    pub fn machines(&self) -> usize {
        self.stats.len()
    }

    pub fn stats(&self) -> &[MachineStats] {
        &self.stats
    }

    /// Job indices grouped by machine.
    pub fn job_sets(&self) -> Vec<Vec<usize>> {
        let mut sets = vec![Vec::new(); self.stats.len()];
        for (j, &i) in self.machine_of.iter().enumerate() {
            sets[i].push(j);
        }
        sets
    }

    /// Realization-wise cost `φ = Σ_i max(X_i, 1)`.
    pub fn cost_for(&self, realization: &[f64]) -> f64 {
        debug_assert_eq!(realization.len(), self.machine_of.len());
        let mut loads = vec![0.0; self.stats.len()];
        for (j, &i) in self.machine_of.iter().enumerate() {
            loads[i] += realization[j];
        }
        loads.iter().map(|&l| l.max(1.0)).sum()
    }
}

/// One realization of a (possibly adaptive) schedule: start time and machine
/// per job.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    pub start: Vec<f64>,
    pub machine: Vec<usize>,
    pub machines: usize,
}

impl Schedule {
    /// `φ = Σ_i max(latest completion on i, 1)`; empty machines cost 1.
    pub fn cost(&self, realization: &[f64]) -> f64 {
        let mut workload = vec![0.0f64; self.machines];
        for (j, &i) in self.machine.iter().enumerate() {
            workload[i] = workload[i].max(self.start[j] + realization[j]);
        }
        workload.iter().map(|&w| w.max(1.0)).sum()
    }

    /// Feasibility: job intervals on one machine are pairwise disjoint.
    pub fn is_feasible(&self, realization: &[f64]) -> bool {
        let mut by_machine: Vec<Vec<(f64, f64)>> = vec![Vec::new(); self.machines];
        for (j, &i) in self.machine.iter().enumerate() {
            by_machine[i].push((self.start[j], self.start[j] + realization[j]));
        }
        for intervals in &mut by_machine {
            intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
            for w in intervals.windows(2) {
                if w[1].0 < w[0].1 - 1e-12 {
                    return false;
                }
            }
        }
        true
    }
}

/// Job indices in nonincreasing order of expected duration, ties broken by
/// ascending index.
pub fn lept_order(inst: &Instance) -> Vec<usize> {
    let means: Vec<f64> = inst.jobs().iter().map(|j| j.mean()).collect();
    let mut order: Vec<usize> = (0..inst.n()).collect();
    order.sort_by(|&a, &b| means[b].total_cmp(&means[a]).then(a.cmp(&b)));
    order
}

/// Greedy fixed assignment: jobs in nonincreasing-mean order, each onto the
/// machine with least expected load (ties broken by lowest machine index).
pub fn lept_f(inst: &Instance) -> Assignment {
    let m = inst.machines();
    let mut loads = vec![0.0f64; m];
    let mut machine_of = vec![0usize; inst.n()];
    for j in lept_order(inst) {
        let target = argmin(&loads);
        machine_of[j] = target;
        loads[target] += inst.jobs()[j].mean();
    }
    Assignment::new(inst, machine_of).expect("greedy assignment is always valid")
}

/// Static list policy on one realization: jobs in nonincreasing-mean order
/// start as early as possible; each completion event hands the freed machine
/// to the next unstarted job (simultaneous frees go to the lowest index).
pub fn lept_p_schedule(inst: &Instance, realization: &[f64]) -> Schedule {
    assert_eq!(realization.len(), inst.n(), "realization length must equal n");
    assert!(realization.iter().all(|&p| p >= 0.0), "durations must be nonnegative");
    lept_p_schedule_with_order(&lept_order(inst), inst.machines(), realization)
}

pub(crate) fn lept_p_schedule_with_order(
    order: &[usize],
    machines: usize,
    realization: &[f64],
) -> Schedule {
    let mut free_at = vec![0.0f64; machines];
    let mut start = vec![0.0f64; realization.len()];
    let mut machine = vec![0usize; realization.len()];
    for &j in order {
        let target = argmin(&free_at);
        start[j] = free_at[target];
        machine[j] = target;
        free_at[target] += realization[j];
    }
    Schedule { start, machine, machines }
}

/// All jobs on machine 1.
pub fn naive_assignment(inst: &Instance) -> Assignment {
    Assignment::new(inst, vec![0; inst.n()]).expect("naive assignment is always valid")
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// LPT for the deterministic problem: jobs in nonincreasing order onto the
/// currently least-loaded machine. Returns `Σ_i max(load_i, 1)`.
pub fn lpt_heuristic(durations: &[f64], machines: usize) -> f64 {
    assert!(machines >= 1);
    let loads = lpt_loads(durations, machines);
    loads.iter().map(|&l| l.max(1.0)).sum()
}

fn lpt_loads(durations: &[f64], machines: usize) -> Vec<f64> {
    let mut order: Vec<usize> = (0..durations.len()).collect();
    order.sort_by(|&a, &b| durations[b].total_cmp(&durations[a]).then(a.cmp(&b)));
    let mut loads = vec![0.0f64; machines];
    for j in order {
        let target = argmin(&loads);
        loads[target] += durations[j];
    }
    loads
}

/// Exact deterministic optimum `OPT(p) = min over assignments of
/// Σ_i max(load_i, 1)`, by branch-and-bound with an LPT warm start.
pub fn opt_deterministic(durations: &[f64], machines: usize, cfg: &EvalConfig) -> Result<f64> {
    assert!(machines >= 1);
    let mut jobs: Vec<f64> = durations.iter().copied().filter(|&p| p > 0.0).collect();
    if jobs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidParameter("durations must be finite and >= 0".into()));
    }
    if jobs.len() > cfg.max_jobs_det_opt {
        return Err(Error::JobCapExceeded { jobs: jobs.len(), cap: cfg.max_jobs_det_opt });
    }
    jobs.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = jobs.iter().sum();
    let mut best = lpt_heuristic(&jobs, machines);
    let mut loads = vec![0.0f64; machines];
    branch_det(&jobs, 0, total, &mut loads, &mut best);
    Ok(best)
}

fn branch_det(jobs: &[f64], depth: usize, remaining: f64, loads: &mut Vec<f64>, best: &mut f64) {
    let m = loads.len();
    if depth == jobs.len() {
        let cost: f64 = m as f64 + loads.iter().map(|&l| (l - 1.0).max(0.0)).sum::<f64>();
        if cost < *best {
            *best = cost;
        }
        return;
    }
    // overflow already incurred plus overflow the remaining mass must cause
    let excess: f64 = loads.iter().map(|&l| (l - 1.0).max(0.0)).sum();
    let free: f64 = loads.iter().map(|&l| (1.0 - l).max(0.0)).sum();
    let lb = m as f64 + excess + (remaining - free).max(0.0);
    if lb >= *best - 1e-12 {
        return;
    }
    let p = jobs[depth];
    let mut tried: Vec<f64> = Vec::with_capacity(m);
    for i in 0..m {
        // identical loads are symmetric; an empty machine is tried once
        if tried.iter().any(|&l| l == loads[i]) {
            continue;
        }
        tried.push(loads[i]);
        loads[i] += p;
        branch_det(jobs, depth + 1, remaining - p, loads, best);
        loads[i] -= p;
        if loads[i] == 0.0 {
            break;
        }
    }
}

/// Exact optimal fixed assignment for finite-support jobs: exhaustive search
/// over machine-relabeling classes with branch-and-bound pruning, each leaf
/// costed by the exact convolution engine. Certified optimal.
pub fn opt_fixed_exact(inst: &Instance, cfg: &EvalConfig) -> Result<(Assignment, f64)> {
    let n = inst.n();
    if n > cfg.max_jobs_fixed_opt {
        return Err(Error::JobCapExceeded { jobs: n, cap: cfg.max_jobs_fixed_opt });
    }
    let mut supports = Vec::with_capacity(n);
    for job in inst.jobs() {
        supports.push(job.as_finite().ok_or_else(|| {
            Error::NotDiscrete(format!("{} job in exact fixed-assignment search", job.kind_name()))
        })?);
    }
    let m = inst.machines();
    let order = lept_order(inst);
    let means: Vec<f64> = inst.jobs().iter().map(|j| j.mean()).collect();
    let total_mean: f64 = means.iter().sum();

    let warm = lept_f(inst);
    let mut best_cost = {
        let sets = warm.job_sets();
        let mut cost = 0.0;
        for set in &sets {
            let jobs: Vec<&Distribution> = set.iter().map(|&j| &inst.jobs()[j]).collect();
            cost += if jobs.is_empty() {
                1.0
            } else {
                machine_pmf(&jobs, cfg)?.expected_cost()
            };
        }
        cost
    };
    let mut best_assign = warm.machine_of().to_vec();

    let mut search = FixedSearch {
        supports: &supports,
        order: &order,
        means: &means,
        total_mean,
        cfg,
        machines: m,
        machine_of: vec![0usize; n],
        pmfs: Vec::new(),
        contribs: Vec::new(),
        mean_loads: Vec::new(),
        best_cost: &mut best_cost,
        best_assign: &mut best_assign,
    };
    search.branch(0, 0.0)?;
    drop(search);

    let assignment = Assignment::new(inst, best_assign)?;
    Ok((assignment, best_cost))
}

struct FixedSearch<'a> {
    supports: &'a [Vec<(f64, f64)>],
    order: &'a [usize],
    means: &'a [f64],
    total_mean: f64,
    cfg: &'a EvalConfig,
    machines: usize,
    machine_of: Vec<usize>,
    pmfs: Vec<WorkloadPmf>,
    contribs: Vec<f64>,
    mean_loads: Vec<f64>,
    best_cost: &'a mut f64,
    best_assign: &'a mut Vec<usize>,
}

impl FixedSearch<'_> {
    fn branch(&mut self, depth: usize, assigned_mean: f64) -> Result<()> {
        let used = self.pmfs.len();
        if depth == self.order.len() {
            let cost: f64 = self.contribs.iter().sum::<f64>() + (self.machines - used) as f64;
            if cost < *self.best_cost {
                *self.best_cost = cost;
                self.best_assign.clone_from(&self.machine_of);
            }
            return Ok(());
        }
        let job = self.order[depth];
        let remaining = self.total_mean - assigned_mean;
        // machine i == used opens a fresh machine; relabeling classes are
        // enumerated once by restricted growth
        let limit = (used + 1).min(self.machines);
        for i in 0..limit {
            let mut saved = None;
            if i < used {
                let pmf = self.pmfs[i].convolve_points(&self.supports[job], self.cfg.max_support)?;
                let contrib = pmf.expected_cost();
                saved = Some((
                    std::mem::replace(&mut self.pmfs[i], pmf),
                    std::mem::replace(&mut self.contribs[i], contrib),
                    self.mean_loads[i],
                ));
                self.mean_loads[i] += self.means[job];
            } else {
                let pmf = WorkloadPmf::from_points(self.supports[job].clone())?;
                self.contribs.push(pmf.expected_cost());
                self.pmfs.push(pmf);
                self.mean_loads.push(self.means[job]);
            }
            let now_used = self.pmfs.len();

            // two lower bounds: per-machine monotonicity of E[max(X,1)] and
            // the mean-level overflow that the remaining mass must cause
            let contrib_sum: f64 = self.contribs.iter().sum();
            let lb1 = contrib_sum + (self.machines - now_used) as f64;
            let excess: f64 = self.mean_loads.iter().map(|&x| (x - 1.0).max(0.0)).sum();
            let free: f64 = self.mean_loads.iter().map(|&x| (1.0 - x).max(0.0)).sum::<f64>()
                + (self.machines - now_used) as f64;
            let next_remaining = remaining - self.means[job];
            let lb2 = self.machines as f64 + excess + (next_remaining - free).max(0.0);

            if lb1.max(lb2) < *self.best_cost - 1e-12 {
                self.machine_of[job] = i;
                self.branch(depth + 1, assigned_mean + self.means[job])?;
            }

            if let Some((old_pmf, old_contrib, old_mean)) = saved {
                self.pmfs[i] = old_pmf;
                self.contribs[i] = old_contrib;
                self.mean_loads[i] = old_mean;
            } else {
                self.pmfs.pop();
                self.contribs.pop();
                self.mean_loads.pop();
            }
        }
        Ok(())
    }
}

/// Fractional-assignment optimum `OPT_ℛ = E[max(Σ_j P_j, m)]` by exact
/// convolution of all jobs.
pub fn opt_fractional(inst: &Instance, cfg: &EvalConfig) -> Result<f64> {
    let jobs: Vec<&Distribution> = inst.jobs().iter().collect();
    let pmf = machine_pmf(&jobs, cfg)?;
    Ok(pmf.expected_max_with(inst.machines() as f64))
}
