//! Destroy / repair operators and their adaptive selection.
//!
//! Each iteration removes `perturbation_size` customers. The removal budget
//! is split over destroy operators by [`allocate`]: operators are drawn one
//! position at a time with probability proportional to their effectiveness
//! at that position, and each drawn operator takes an exponentially
//! distributed share of the remaining budget whose mean grows with its
//! weight. Repairs are allocated the same way over the removed customers.

mod destroy;
mod repair;

pub use destroy::{closeness, destroy, destroy_dis_r, destroy_dur_r, destroy_rr, destroy_sha_r, destroy_seg_r};
pub use repair::{
    candidate_routes, insertion_options, repair, repair_gi, repair_r2i, repair_ri, repair_rki, repair_si,
    InsertOption,
};

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::instance::Instance;
use crate::solution::Solution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DestroyOp {
    /// Distance-margin removal.
    DisR,
    /// Duration-margin removal.
    DurR,
    /// Random removal.
    RR,
    /// Shaw (relatedness) removal.
    ShaR,
    /// Segment removal.
    SegR,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RepairOp {
    /// Greedy insertion.
    GI,
    /// Regret-2 insertion.
    R2I,
    /// Regret-k insertion.
    RkI,
    /// Random-node insertion.
    RI,
    /// Segment insertion.
    SI,
}

impl DestroyOp {
    pub const ALL: [DestroyOp; 5] = [DestroyOp::DisR, DestroyOp::DurR, DestroyOp::RR, DestroyOp::ShaR, DestroyOp::SegR];
}

impl RepairOp {
    pub const ALL: [RepairOp; 5] = [RepairOp::GI, RepairOp::R2I, RepairOp::RkI, RepairOp::RI, RepairOp::SI];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlnsParams {
    pub r_min: f64,
    pub r_max: f64,
    pub alpha: f64,
    pub alpha1: f64,
    pub beta1: f64,
    pub alpha2: f64,
    pub beta2: f64,
    /// Floor for weights and effectiveness values.
    pub eps_w: f64,
    pub shaw_alpha_w: f64,
    pub shaw_alpha_v: f64,
    /// `k` of the regret-k repair.
    pub regret_k: usize,
    /// Longest segment built by the segment repair.
    pub segment_max: usize,
}

impl Default for AlnsParams {
    fn default() -> Self {
        AlnsParams {
            r_min: 0.1,
            r_max: 0.4,
            alpha: 0.01,
            alpha1: 1.0,
            beta1: 1.0,
            alpha2: 0.4,
            beta2: 0.4,
            eps_w: 1e-3,
            shaw_alpha_w: 1.0,
            shaw_alpha_v: 1.0,
            regret_k: 3,
            segment_max: 3,
        }
    }
}

impl AlnsParams {
    pub fn validate(&self) -> crate::Result<()> {
        if !(0.0 <= self.r_min && self.r_min <= self.r_max && self.r_max <= 1.0) || self.alpha < 0.0 {
            return Err(crate::Error::Config("need 0 <= r_min <= r_max <= 1 and alpha >= 0".into()));
        }
        if self.regret_k == 0 || self.segment_max == 0 || !(self.eps_w > 0.0) {
            return Err(crate::Error::Config("regret_k, segment_max and eps_w must be positive".into()));
        }
        Ok(())
    }
}

/// Weights `w_i` and the position-effectiveness table `E[pos][i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorPool {
    pub weights: Vec<f64>,
    pub effectiveness: Vec<Vec<f64>>,
}

impl OperatorPool {
    pub fn uniform(ops: usize) -> Self {
        OperatorPool {
            weights: vec![1.0; ops],
            effectiveness: vec![vec![1.0; ops]; ops],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// One operator's slot in an allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub op: usize,
    pub count: usize,
    pub position: usize,
}

/// Splits `total` over the pool's operators. Counts sum to `total`.
pub fn allocate<R: Rng + ?Sized>(pool: &OperatorPool, total: usize, rng: &mut R) -> Vec<Allocation> {
    let mut remaining_ops: Vec<usize> = (0..pool.len()).collect();
    let mut remaining = total;
    let mut out = Vec::new();
    let mut position = 0;
    while remaining > 0 && !remaining_ops.is_empty() {
        let row = &pool.effectiveness[position.min(pool.effectiveness.len() - 1)];
        let mass: f64 = remaining_ops.iter().map(|&i| row[i]).sum();
        let mut u = rng.random::<f64>() * mass;
        let mut pick = remaining_ops.len() - 1;
        for (k, &i) in remaining_ops.iter().enumerate() {
            if u < row[i] {
                pick = k;
                break;
            }
            u -= row[i];
        }
        let op = remaining_ops.remove(pick);
        let count = if remaining_ops.is_empty() {
            remaining
        } else {
            let others: f64 = remaining_ops.iter().map(|&j| pool.weights[j]).sum();
            let mean = pool.weights[op] / others;
            let e: f64 = Exp1.sample(rng);
            let share = (mean * e).clamp(0.0, 1.0);
            ((share * remaining as f64).round() as usize).min(remaining)
        };
        out.push(Allocation { op, count, position });
        remaining -= count;
        position += 1;
    }
    out
}

/// How a candidate compares with the best and incumbent costs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    GlobalBest,
    IncumbentImproving,
    None,
}

/// Rewards the operators used, in proportion to their share of the budget.
pub fn adapt(pool: &mut OperatorPool, outcome: Outcome, usage: &[Allocation], total: usize, params: &AlnsParams) {
    let (a, b) = match outcome {
        Outcome::GlobalBest => (params.alpha1, params.beta1),
        Outcome::IncumbentImproving => (params.alpha2, params.beta2),
        Outcome::None => return,
    };
    if total == 0 {
        return;
    }
    for u in usage {
        let r = u.count as f64 / total as f64;
        pool.weights[u.op] = (pool.weights[u.op] + a * r).max(params.eps_w);
        let pos = u.position.min(pool.effectiveness.len() - 1);
        let e = &mut pool.effectiveness[pos][u.op];
        *e = (*e + b * r).max(params.eps_w);
    }
}

/// Adaptive ALNS state: both operator pools and the no-improvement counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlnsState {
    pub params: AlnsParams,
    pub destroy: OperatorPool,
    pub repair: OperatorPool,
    /// Consecutive iterations without a new global best.
    pub no_improvement: usize,
}

impl AlnsState {
    pub fn new(params: AlnsParams) -> Self {
        AlnsState {
            params,
            destroy: OperatorPool::uniform(DestroyOp::ALL.len()),
            repair: OperatorPool::uniform(RepairOp::ALL.len()),
            no_improvement: 0,
        }
    }

    /// `round(min(r_max, r_min + alpha * N-I) * n)`, at least 1 when `n >= 1`.
    pub fn perturbation_size(&self, n: usize) -> usize {
        perturbation_size(&self.params, self.no_improvement, n)
    }

    pub fn allocate_removals<R: Rng + ?Sized>(&self, total: usize, rng: &mut R) -> Vec<Allocation> {
        allocate(&self.destroy, total, rng)
    }

    pub fn allocate_insertions<R: Rng + ?Sized>(&self, total: usize, rng: &mut R) -> Vec<Allocation> {
        allocate(&self.repair, total, rng)
    }

    pub fn adapt_weights(&mut self, outcome: Outcome, destroy_usage: &[Allocation], repair_usage: &[Allocation], total: usize) {
        adapt(&mut self.destroy, outcome, destroy_usage, total, &self.params);
        adapt(&mut self.repair, outcome, repair_usage, total, &self.params);
    }
}

pub fn perturbation_size(params: &AlnsParams, no_improvement: usize, n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    let rate = params.r_max.min(params.r_min + params.alpha * no_improvement as f64);
    ((rate * n as f64).round() as usize).clamp(1, n)
}

/// Result of one destroy-repair round on a copy of the incumbent.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub solution: Solution,
    pub removed: usize,
    pub destroy_usage: Vec<Allocation>,
    pub repair_usage: Vec<Allocation>,
}

/// Destroys `size` customers of `incumbent` and reinserts them. Customers
/// left over by the allocated repairs get a final greedy pass; the result
/// may still be partial.
pub fn destroy_repair<R: Rng + ?Sized>(
    inst: &Instance,
    incumbent: &Solution,
    state: &AlnsState,
    size: usize,
    rng: &mut R,
) -> Candidate {
    let mut sol = incumbent.clone();
    let destroy_usage = state.allocate_removals(size, rng);
    let mut removed = 0;
    for a in &destroy_usage {
        if a.count > 0 {
            removed += destroy(DestroyOp::ALL[a.op], inst, &mut sol, a.count, &state.params, rng).len();
        }
    }
    let repair_usage = state.allocate_insertions(removed, rng);
    for a in &repair_usage {
        if a.count > 0 {
            repair(RepairOp::ALL[a.op], inst, &mut sol, a.count, &state.params, rng);
        }
    }
    if !sol.is_complete() {
        repair_gi(inst, &mut sol, usize::MAX);
    }
    Candidate {
        solution: sol,
        removed,
        destroy_usage,
        repair_usage,
    }
}
