//! Local search over complete feasible solutions.
//!
//! Six neighbourhoods are tried until none improves. Which one runs next
//! is drawn from a learned transition matrix: after operator `e`, operator
//! `c` is picked with probability proportional to `P[e][c]` among the
//! operators not yet known to fail on the current solution.

mod markov;
mod ops;
mod pheromone;

pub use markov::MarkovState;
pub use ops::{ant_proposal, best_move, Move};
pub use pheromone::PheromoneMatrix;

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::eval::evaluation_count;
use crate::instance::Instance;
use crate::solution::Solution;

/// Improvements smaller than this are ignored.
pub const IMPROVE_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LsOp {
    Swap,
    Relocate,
    TwoOpt,
    TwoOptStar,
    /// Switch a customer between home and SDL delivery in place.
    Transform,
    /// Pheromone-guided rebuild of a route segment.
    Ant,
}

impl LsOp {
    pub const ALL: [LsOp; 6] = [LsOp::Swap, LsOp::Relocate, LsOp::TwoOpt, LsOp::TwoOptStar, LsOp::Transform, LsOp::Ant];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LsParams {
    /// Learned operator order; uniform order when off.
    pub markov: bool,
    pub eps_plus: f64,
    pub eps_minus: f64,
    pub eps_p: f64,
    /// Smoothing of the per-operator evaluation-count estimate.
    pub cost_smoothing: f64,
    pub phi0: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    pub delta_plus: f64,
    pub rho: f64,
    pub ant_trials: usize,
    /// Routes longer than this are searched first-improvement in 2-opt.
    pub first_improvement_above: usize,
}

impl Default for LsParams {
    fn default() -> Self {
        LsParams {
            markov: true,
            eps_plus: 1.0,
            eps_minus: 0.1,
            eps_p: 1e-3,
            cost_smoothing: 0.2,
            phi0: 1.0,
            phi_min: 0.1,
            phi_max: 10.0,
            delta_plus: 0.5,
            rho: 0.9,
            ant_trials: 8,
            first_improvement_above: 100,
        }
    }
}

impl LsParams {
    pub fn validate(&self) -> crate::Result<()> {
        let ok = self.eps_plus >= 0.0
            && self.eps_minus >= 0.0
            && self.eps_p > 0.0
            && (0.0..=1.0).contains(&self.cost_smoothing)
            && 0.0 < self.phi_min
            && self.phi_min <= self.phi0
            && self.phi0 <= self.phi_max
            && (0.0..=1.0).contains(&self.rho);
        if ok {
            Ok(())
        } else {
            Err(crate::Error::Config("invalid local-search parameters".into()))
        }
    }
}

/// Per-operator invocation and success counters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LsStats {
    pub invocations: [u64; 6],
    pub successes: [u64; 6],
}

impl LsStats {
    pub fn merge(&mut self, other: &LsStats) {
        for k in 0..6 {
            self.invocations[k] += other.invocations[k];
            self.successes[k] += other.successes[k];
        }
    }
}

/// Applies improving moves until every operator fails on the current
/// solution (or the deadline passes). Incomplete or infeasible input is
/// returned unchanged.
#[allow(clippy::too_many_arguments)]
pub fn local_search<R: Rng + ?Sized>(
    inst: &Instance,
    mut sol: Solution,
    markov: &mut MarkovState,
    pheromone: &mut PheromoneMatrix,
    params: &LsParams,
    rng: &mut R,
    deadline: Option<Instant>,
    stats: &mut LsStats,
) -> Solution {
    if !sol.is_feasible() {
        return sol;
    }
    let ops = LsOp::ALL.len();
    let mut failed = [false; 6];
    let mut prev = markov.start_row();
    while failed.iter().any(|f| !f) {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            break;
        }
        let c = if params.markov {
            markov.select(prev, &failed, rng)
        } else {
            let open: Vec<usize> = (0..ops).filter(|&k| !failed[k]).collect();
            open[rng.random_range(0..open.len())]
        };
        let op = LsOp::ALL[c];
        let before = evaluation_count();
        let mv = best_move(op, inst, &sol, pheromone, params, rng);
        let spent = (evaluation_count() - before) as f64;
        stats.invocations[c] += 1;
        let lambda = markov.observe_cost(c, spent, params.cost_smoothing);
        match mv {
            Some(mv) => {
                stats.successes[c] += 1;
                let gain = -mv.delta;
                pheromone.reinforce(&mv.broken_arcs(inst, &sol), &mv.built_arcs(inst, &sol), params);
                mv.apply(inst, &mut sol);
                if params.markov {
                    markov.reward(prev, c, gain, lambda, params);
                }
                failed = [false; 6];
                prev = c;
            }
            None => {
                if params.markov {
                    markov.penalize(prev, c, lambda, params);
                }
                failed[c] = true;
            }
        }
    }
    sol
}
