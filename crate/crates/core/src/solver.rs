//! Search driver: construction, destroy-repair batches, acceptance, local
//! search and termination.

use std::collections::BTreeSet;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alns::{destroy, destroy_repair, repair_gi, AlnsParams, AlnsState, Candidate, DestroyOp, Outcome};
use crate::error::{Error, Result};
use crate::instance::{Instance, NodeId};
use crate::ls::{local_search, LsParams, LsStats, MarkovState, PheromoneMatrix};
use crate::solution::Solution;

/// Which problem the search treats the instance as.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Mixed fleet with SDL delivery.
    #[default]
    MttdMvrp,
    /// Home delivery by fuel vehicles only.
    DmTdvrptw,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    #[default]
    AlnsLs,
    /// Destroy-repair only.
    Alns,
    /// Local search alone, rerun on the incumbent every iteration.
    Ls,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcceptanceParams {
    /// Initial temperature as a share of the initial cost.
    pub t0_factor: f64,
    pub cooling: f64,
    /// Penalty per reused route as a share of the initial cost.
    pub diversity_factor: f64,
}

impl Default for AcceptanceParams {
    fn default() -> Self {
        AcceptanceParams {
            t0_factor: 0.05,
            cooling: 0.999,
            diversity_factor: 0.01,
        }
    }
}

/// Iteration cap used when no termination criterion is configured.
pub const DEFAULT_MAX_ITERATIONS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub seed: u64,
    /// Worker threads for candidate generation.
    pub threads: usize,
    /// Candidates generated per iteration.
    pub batch_size: usize,
    /// Seconds.
    pub time_limit: Option<f64>,
    pub max_iterations: Option<usize>,
    pub stagnation_iterations: Option<usize>,
    /// Seconds without a new best.
    pub stagnation_seconds: Option<f64>,
    pub mode: Mode,
    pub variant: Variant,
    pub construction_attempts: usize,
    /// Store wall-clock times in the search record (makes it run-dependent).
    pub record_timing: bool,
    pub alns: AlnsParams,
    pub ls: LsParams,
    pub acceptance: AcceptanceParams,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            seed: 1,
            threads: 1,
            batch_size: 1,
            time_limit: None,
            max_iterations: None,
            stagnation_iterations: None,
            stagnation_seconds: None,
            mode: Mode::default(),
            variant: Variant::default(),
            construction_attempts: 50,
            record_timing: false,
            alns: AlnsParams::default(),
            ls: LsParams::default(),
            acceptance: AcceptanceParams::default(),
        }
    }
}

impl SolverConfig {
    pub fn from_toml(text: &str) -> Result<SolverConfig> {
        let cfg: SolverConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<SolverConfig> {
        let text = std::fs::read_to_string(path)?;
        SolverConfig::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Iteration cap in force; [`DEFAULT_MAX_ITERATIONS`] when no
    /// termination criterion is configured at all.
    pub fn iteration_cap(&self) -> Option<usize> {
        let none_set = self.time_limit.is_none()
            && self.max_iterations.is_none()
            && self.stagnation_iterations.is_none()
            && self.stagnation_seconds.is_none();
        if none_set {
            Some(DEFAULT_MAX_ITERATIONS)
        } else {
            self.max_iterations
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.threads == 0 || self.batch_size == 0 {
            return Err(Error::Config("threads and batch_size must be at least 1".into()));
        }
        if self.time_limit.is_some_and(|t| !(t >= 0.0)) || self.stagnation_seconds.is_some_and(|t| !(t >= 0.0)) {
            return Err(Error::Config("time limits must be non-negative".into()));
        }
        if self.construction_attempts == 0 {
            return Err(Error::Config("construction_attempts must be at least 1".into()));
        }
        let a = &self.acceptance;
        if !(a.t0_factor >= 0.0 && a.cooling > 0.0 && a.cooling <= 1.0 && a.diversity_factor >= 0.0) {
            return Err(Error::Config("invalid acceptance parameters".into()));
        }
        self.alns.validate()?;
        self.ls.validate()
    }
}

/// One line of the search log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub removed: usize,
    pub best_cost: f64,
    pub incumbent_cost: f64,
    pub accepted: usize,
    pub outcome: Outcome,
    pub no_improvement: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchRecord {
    pub initial_cost: f64,
    pub iterations: Vec<IterationLog>,
    /// Iteration that produced the returned solution (0 = construction).
    pub best_iteration: usize,
    /// Times each destroy / repair operator received a non-zero share.
    pub destroy_calls: [u64; 5],
    pub repair_calls: [u64; 5],
    pub destroy_weights: Vec<f64>,
    pub repair_weights: Vec<f64>,
    pub ls: LsStats,
    pub markov_weights: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub best: Solution,
    pub record: SearchRecord,
    /// Seconds.
    pub elapsed: f64,
    /// Seconds until the returned solution was first found.
    pub time_to_best: f64,
}

/// Greedy construction; when customers remain, a random destroy operator
/// clears about half of the routed ones and construction repeats.
pub fn initial_solution<R: Rng + ?Sized>(
    inst: &Instance,
    attempts: usize,
    params: &AlnsParams,
    rng: &mut R,
) -> Result<Solution> {
    construct(inst, attempts, params, rng, None)
}

fn construct<R: Rng + ?Sized>(
    inst: &Instance,
    attempts: usize,
    params: &AlnsParams,
    rng: &mut R,
    deadline: Option<Instant>,
) -> Result<Solution> {
    let mut sol = Solution::empty(inst);
    for attempt in 1..=attempts.max(1) {
        if attempt > 1 && deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(Error::TimeoutWithoutFeasible);
        }
        repair_gi(inst, &mut sol, usize::MAX);
        if sol.is_complete() {
            return Ok(sol);
        }
        if attempt == attempts.max(1) {
            break;
        }
        let k = (inst.n() / 2).max(1).min(sol.routed_count());
        let op = DestroyOp::ALL[rng.random_range(0..DestroyOp::ALL.len())];
        destroy(op, inst, &mut sol, k, params, rng);
    }
    Err(Error::ConstructionFailed {
        attempts: attempts.max(1),
        unassigned: sol.unassigned().len(),
    })
}

/// Acceptance test. Improvements are always taken; otherwise the cost
/// increase plus `gamma` per route shared with the incumbent is accepted
/// with probability `exp(-score / temperature)`.
pub fn rate_candidate(
    candidate_cost: f64,
    incumbent_cost: f64,
    reused_routes: usize,
    temperature: f64,
    gamma: f64,
    u: f64,
) -> bool {
    if candidate_cost < incumbent_cost - 1e-9 {
        return true;
    }
    let score = candidate_cost - incumbent_cost + gamma * reused_routes as f64;
    if temperature <= 0.0 {
        return score <= 0.0;
    }
    u < (-score / temperature).exp()
}

fn arcs(inst: &Instance, sol: &Solution) -> BTreeSet<(NodeId, NodeId)> {
    sol.routes()
        .iter()
        .filter(|r| !r.is_empty())
        .flat_map(|r| {
            let p = r.nodes(inst);
            p.windows(2).map(|w| (w[0], w[1])).collect::<Vec<_>>()
        })
        .collect()
}

struct Clock {
    start: Instant,
    deadline: Option<Instant>,
}

impl Clock {
    fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}

/// Runs the configured search. In [`Mode::DmTdvrptw`] the instance is first
/// reduced to home delivery by fuel vehicles and the returned solution
/// refers to that reduced instance.
pub fn solve(inst: &Instance, cfg: &SolverConfig) -> Result<SolveOutcome> {
    cfg.validate()?;
    match cfg.mode {
        Mode::MttdMvrp => run(inst, cfg),
        Mode::DmTdvrptw => run(&inst.to_dm_tdvrptw()?, cfg),
    }
}

fn run(inst: &Instance, cfg: &SolverConfig) -> Result<SolveOutcome> {
    let start = Instant::now();
    let clock = Clock {
        start,
        deadline: cfg.time_limit.map(|t| start + Duration::from_secs_f64(t)),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let uses_ls = cfg.variant != Variant::Alns;
    let mut markov = MarkovState::new();
    let mut pheromone = PheromoneMatrix::new(inst.node_count(), &cfg.ls);
    let mut record = SearchRecord::default();

    let mut incumbent = construct(inst, cfg.construction_attempts, &cfg.alns, &mut rng, clock.deadline)?;
    record.initial_cost = incumbent.total_cost();
    if uses_ls {
        let mut r = ChaCha8Rng::seed_from_u64(rng.next_u64());
        incumbent = local_search(inst, incumbent, &mut markov, &mut pheromone, &cfg.ls, &mut r, clock.deadline, &mut record.ls);
    }
    let mut best = incumbent.clone();
    let mut time_to_best = clock.elapsed();
    let mut last_best_at = time_to_best;
    let scale = if record.initial_cost > 0.0 { record.initial_cost } else { 1.0 };
    let mut temperature = cfg.acceptance.t0_factor * scale;
    let gamma = cfg.acceptance.diversity_factor * scale;
    let mut state = AlnsState::new(cfg.alns.clone());
    let pool = if cfg.batch_size > 1 && cfg.threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.threads)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?,
        )
    } else {
        None
    };

    let cap = cfg.iteration_cap();
    let mut iteration = 0;
    loop {
        if cap.is_some_and(|m| iteration >= m)
            || clock.deadline.is_some_and(|d| Instant::now() >= d)
            || cfg.stagnation_iterations.is_some_and(|s| state.no_improvement >= s)
            || cfg.stagnation_seconds.is_some_and(|s| clock.elapsed() - last_best_at >= s)
        {
            break;
        }
        iteration += 1;
        let mut iter_rng = ChaCha8Rng::seed_from_u64(rng.next_u64());
        let mut outcome_of_batch = Outcome::None;
        let mut accepted: Vec<Solution> = Vec::new();
        let mut removed = 0;

        if cfg.variant == Variant::Ls {
            let s = local_search(inst, incumbent.clone(), &mut markov, &mut pheromone, &cfg.ls, &mut iter_rng, clock.deadline, &mut record.ls);
            accepted.push(s);
        } else {
            let size = state.perturbation_size(inst.n());
            let seeds: Vec<u64> = (0..cfg.batch_size).map(|_| iter_rng.next_u64()).collect();
            let make = |seed: &u64| {
                let mut r = ChaCha8Rng::seed_from_u64(*seed);
                destroy_repair(inst, &incumbent, &state, size, &mut r)
            };
            let cands: Vec<Candidate> = match &pool {
                Some(p) => p.install(|| seeds.par_iter().map(make).collect()),
                None => seeds.iter().map(make).collect(),
            };
            for cand in cands {
                removed += cand.removed;
                for a in &cand.destroy_usage {
                    record.destroy_calls[a.op] += (a.count > 0) as u64;
                }
                for a in &cand.repair_usage {
                    record.repair_calls[a.op] += (a.count > 0) as u64;
                }
                if !cand.solution.is_feasible() {
                    continue;
                }
                let mut s = cand.solution;
                if s.total_cost() < incumbent.total_cost() - 1e-9 {
                    let (old, new) = (arcs(inst, &incumbent), arcs(inst, &s));
                    let broken: Vec<_> = old.difference(&new).copied().collect();
                    let built: Vec<_> = new.difference(&old).copied().collect();
                    pheromone.reinforce(&broken, &built, &cfg.ls);
                }
                let reused = s.route_sequences().count() - s.new_routes_against(&incumbent);
                let u: f64 = iter_rng.random();
                let accept = rate_candidate(s.total_cost(), incumbent.total_cost(), reused, temperature, gamma, u);
                if accept && uses_ls {
                    s = local_search(inst, s, &mut markov, &mut pheromone, &cfg.ls, &mut iter_rng, clock.deadline, &mut record.ls);
                }
                let outcome = if s.total_cost() < best.total_cost() - 1e-9 {
                    Outcome::GlobalBest
                } else if s.total_cost() < incumbent.total_cost() - 1e-9 {
                    Outcome::IncumbentImproving
                } else {
                    Outcome::None
                };
                state.adapt_weights(outcome, &cand.destroy_usage, &cand.repair_usage, size.max(1));
                if accept {
                    accepted.push(s);
                }
            }
        }

        let accepted_count = accepted.len();
        if let Some(k) = (0..accepted.len()).min_by(|&a, &b| accepted[a].total_cost().total_cmp(&accepted[b].total_cost())) {
            let chosen = accepted.swap_remove(k);
            if chosen.total_cost() < best.total_cost() - 1e-9 {
                best = chosen.clone();
                outcome_of_batch = Outcome::GlobalBest;
                time_to_best = clock.elapsed();
                last_best_at = time_to_best;
                record.best_iteration = iteration;
            } else if chosen.total_cost() < incumbent.total_cost() - 1e-9 {
                outcome_of_batch = Outcome::IncumbentImproving;
            }
            if cfg.variant == Variant::Ls {
                incumbent = best.clone();
            } else {
                incumbent = chosen;
            }
        }
        if outcome_of_batch == Outcome::GlobalBest {
            state.no_improvement = 0;
        } else {
            state.no_improvement += 1;
        }
        temperature *= cfg.acceptance.cooling;
        record.iterations.push(IterationLog {
            iteration,
            removed,
            best_cost: best.total_cost(),
            incumbent_cost: incumbent.total_cost(),
            accepted: accepted_count,
            outcome: outcome_of_batch,
            no_improvement: state.no_improvement,
            elapsed: cfg.record_timing.then(|| clock.elapsed()),
        });
    }

    record.destroy_weights = state.destroy.weights.clone();
    record.repair_weights = state.repair.weights.clone();
    record.markov_weights = markov.weights.clone();
    Ok(SolveOutcome {
        best,
        record,
        elapsed: clock.elapsed(),
        time_to_best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn improvements_always_accepted() {
        assert!(rate_candidate(9.0, 10.0, 5, 0.0, 1.0, 0.999));
    }

    #[test]
    fn zero_temperature_rejects_worse() {
        assert!(!rate_candidate(11.0, 10.0, 0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn config_defaults_round_trip() {
        let cfg = SolverConfig::default();
        let back = SolverConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn config_rejects_unknown_keys_and_no_termination() {
        assert!(SolverConfig::from_toml("bogus = 1").is_err());
        assert!(SolverConfig::from_toml("threads = 0").is_err());
        assert_eq!(SolverConfig::default().iteration_cap(), Some(DEFAULT_MAX_ITERATIONS));
        let timed = SolverConfig::from_toml("time_limit = 2.5").unwrap();
        assert_eq!(timed.iteration_cap(), None);
    }
}
