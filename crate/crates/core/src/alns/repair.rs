use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use super::{AlnsParams, RepairOp};
use crate::eval::{evaluate_visits, EvalResult};
use crate::instance::{Instance, NodeId, VehicleType};
use crate::solution::Solution;

/// A feasible way to insert one customer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InsertOption {
    pub delta: f64,
    pub route: usize,
    pub pos: usize,
    pub sdl: bool,
    pub eval: EvalResult,
}

fn option_order(a: &InsertOption, b: &InsertOption) -> Ordering {
    a.delta
        .total_cmp(&b.delta)
        .then(a.route.cmp(&b.route))
        .then(a.pos.cmp(&b.pos))
        .then(a.sdl.cmp(&b.sdl))
}

/// Non-empty routes plus the first idle vehicle of each type; idle vehicles
/// of one type are interchangeable, so one stands for all.
pub fn candidate_routes(sol: &Solution) -> Vec<usize> {
    let mut seen = [false; 2];
    let mut out = Vec::new();
    for (r, route) in sol.routes().iter().enumerate() {
        if !route.is_empty() {
            out.push(r);
        } else if !seen[route.vehicle.vtype.slot()] {
            seen[route.vehicle.vtype.slot()] = true;
            out.push(r);
        }
    }
    out
}

fn options_in_route(inst: &Instance, sol: &Solution, customer: usize, r: usize) -> Vec<InsertOption> {
    let route = sol.route(r);
    let vtype = route.vehicle.vtype;
    let fleet = inst.fleet(vtype);
    let mut out = Vec::new();
    if sol.eval(r).load + inst.customer(customer).demand > fleet.capacity + 1e-9 {
        return out;
    }
    let old = sol.route_cost(r);
    for sdl in [false, true] {
        let node = inst.node_for(customer, sdl);
        if !inst.allows(vtype, node) {
            continue;
        }
        for pos in 0..=route.visits.len() {
            let mut visits = route.visits.clone();
            visits.insert(pos, node);
            let eval = evaluate_visits(inst, vtype, &visits);
            if eval.feasible {
                out.push(InsertOption {
                    delta: eval.min_duration + fleet.fixed_cost - old,
                    route: r,
                    pos,
                    sdl,
                    eval,
                });
            }
        }
    }
    out
}

/// Every feasible insertion of `customer`, cheapest first.
pub fn insertion_options(inst: &Instance, sol: &Solution, customer: usize) -> Vec<InsertOption> {
    let mut out: Vec<InsertOption> = candidate_routes(sol)
        .into_iter()
        .flat_map(|r| options_in_route(inst, sol, customer, r))
        .collect();
    out.sort_by(option_order);
    out
}

/// Insertion options of the waiting customers, refreshed per route as the
/// solution changes.
struct InsertionCache {
    per_route: BTreeMap<usize, BTreeMap<usize, Vec<InsertOption>>>,
}

impl InsertionCache {
    fn build(inst: &Instance, sol: &Solution) -> Self {
        let routes = candidate_routes(sol);
        let per_route = sol
            .unassigned()
            .iter()
            .map(|&c| (c, routes.iter().map(|&r| (r, options_in_route(inst, sol, c, r))).collect()))
            .collect();
        InsertionCache { per_route }
    }

    fn refresh(&mut self, inst: &Instance, sol: &Solution, changed: usize) {
        let routes: BTreeSet<usize> = candidate_routes(sol).into_iter().collect();
        for (&c, map) in self.per_route.iter_mut() {
            map.retain(|r, _| routes.contains(r) && *r != changed);
            for &r in &routes {
                map.entry(r).or_insert_with(|| options_in_route(inst, sol, c, r));
            }
        }
    }

    fn options(&self, customer: usize) -> Vec<InsertOption> {
        let mut v: Vec<InsertOption> = self.per_route[&customer].values().flatten().copied().collect();
        v.sort_by(option_order);
        v
    }

    fn best(&self, customer: usize) -> Option<InsertOption> {
        self.per_route[&customer]
            .values()
            .flatten()
            .min_by(|a, b| option_order(a, b))
            .copied()
    }

    /// Cheapest option per (route, mode), in route order.
    fn route_bests(&self, customer: usize) -> Vec<InsertOption> {
        self.per_route[&customer]
            .values()
            .flat_map(|opts| {
                [false, true].into_iter().filter_map(|sdl| {
                    opts.iter().filter(|o| o.sdl == sdl).min_by(|a, b| option_order(a, b)).copied()
                })
            })
            .collect()
    }

    fn waiting(&self) -> Vec<usize> {
        self.per_route.keys().copied().collect()
    }

    fn insert(&mut self, inst: &Instance, sol: &mut Solution, customer: usize, opt: InsertOption) {
        apply(inst, sol, customer, &opt);
        self.per_route.remove(&customer);
        self.refresh(inst, sol, opt.route);
    }
}

fn apply(inst: &Instance, sol: &mut Solution, customer: usize, opt: &InsertOption) {
    let mut visits = sol.route(opt.route).visits.clone();
    visits.insert(opt.pos, inst.node_for(customer, opt.sdl));
    sol.set_route_evaluated(inst, opt.route, visits, opt.eval);
    sol.mark_assigned(customer);
}

/// Runs `op` for up to `count` insertions; returns how many succeeded.
pub fn repair<R: Rng + ?Sized>(
    op: RepairOp,
    inst: &Instance,
    sol: &mut Solution,
    count: usize,
    params: &AlnsParams,
    rng: &mut R,
) -> usize {
    match op {
        RepairOp::GI => repair_gi(inst, sol, count),
        RepairOp::R2I => repair_r2i(inst, sol, count),
        RepairOp::RkI => repair_rki(inst, sol, count, params.regret_k),
        RepairOp::RI => repair_ri(inst, sol, count, rng),
        RepairOp::SI => repair_si(inst, sol, count, params.segment_max),
    }
}

/// Greedy insertion: the globally cheapest (customer, position) first.
pub fn repair_gi(inst: &Instance, sol: &mut Solution, count: usize) -> usize {
    let mut cache = InsertionCache::build(inst, sol);
    let mut done = 0;
    while done < count {
        let best = cache
            .waiting()
            .into_iter()
            .filter_map(|c| cache.best(c).map(|o| (c, o)))
            .min_by(|(ca, a), (cb, b)| a.delta.total_cmp(&b.delta).then(ca.cmp(cb)));
        let Some((c, opt)) = best else { break };
        cache.insert(inst, sol, c, opt);
        done += 1;
    }
    done
}

pub fn repair_r2i(inst: &Instance, sol: &mut Solution, count: usize) -> usize {
    repair_rki(inst, sol, count, 2)
}

/// Picks the waiting customer with the largest regret
/// `sum_{j=2..k} (delta_j - delta_1)`. Customers with fewer than `k`
/// options come first, fewest options first.
fn regret_choice(cache: &InsertionCache, k: usize) -> Option<(usize, InsertOption)> {
    let mut best: Option<((u8, usize, f64, f64, usize), InsertOption)> = None;
    for c in cache.waiting() {
        let opts = cache.options(c);
        if opts.is_empty() {
            continue;
        }
        let d1 = opts[0].delta;
        let key = if opts.len() < k {
            (0u8, opts.len(), 0.0, d1, c)
        } else {
            let regret: f64 = opts[1..k].iter().map(|o| o.delta - d1).sum();
            (1u8, 0, -regret, d1, c)
        };
        let better = match &best {
            None => true,
            Some((b, _)) => {
                key.0
                    .cmp(&b.0)
                    .then(key.1.cmp(&b.1))
                    .then(key.2.total_cmp(&b.2))
                    .then(key.3.total_cmp(&b.3))
                    .then(key.4.cmp(&b.4))
                    == Ordering::Less
            }
        };
        if better {
            best = Some((key, opts[0]));
        }
    }
    best.map(|(k, o)| (k.4, o))
}

/// Regret-k insertion; `k = 1` reproduces greedy insertion.
pub fn repair_rki(inst: &Instance, sol: &mut Solution, count: usize, k: usize) -> usize {
    let mut cache = InsertionCache::build(inst, sol);
    let mut done = 0;
    while done < count {
        let Some((c, opt)) = regret_choice(&cache, k.max(1)) else { break };
        cache.insert(inst, sol, c, opt);
        done += 1;
    }
    done
}

/// Random waiting customer into a random (route, delivery mode) pair that
/// can take it, at the cheapest position there.
pub fn repair_ri<R: Rng + ?Sized>(inst: &Instance, sol: &mut Solution, count: usize, rng: &mut R) -> usize {
    let mut cache = InsertionCache::build(inst, sol);
    let mut done = 0;
    while done < count {
        let open: Vec<(usize, Vec<InsertOption>)> = cache
            .waiting()
            .into_iter()
            .map(|c| (c, cache.route_bests(c)))
            .filter(|(_, v)| !v.is_empty())
            .collect();
        if open.is_empty() {
            break;
        }
        let (c, routes) = &open[rng.random_range(0..open.len())];
        let opt = routes[rng.random_range(0..routes.len())];
        cache.insert(inst, sol, *c, opt);
        done += 1;
    }
    done
}

/// Segment insertion: the regret-2 customer starts a segment, extended by
/// the nearest insertable waiting customers (each in the mode of its own
/// best option), and the whole segment goes to its cheapest feasible
/// position. Segments that fit nowhere are shortened from the back.
pub fn repair_si(inst: &Instance, sol: &mut Solution, count: usize, segment_max: usize) -> usize {
    let mut done = 0;
    while done < count {
        let cache = InsertionCache::build(inst, sol);
        let Some((first, first_opt)) = regret_choice(&cache, 2) else { break };
        let target = (count - done).min(segment_max.max(1));
        let mut seg: Vec<(usize, NodeId)> = vec![(first, inst.node_for(first, first_opt.sdl))];
        let mut pool: Vec<(usize, NodeId)> = cache
            .waiting()
            .into_iter()
            .filter(|&c| c != first)
            .filter_map(|c| cache.best(c).map(|o| (c, inst.node_for(c, o.sdl))))
            .collect();
        while seg.len() < target && !pool.is_empty() {
            let last = seg.last().unwrap().1;
            let (k, _) = pool
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    inst.distance(last, a.1)
                        .total_cmp(&inst.distance(last, b.1))
                        .then(a.0.cmp(&b.0))
                })
                .unwrap();
            seg.push(pool.remove(k));
        }
        let mut placed = false;
        while !seg.is_empty() {
            if let Some((r, pos, eval)) = best_segment_position(inst, sol, &seg) {
                let mut visits = sol.route(r).visits.clone();
                visits.splice(pos..pos, seg.iter().map(|s| s.1));
                sol.set_route_evaluated(inst, r, visits, eval);
                for &(c, _) in &seg {
                    sol.mark_assigned(c);
                }
                done += seg.len();
                placed = true;
                break;
            }
            seg.pop();
        }
        if !placed {
            break;
        }
    }
    done
}

fn best_segment_position(
    inst: &Instance,
    sol: &Solution,
    seg: &[(usize, NodeId)],
) -> Option<(usize, usize, EvalResult)> {
    let demand: f64 = seg.iter().map(|s| inst.customer(s.0).demand).sum();
    let mut best: Option<(f64, usize, usize, EvalResult)> = None;
    for r in candidate_routes(sol) {
        let route = sol.route(r);
        let vtype: VehicleType = route.vehicle.vtype;
        let fleet = inst.fleet(vtype);
        if sol.eval(r).load + demand > fleet.capacity + 1e-9 || seg.iter().any(|s| !inst.allows(vtype, s.1)) {
            continue;
        }
        for pos in 0..=route.visits.len() {
            let mut visits = route.visits.clone();
            visits.splice(pos..pos, seg.iter().map(|s| s.1));
            let eval = evaluate_visits(inst, vtype, &visits);
            if !eval.feasible {
                continue;
            }
            let delta = eval.min_duration + fleet.fixed_cost - sol.route_cost(r);
            if best.as_ref().is_none_or(|b| delta < b.0) {
                best = Some((delta, r, pos, eval));
            }
        }
    }
    best.map(|(_, r, p, e)| (r, p, e))
}
