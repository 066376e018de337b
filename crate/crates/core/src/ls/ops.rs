use std::collections::BTreeSet;

use rand::Rng;

use super::{LsOp, LsParams, PheromoneMatrix, IMPROVE_EPS};
use crate::alns::candidate_routes;
use crate::eval::{evaluate_visits, EvalResult};
use crate::instance::{Instance, NodeId, VehicleType};
use crate::solution::Solution;

/// Replacement visit lists for some routes, with the resulting cost change.
#[derive(Debug, Clone)]
pub struct Move {
    pub op: LsOp,
    pub changes: Vec<(usize, Vec<NodeId>, EvalResult)>,
    pub delta: f64,
}

fn arcs_of(inst: &Instance, visits: &[NodeId]) -> BTreeSet<(NodeId, NodeId)> {
    let mut path = Vec::with_capacity(visits.len() + 2);
    path.push(inst.origin());
    path.extend_from_slice(visits);
    path.push(inst.destination());
    path.windows(2).map(|w| (w[0], w[1])).collect()
}

impl Move {
    pub fn apply(self, inst: &Instance, sol: &mut Solution) {
        for (r, visits, eval) in self.changes {
            sol.set_route_evaluated(inst, r, visits, eval);
        }
    }

    fn arc_sets(&self, inst: &Instance, sol: &Solution) -> (BTreeSet<(NodeId, NodeId)>, BTreeSet<(NodeId, NodeId)>) {
        let mut old = BTreeSet::new();
        let mut new = BTreeSet::new();
        for (r, visits, _) in &self.changes {
            if !sol.route(*r).is_empty() {
                old.extend(arcs_of(inst, &sol.route(*r).visits));
            }
            if !visits.is_empty() {
                new.extend(arcs_of(inst, visits));
            }
        }
        (old, new)
    }

    /// Arcs present before the move and absent after it.
    pub fn broken_arcs(&self, inst: &Instance, sol: &Solution) -> Vec<(NodeId, NodeId)> {
        let (old, new) = self.arc_sets(inst, sol);
        old.difference(&new).copied().collect()
    }

    /// Arcs created by the move.
    pub fn built_arcs(&self, inst: &Instance, sol: &Solution) -> Vec<(NodeId, NodeId)> {
        let (old, new) = self.arc_sets(inst, sol);
        new.difference(&old).copied().collect()
    }
}

fn cost(inst: &Instance, vtype: VehicleType, visits: &[NodeId], eval: &EvalResult) -> f64 {
    if visits.is_empty() {
        0.0
    } else if eval.feasible {
        eval.min_duration + inst.fleet(vtype).fixed_cost
    } else {
        f64::INFINITY
    }
}

struct Search<'a> {
    inst: &'a Instance,
    sol: &'a Solution,
    op: LsOp,
    best: Option<Move>,
}

impl<'a> Search<'a> {
    fn new(inst: &'a Instance, sol: &'a Solution, op: LsOp) -> Self {
        Search { inst, sol, op, best: None }
    }

    fn eval(&self, r: usize, visits: &[NodeId]) -> (EvalResult, f64) {
        let vtype = self.sol.route(r).vehicle.vtype;
        let e = evaluate_visits(self.inst, vtype, visits);
        let c = cost(self.inst, vtype, visits, &e);
        (e, c)
    }

    /// Offers a single-route replacement.
    fn offer1(&mut self, r: usize, visits: Vec<NodeId>) -> bool {
        let (e, c) = self.eval(r, &visits);
        if !c.is_finite() {
            return false;
        }
        self.consider(c - self.sol.route_cost(r), vec![(r, visits, e)])
    }

    fn consider(&mut self, delta: f64, changes: Vec<(usize, Vec<NodeId>, EvalResult)>) -> bool {
        if delta < -IMPROVE_EPS && self.best.as_ref().is_none_or(|b| delta < b.delta - 1e-12) {
            self.best = Some(Move {
                op: self.op,
                changes,
                delta,
            });
            return true;
        }
        false
    }

    fn positions(&self) -> Vec<(usize, usize)> {
        self.sol
            .routes()
            .iter()
            .enumerate()
            .flat_map(|(r, route)| (0..route.visits.len()).map(move |p| (r, p)))
            .collect()
    }
}

/// Best improving move of `op`, if any.
pub fn best_move<R: Rng + ?Sized>(
    op: LsOp,
    inst: &Instance,
    sol: &Solution,
    pheromone: &PheromoneMatrix,
    params: &LsParams,
    rng: &mut R,
) -> Option<Move> {
    let mut s = Search::new(inst, sol, op);
    match op {
        LsOp::Swap => swap(&mut s),
        LsOp::Relocate => relocate(&mut s),
        LsOp::TwoOpt => two_opt(&mut s, params.first_improvement_above),
        LsOp::TwoOptStar => two_opt_star(&mut s),
        LsOp::Transform => transform(&mut s),
        LsOp::Ant => ant(&mut s, pheromone, params.ant_trials, rng),
    }
    s.best
}

fn swap(s: &mut Search) {
    let pos = s.positions();
    for a in 0..pos.len() {
        for b in a + 1..pos.len() {
            let (r1, p1) = pos[a];
            let (r2, p2) = pos[b];
            if r1 == r2 {
                let mut v = s.sol.route(r1).visits.clone();
                v.swap(p1, p2);
                s.offer1(r1, v);
                continue;
            }
            let (t1, t2) = (s.sol.route(r1).vehicle.vtype, s.sol.route(r2).vehicle.vtype);
            let n1 = s.sol.route(r1).visits[p1];
            let n2 = s.sol.route(r2).visits[p2];
            if !s.inst.allows(t1, n2) || !s.inst.allows(t2, n1) {
                continue;
            }
            let mut v1 = s.sol.route(r1).visits.clone();
            v1[p1] = n2;
            let (e1, c1) = s.eval(r1, &v1);
            if !c1.is_finite() {
                continue;
            }
            let mut v2 = s.sol.route(r2).visits.clone();
            v2[p2] = n1;
            let (e2, c2) = s.eval(r2, &v2);
            if !c2.is_finite() {
                continue;
            }
            let delta = c1 + c2 - s.sol.route_cost(r1) - s.sol.route_cost(r2);
            s.consider(delta, vec![(r1, v1, e1), (r2, v2, e2)]);
        }
    }
}

/// Moves one customer to another position, in either delivery mode.
fn relocate(s: &mut Search) {
    let targets = candidate_routes(s.sol);
    for (r, p) in s.positions() {
        let node = s.sol.route(r).visits[p];
        let c = s.inst.customer_of(node).unwrap();
        let modes = [node, s.inst.node_for(c, !s.inst.is_sdl(node))];
        let mut src = s.sol.route(r).visits.clone();
        src.remove(p);
        for (k, &m) in modes.iter().enumerate() {
            if k > 0 && !s.inst.allows(s.sol.route(r).vehicle.vtype, m) {
                continue;
            }
            for q in 0..=src.len() {
                if q != p || k > 0 {
                    let mut v = src.clone();
                    v.insert(q, m);
                    s.offer1(r, v);
                }
            }
        }
        let (se, sc) = s.eval(r, &src);
        if !sc.is_finite() {
            continue;
        }
        for &r2 in &targets {
            if r2 == r {
                continue;
            }
            let base = sc - s.sol.route_cost(r) - s.sol.route_cost(r2);
            for &m in &modes {
                if !s.inst.allows(s.sol.route(r2).vehicle.vtype, m) {
                    continue;
                }
                for q in 0..=s.sol.route(r2).visits.len() {
                    let mut v = s.sol.route(r2).visits.clone();
                    v.insert(q, m);
                    let (e2, c2) = s.eval(r2, &v);
                    if c2.is_finite() {
                        s.consider(base + c2, vec![(r, src.clone(), se), (r2, v, e2)]);
                    }
                }
            }
        }
    }
}

fn two_opt(s: &mut Search, first_improvement_above: usize) {
    for r in 0..s.sol.routes().len() {
        let len = s.sol.route(r).visits.len();
        let first = len > first_improvement_above;
        for i in 0..len.saturating_sub(1) {
            for j in i + 1..len {
                let mut v = s.sol.route(r).visits.clone();
                v[i..=j].reverse();
                if s.offer1(r, v) && first {
                    return;
                }
            }
        }
    }
}

fn two_opt_star(s: &mut Search) {
    let routes = candidate_routes(s.sol);
    for x in 0..routes.len() {
        for y in x + 1..routes.len() {
            let (r1, r2) = (routes[x], routes[y]);
            let a_vis = s.sol.route(r1).visits.clone();
            let b_vis = s.sol.route(r2).visits.clone();
            if a_vis.is_empty() && b_vis.is_empty() {
                continue;
            }
            let (t1, t2) = (s.sol.route(r1).vehicle.vtype, s.sol.route(r2).vehicle.vtype);
            let old = s.sol.route_cost(r1) + s.sol.route_cost(r2);
            let inst = s.inst;
            let ok = |t: VehicleType, v: &[NodeId]| v.iter().all(|&n| inst.allows(t, n));
            for a in 0..=a_vis.len() {
                for b in 0..=b_vis.len() {
                    if a == a_vis.len() && b == b_vis.len() {
                        continue;
                    }
                    let v1: Vec<NodeId> = a_vis[..a].iter().chain(&b_vis[b..]).copied().collect();
                    let v2: Vec<NodeId> = b_vis[..b].iter().chain(&a_vis[a..]).copied().collect();
                    // Mixed fleets: the two new routes may also trade vehicles.
                    let crossed = t1 != t2 && !(a == 0 && b == 0);
                    for (u1, u2) in [(&v1, &v2), (&v2, &v1)].into_iter().take(1 + crossed as usize) {
                        if !ok(t1, u1) || !ok(t2, u2) {
                            continue;
                        }
                        let (e1, c1) = s.eval(r1, u1);
                        if !c1.is_finite() {
                            continue;
                        }
                        let (e2, c2) = s.eval(r2, u2);
                        if !c2.is_finite() {
                            continue;
                        }
                        s.consider(c1 + c2 - old, vec![(r1, u1.clone(), e1), (r2, u2.clone(), e2)]);
                    }
                }
            }
        }
    }
}

fn transform(s: &mut Search) {
    for (r, p) in s.positions() {
        let node = s.sol.route(r).visits[p];
        let c = s.inst.customer_of(node).unwrap();
        let other = s.inst.node_for(c, !s.inst.is_sdl(node));
        if !s.inst.allows(s.sol.route(r).vehicle.vtype, other) {
            continue;
        }
        let mut v = s.sol.route(r).visits.clone();
        v[p] = other;
        s.offer1(r, v);
    }
}

fn draw_weighted<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, &w) in weights.iter().enumerate() {
        if u < w {
            return k;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Breaks two arcs of a random route, favouring low-pheromone ones, and
/// rebuilds the customers between them by following high-pheromone arcs.
/// Returns the route index and its new visit list.
pub fn ant_proposal<R: Rng + ?Sized>(
    inst: &Instance,
    sol: &Solution,
    pheromone: &PheromoneMatrix,
    rng: &mut R,
) -> Option<(usize, Vec<NodeId>)> {
    let eligible: Vec<usize> = (0..sol.routes().len())
        .filter(|&r| sol.route(r).visits.len() >= 2)
        .collect();
    if eligible.is_empty() {
        return None;
    }
    let r = eligible[rng.random_range(0..eligible.len())];
    let path = sol.route(r).nodes(inst);
    let arc_w: Vec<f64> = path.windows(2).map(|w| 1.0 / pheromone.get(w[0], w[1])).collect();
    let a = draw_weighted(&arc_w, rng);
    let mut rest = arc_w.clone();
    rest[a] = 0.0;
    let b = draw_weighted(&rest, rng);
    let (a, b) = (a.min(b), a.max(b));
    if b - a < 2 {
        return None;
    }
    let mut remaining: Vec<NodeId> = path[a + 1..=b].to_vec();
    let mut cur = path[a];
    let mut rebuilt = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let w: Vec<f64> = remaining.iter().map(|&v| pheromone.get(cur, v)).collect();
        let k = draw_weighted(&w, rng);
        cur = remaining.remove(k);
        rebuilt.push(cur);
    }
    let mut new_path = path[..=a].to_vec();
    new_path.extend(rebuilt);
    new_path.extend_from_slice(&path[b + 1..]);
    Some((r, new_path[1..new_path.len() - 1].to_vec()))
}

fn ant<R: Rng + ?Sized>(s: &mut Search, pheromone: &PheromoneMatrix, trials: usize, rng: &mut R) {
    for _ in 0..trials {
        if let Some((r, visits)) = ant_proposal(s.inst, s.sol, pheromone, rng) {
            if visits != s.sol.route(r).visits {
                s.offer1(r, visits);
            }
        }
    }
}
