use rand::seq::SliceRandom;
use rand::Rng;

use super::{AlnsParams, DestroyOp};
use crate::eval::{departure_window, evaluate_visits, EvalResult};
use crate::instance::{Instance, NodeId};
use crate::solution::Solution;

/// Runs `op`, returning the removed customers in removal order.
pub fn destroy<R: Rng + ?Sized>(
    op: DestroyOp,
    inst: &Instance,
    sol: &mut Solution,
    count: usize,
    params: &AlnsParams,
    rng: &mut R,
) -> Vec<usize> {
    match op {
        DestroyOp::DisR => destroy_dis_r(inst, sol, count),
        DestroyOp::DurR => destroy_dur_r(inst, sol, count),
        DestroyOp::RR => destroy_rr(inst, sol, count, rng),
        DestroyOp::ShaR => destroy_sha_r(inst, sol, count, params.shaw_alpha_w, params.shaw_alpha_v, rng),
        DestroyOp::SegR => destroy_seg_r(inst, sol, count, rng),
    }
}

fn locate(sol: &Solution, node: NodeId) -> Option<(usize, usize)> {
    sol.routes()
        .iter()
        .enumerate()
        .find_map(|(r, route)| route.visits.iter().position(|&v| v == node).map(|p| (r, p)))
}

fn without(visits: &[NodeId], pos: usize) -> Vec<NodeId> {
    let mut v = visits.to_vec();
    v.remove(pos);
    v
}

fn commit(inst: &Instance, sol: &mut Solution, route: usize, visits: Vec<NodeId>, eval: EvalResult, removed: &[NodeId]) {
    sol.set_route_evaluated(inst, route, visits, eval);
    for &v in removed {
        sol.mark_unassigned(inst.customer_of(v).expect("customer node"));
    }
}

/// Removes `node` if the shortened route stays feasible.
fn try_remove(inst: &Instance, sol: &mut Solution, node: NodeId) -> Option<usize> {
    let (r, pos) = locate(sol, node)?;
    let route = sol.route(r);
    let visits = without(&route.visits, pos);
    let eval = evaluate_visits(inst, route.vehicle.vtype, &visits);
    if !eval.feasible {
        return None;
    }
    commit(inst, sol, r, visits, eval, &[node]);
    inst.customer_of(node)
}

fn routed_nodes(sol: &Solution) -> Vec<NodeId> {
    sol.routes().iter().flat_map(|r| r.visits.iter().copied()).collect()
}

/// Removes, one at a time, the customer whose removal shortens total
/// distance the most.
pub fn destroy_dis_r(inst: &Instance, sol: &mut Solution, count: usize) -> Vec<usize> {
    let mut out = Vec::new();
    while out.len() < count {
        let mut cands: Vec<(f64, usize, NodeId)> = Vec::new();
        for route in sol.routes() {
            let path = route.nodes(inst);
            for k in 1..path.len() - 1 {
                let (a, v, b) = (path[k - 1], path[k], path[k + 1]);
                let margin = inst.distance(a, v) + inst.distance(v, b) - inst.distance(a, b);
                cands.push((margin, inst.customer_of(v).unwrap(), v));
            }
        }
        cands.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
        match cands.into_iter().find_map(|(_, _, v)| try_remove(inst, sol, v)) {
            Some(c) => out.push(c),
            None => break,
        }
    }
    out
}

/// Removes, one at a time, the customer whose removal shortens its route's
/// minimal duration the most. Margins are cached per route and refreshed
/// only for the route that changed.
pub fn destroy_dur_r(inst: &Instance, sol: &mut Solution, count: usize) -> Vec<usize> {
    type Margins = Vec<(f64, usize, usize, EvalResult)>;
    let margins_of = |sol: &Solution, r: usize| -> Margins {
        let route = sol.route(r);
        let base = sol.eval(r).min_duration;
        route
            .visits
            .iter()
            .enumerate()
            .filter_map(|(pos, &v)| {
                let e = evaluate_visits(inst, route.vehicle.vtype, &without(&route.visits, pos));
                e.feasible
                    .then(|| (base - e.min_duration, inst.customer_of(v).unwrap(), pos, e))
            })
            .collect()
    };
    let mut cache: Vec<Margins> = (0..sol.routes().len()).map(|r| margins_of(sol, r)).collect();
    let mut out = Vec::new();
    while out.len() < count {
        let best = cache
            .iter()
            .enumerate()
            .flat_map(|(r, m)| m.iter().map(move |x| (r, x)))
            .min_by(|(_, x), (_, y)| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
        let Some((r, &(_, c, pos, eval))) = best else { break };
        let route = sol.route(r);
        let node = route.visits[pos];
        let visits = without(&route.visits, pos);
        commit(inst, sol, r, visits, eval, &[node]);
        out.push(c);
        cache[r] = margins_of(sol, r);
    }
    out
}

/// Uniform random removal.
pub fn destroy_rr<R: Rng + ?Sized>(inst: &Instance, sol: &mut Solution, count: usize, rng: &mut R) -> Vec<usize> {
    let mut nodes = routed_nodes(sol);
    nodes.shuffle(rng);
    let mut out = Vec::new();
    for v in nodes {
        if out.len() == count {
            break;
        }
        if let Some(c) = try_remove(inst, sol, v) {
            out.push(c);
        }
    }
    out
}

/// Relatedness of node `j` to node `i`: mean-speed travel time plus
/// penalties for waiting at `j` when leaving `i` at its latest departure
/// and for lateness at `j` when leaving `i` at its earliest departure.
pub fn closeness(inst: &Instance, i: NodeId, j: NodeId, alpha_w: f64, alpha_v: f64) -> f64 {
    let (ei, li) = departure_window(inst, i);
    let (ej, lj) = departure_window(inst, j);
    let tau = inst.travel(i, j);
    let sj = inst.service(j);
    let late_ready = tau.ready(li.max(tau.start()), sj);
    let early_ready = tau.ready(ei.max(tau.start()), sj);
    let speed = inst.mean_speed(i, j);
    let base = if speed > 0.0 { inst.distance(i, j) / speed } else { f64::INFINITY };
    base + alpha_w * (ej - late_ready).max(0.0) + alpha_v * (early_ready - lj).max(0.0)
}

/// Shaw removal: a random seed, then repeatedly the routed customer most
/// related to a random already-removed one.
pub fn destroy_sha_r<R: Rng + ?Sized>(
    inst: &Instance,
    sol: &mut Solution,
    count: usize,
    alpha_w: f64,
    alpha_v: f64,
    rng: &mut R,
) -> Vec<usize> {
    let mut out = Vec::new();
    let mut removed_nodes = Vec::new();
    if count == 0 {
        return out;
    }
    let mut seeds = routed_nodes(sol);
    seeds.shuffle(rng);
    for v in seeds {
        if let Some(c) = try_remove(inst, sol, v) {
            out.push(c);
            removed_nodes.push(v);
            break;
        }
    }
    while out.len() < count && !removed_nodes.is_empty() {
        let r = removed_nodes[rng.random_range(0..removed_nodes.len())];
        let mut cands: Vec<(f64, usize, NodeId)> = routed_nodes(sol)
            .into_iter()
            .map(|v| (closeness(inst, r, v, alpha_w, alpha_v), inst.customer_of(v).unwrap(), v))
            .collect();
        cands.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let hit = cands
            .into_iter()
            .find_map(|(_, _, v)| try_remove(inst, sol, v).map(|c| (c, v)));
        match hit {
            Some((c, v)) => {
                out.push(c);
                removed_nodes.push(v);
            }
            None => break,
        }
    }
    out
}

/// Removes runs of consecutive customers from random routes until `count`
/// customers are gone. A run that would leave its route infeasible is
/// retried at other offsets and then shortened.
pub fn destroy_seg_r<R: Rng + ?Sized>(inst: &Instance, sol: &mut Solution, count: usize, rng: &mut R) -> Vec<usize> {
    let mut out = Vec::new();
    let mut blocked = vec![false; sol.routes().len()];
    while out.len() < count {
        let open: Vec<usize> = (0..sol.routes().len())
            .filter(|&r| !sol.route(r).is_empty() && !blocked[r])
            .collect();
        if open.is_empty() {
            break;
        }
        let r = open[rng.random_range(0..open.len())];
        let route = sol.route(r).clone();
        let len = route.visits.len();
        let mut done = false;
        for k in (1..=(count - out.len()).min(len)).rev() {
            let mut starts: Vec<usize> = (0..=len - k).collect();
            starts.shuffle(rng);
            for s in starts {
                let mut visits = route.visits.clone();
                let seg: Vec<NodeId> = visits.drain(s..s + k).collect();
                let eval = evaluate_visits(inst, route.vehicle.vtype, &visits);
                if eval.feasible {
                    commit(inst, sol, r, visits, eval, &seg);
                    out.extend(seg.iter().map(|&v| inst.customer_of(v).unwrap()));
                    done = true;
                    break;
                }
            }
            if done {
                break;
            }
        }
        if !done {
            blocked[r] = true;
        }
    }
    out
}
