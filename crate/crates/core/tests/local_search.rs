mod common;

use std::collections::BTreeSet;

use common::mt_instance;
use mttd::alns::{insertion_options, repair_gi, AlnsParams};
use mttd::eval::evaluate_visits;
use mttd::instance::{Instance, NodeId, SolomonClass, VehicleType};
use mttd::ls::{ant_proposal, best_move, local_search, LsOp, LsParams, LsStats, MarkovState, PheromoneMatrix};
use mttd::milp::brute_force;
use mttd::solution::Solution;
use mttd::solver::initial_solution;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instance(seed: u64, n: usize) -> Instance {
    let class = [SolomonClass::R, SolomonClass::C, SolomonClass::Rc][seed as usize % 3];
    mt_instance(class, n, seed, 3, 3)
}

fn greedy_start(inst: &Instance, seed: u64) -> Solution {
    initial_solution(inst, 50, &AlnsParams::default(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

/// Customers in shuffled order, each at its cheapest position.
fn randomized_construction(inst: &Instance, rng: &mut ChaCha8Rng) -> Solution {
    let mut sol = Solution::empty(inst);
    let mut order: Vec<usize> = (1..=inst.n()).collect();
    order.shuffle(rng);
    for c in order {
        if let Some(opt) = insertion_options(inst, &sol, c).first() {
            let mut visits = sol.route(opt.route).visits.clone();
            visits.insert(opt.pos, inst.node_for(c, opt.sdl));
            sol.set_route_evaluated(inst, opt.route, visits, opt.eval);
            sol.mark_assigned(c);
        }
    }
    if !sol.is_complete() {
        repair_gi(inst, &mut sol, usize::MAX);
    }
    sol
}

fn run_ls(inst: &Instance, sol: Solution, seed: u64) -> Solution {
    let params = LsParams::default();
    let mut markov = MarkovState::new();
    let mut pher = PheromoneMatrix::new(inst.node_count(), &params);
    let mut stats = LsStats::default();
    local_search(inst, sol, &mut markov, &mut pher, &params, &mut ChaCha8Rng::seed_from_u64(seed), None, &mut stats)
}

fn cost_of(inst: &Instance, vtype: VehicleType, visits: &[NodeId]) -> f64 {
    if visits.is_empty() {
        return 0.0;
    }
    let e = evaluate_visits(inst, vtype, visits);
    if e.feasible {
        e.min_duration + inst.fleet(vtype).fixed_cost
    } else {
        f64::INFINITY
    }
}

fn customers(inst: &Instance, sol: &Solution) -> BTreeSet<usize> {
    sol.routes()
        .iter()
        .flat_map(|r| r.visits.iter().map(|&v| inst.customer_of(v).unwrap()))
        .collect()
}

/// Non-empty routes plus one idle route per vehicle type.
fn routes_to_try(sol: &Solution) -> Vec<usize> {
    let mut seen = BTreeSet::new();
    (0..sol.routes().len())
        .filter(|&r| !sol.route(r).is_empty() || seen.insert(sol.route(r).vehicle.vtype.slot()))
        .collect()
}

/// Best improving delta among `(new cost, old cost)` pairs.
fn best_delta(neighbours: &[(f64, f64)]) -> Option<f64> {
    neighbours
        .iter()
        .map(|&(new, old)| new - old)
        .filter(|d| *d < -1e-7)
        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.min(d))))
}

fn relocate_neighbours(inst: &Instance, sol: &Solution) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let targets = routes_to_try(sol);
    for r in 0..sol.routes().len() {
        let route = sol.route(r);
        for p in 0..route.visits.len() {
            let node = route.visits[p];
            let c = inst.customer_of(node).unwrap();
            let mut src = route.visits.clone();
            src.remove(p);
            for sdl in [false, true] {
                let m = inst.node_for(c, sdl);
                for &r2 in &targets {
                    let t = sol.route(r2).vehicle.vtype;
                    if !inst.allows(t, m) {
                        continue;
                    }
                    if r2 == r {
                        for q in 0..=src.len() {
                            let mut v = src.clone();
                            v.insert(q, m);
                            if v != route.visits {
                                out.push((cost_of(inst, t, &v), sol.route_cost(r)));
                            }
                        }
                    } else {
                        let base = cost_of(inst, route.vehicle.vtype, &src);
                        for q in 0..=sol.route(r2).visits.len() {
                            let mut v = sol.route(r2).visits.clone();
                            v.insert(q, m);
                            out.push((base + cost_of(inst, t, &v), sol.route_cost(r) + sol.route_cost(r2)));
                        }
                    }
                }
            }
        }
    }
    out
}

fn swap_neighbours(inst: &Instance, sol: &Solution) -> Vec<(f64, f64)> {
    let pos: Vec<(usize, usize)> = (0..sol.routes().len())
        .flat_map(|r| (0..sol.route(r).visits.len()).map(move |p| (r, p)))
        .collect();
    let mut out = Vec::new();
    for a in 0..pos.len() {
        for b in a + 1..pos.len() {
            let ((r1, p1), (r2, p2)) = (pos[a], pos[b]);
            let (t1, t2) = (sol.route(r1).vehicle.vtype, sol.route(r2).vehicle.vtype);
            if r1 == r2 {
                let mut v = sol.route(r1).visits.clone();
                v.swap(p1, p2);
                out.push((cost_of(inst, t1, &v), sol.route_cost(r1)));
            } else {
                let (n1, n2) = (sol.route(r1).visits[p1], sol.route(r2).visits[p2]);
                if !inst.allows(t1, n2) || !inst.allows(t2, n1) {
                    continue;
                }
                let mut v1 = sol.route(r1).visits.clone();
                let mut v2 = sol.route(r2).visits.clone();
                v1[p1] = n2;
                v2[p2] = n1;
                out.push((
                    cost_of(inst, t1, &v1) + cost_of(inst, t2, &v2),
                    sol.route_cost(r1) + sol.route_cost(r2),
                ));
            }
        }
    }
    out
}

fn two_opt_neighbours(inst: &Instance, sol: &Solution) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for (r, route) in sol.routes().iter().enumerate() {
        for i in 0..route.visits.len() {
            for j in i + 1..route.visits.len() {
                let mut v = route.visits.clone();
                v[i..=j].reverse();
                out.push((cost_of(inst, route.vehicle.vtype, &v), sol.route_cost(r)));
            }
        }
    }
    out
}

fn two_opt_star_neighbours(inst: &Instance, sol: &Solution) -> Vec<(f64, f64)> {
    let routes = routes_to_try(sol);
    let mut out = Vec::new();
    for x in 0..routes.len() {
        for y in x + 1..routes.len() {
            let (r1, r2) = (routes[x], routes[y]);
            let (a, b) = (&sol.route(r1).visits, &sol.route(r2).visits);
            let (t1, t2) = (sol.route(r1).vehicle.vtype, sol.route(r2).vehicle.vtype);
            for i in 0..=a.len() {
                for j in 0..=b.len() {
                    if i == a.len() && j == b.len() {
                        continue;
                    }
                    let v1: Vec<NodeId> = a[..i].iter().chain(&b[j..]).copied().collect();
                    let v2: Vec<NodeId> = b[..j].iter().chain(&a[i..]).copied().collect();
                    let mut pairs = vec![(v1.clone(), v2.clone())];
                    if t1 != t2 && (i, j) != (0, 0) {
                        pairs.push((v2, v1));
                    }
                    for (u1, u2) in pairs {
                        if u1.iter().any(|&v| !inst.allows(t1, v)) || u2.iter().any(|&v| !inst.allows(t2, v)) {
                            continue;
                        }
                        out.push((
                            cost_of(inst, t1, &u1) + cost_of(inst, t2, &u2),
                            sol.route_cost(r1) + sol.route_cost(r2),
                        ));
                    }
                }
            }
        }
    }
    out
}

fn transform_neighbours(inst: &Instance, sol: &Solution) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for (r, route) in sol.routes().iter().enumerate() {
        for p in 0..route.visits.len() {
            let node = route.visits[p];
            let other = inst.node_for(inst.customer_of(node).unwrap(), !inst.is_sdl(node));
            if !inst.allows(route.vehicle.vtype, other) {
                continue;
            }
            let mut v = route.visits.clone();
            v[p] = other;
            out.push((cost_of(inst, route.vehicle.vtype, &v), sol.route_cost(r)));
        }
    }
    out
}

type Oracle = fn(&Instance, &Solution) -> Vec<(f64, f64)>;

const ORACLES: [(LsOp, Oracle); 5] = [
    (LsOp::Swap, swap_neighbours),
    (LsOp::Relocate, relocate_neighbours),
    (LsOp::TwoOpt, two_opt_neighbours),
    (LsOp::TwoOptStar, two_opt_star_neighbours),
    (LsOp::Transform, transform_neighbours),
];

#[test]
fn neighbourhood_best_moves_match_enumeration() {
    let params = LsParams::default();
    for seed in 0..12 {
        let inst = instance(seed, 8);
        let sol = randomized_construction(&inst, &mut ChaCha8Rng::seed_from_u64(seed));
        assert!(sol.is_feasible());
        let pher = PheromoneMatrix::new(inst.node_count(), &params);
        for (op, oracle) in ORACLES {
            let expected = best_delta(&oracle(&inst, &sol));
            let got = best_move(op, &inst, &sol, &pher, &params, &mut ChaCha8Rng::seed_from_u64(0));
            match (expected, got) {
                (None, None) => {}
                (Some(d), Some(mv)) => {
                    assert!((d - mv.delta).abs() < 1e-6, "{op:?} seed {seed}: {d} vs {}", mv.delta);
                    let mut after = sol.clone();
                    mv.apply(&inst, &mut after);
                    assert!((after.total_cost() - sol.total_cost() - d).abs() < 1e-6);
                    let mut fresh = after.clone();
                    assert!((fresh.recompute(&inst) - after.total_cost()).abs() < 1e-9);
                }
                (e, g) => panic!("{op:?} seed {seed}: oracle {e:?}, operator {:?}", g.map(|m| m.delta)),
            }
        }
    }
}

#[test]
fn local_search_never_worsens_and_keeps_customers() {
    for seed in 0..100 {
        let inst = instance(seed, 6 + (seed as usize % 5));
        let start = randomized_construction(&inst, &mut ChaCha8Rng::seed_from_u64(seed));
        let out = run_ls(&inst, start.clone(), seed);
        assert!(out.total_cost() <= start.total_cost() + 1e-9, "seed {seed}");
        assert!(out.is_feasible());
        assert_eq!(customers(&inst, &out), (1..=inst.n()).collect());
        let mut fresh = out.clone();
        assert!((fresh.recompute(&inst) - out.total_cost()).abs() < 1e-9);
    }
}

#[test]
fn local_search_output_is_locally_optimal() {
    let params = LsParams::default();
    for seed in 0..10 {
        let inst = instance(seed, 8);
        let out = run_ls(&inst, greedy_start(&inst, seed), seed);
        let pher = PheromoneMatrix::new(inst.node_count(), &params);
        for (op, oracle) in ORACLES {
            assert!(best_delta(&oracle(&inst, &out)).is_none(), "{op:?} seed {seed}");
            assert!(best_move(op, &inst, &out, &pher, &params, &mut ChaCha8Rng::seed_from_u64(1)).is_none());
        }
        let again = run_ls(&inst, out.clone(), seed + 1);
        assert!((again.total_cost() - out.total_cost()).abs() < 1e-9 || again.total_cost() < out.total_cost());
    }
}

#[test]
fn local_search_from_greedy_reaches_the_optimum_on_five_customers() {
    let mut hits = 0;
    for seed in 0..10 {
        let inst = instance(seed + 40, 5);
        let exact = brute_force(&inst, 6).unwrap();
        let out = run_ls(&inst, greedy_start(&inst, seed), seed);
        if (out.total_cost() - exact.objective).abs() < 1e-6 {
            hits += 1;
        }
    }
    assert!(hits >= 8, "{hits} of 10");
}

#[test]
fn transform_respects_the_sdl_flag() {
    let mut data = instance(5, 8).into_data();
    for c in &mut data.customers {
        c.accepts_sdl = false;
    }
    let inst = Instance::new(data).unwrap();
    let sol = greedy_start(&inst, 5);
    let params = LsParams::default();
    let pher = PheromoneMatrix::new(inst.node_count(), &params);
    assert!(best_move(LsOp::Transform, &inst, &sol, &pher, &params, &mut ChaCha8Rng::seed_from_u64(0)).is_none());
    let out = run_ls(&inst, sol, 5);
    assert!(out.routes().iter().flat_map(|r| &r.visits).all(|&v| !inst.is_sdl(v)));
}

#[test]
fn ant_rebuild_conserves_the_route() {
    let params = LsParams::default();
    let inst = instance(2, 10);
    let sol = greedy_start(&inst, 2);
    let pher = PheromoneMatrix::new(inst.node_count(), &params);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..500 {
        if let Some((r, visits)) = ant_proposal(&inst, &sol, &pher, &mut rng) {
            let mut a = visits.clone();
            let mut b = sol.route(r).visits.clone();
            a.sort();
            b.sort();
            assert_eq!(a, b);
        }
    }
}

#[test]
fn strong_pheromone_arc_is_rebuilt_more_often() {
    let params = LsParams::default();
    let inst = instance(8, 10);
    let sol = greedy_start(&inst, 8);
    let (r, route) = sol
        .routes()
        .iter()
        .enumerate()
        .max_by_key(|(_, r)| r.visits.len())
        .unwrap();
    assert!(route.visits.len() >= 3);
    // An arc absent from the route, between its first and last customer.
    let arc = (route.visits[0], *route.visits.last().unwrap());
    let count = |pher: &PheromoneMatrix| {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut hits = 0;
        for _ in 0..1000 {
            if let Some((rr, v)) = ant_proposal(&inst, &sol, pher, &mut rng) {
                if rr == r && v.windows(2).any(|w| (w[0], w[1]) == arc) {
                    hits += 1;
                }
            }
        }
        hits
    };
    let uniform = PheromoneMatrix::new(inst.node_count(), &params);
    let mut seeded = uniform.clone();
    seeded.set(arc.0, arc.1, params.phi_max);
    assert!(count(&seeded) > count(&uniform));
}

#[test]
fn pheromone_levels_stay_bounded_under_random_updates() {
    use rand::Rng;
    let params = LsParams::default();
    let k = 8;
    let mut pher = PheromoneMatrix::new(k, &params);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10_000 {
        let a = (NodeId(rng.random_range(0..k)), NodeId(rng.random_range(0..k)));
        let b = (NodeId(rng.random_range(0..k)), NodeId(rng.random_range(0..k)));
        if a != b {
            pher.reinforce(&[b], &[a], &params);
        }
    }
    for i in 0..k {
        for j in 0..k {
            let v = pher.get(NodeId(i), NodeId(j));
            assert!((params.phi_min..=params.phi_max).contains(&v));
        }
    }
}

#[test]
fn markov_selection_frequencies() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let m = MarkovState::new();
    let none = [false; 6];
    let mut hits = [0usize; 6];
    for _ in 0..10_000 {
        hits[m.select(m.start_row(), &none, &mut rng)] += 1;
    }
    for h in hits {
        assert!((h as f64 / 10_000.0 - 1.0 / 6.0).abs() < 0.02);
    }
    let only = [true, true, true, false, true, true];
    assert!((0..100).all(|_| m.select(2, &only, &mut rng) == 3));

    let params = LsParams::default();
    let mut m = MarkovState::new();
    for _ in 0..10 {
        m.reward(1, 4, 10.0, 1.0, &params);
    }
    let picks = (0..10_000).filter(|_| m.select(1, &none, &mut rng) == 4).count();
    assert!(picks as f64 / 10_000.0 > 0.9);
}

#[test]
fn markov_weights_stay_finite_and_positive() {
    use rand::Rng;
    let params = LsParams::default();
    let mut m = MarkovState::new();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100_000 {
        let from = rng.random_range(0..7);
        let to = rng.random_range(0..6);
        let lambda = m.observe_cost(to, rng.random_range(1.0..500.0), params.cost_smoothing);
        if rng.random_bool(0.3) {
            m.reward(from, to, rng.random_range(0.0..50.0), lambda, &params);
        } else {
            m.penalize(from, to, lambda, &params);
        }
    }
    assert!(m.weights.iter().flatten().all(|w| w.is_finite() && *w >= params.eps_p));
}
