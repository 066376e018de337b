use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{departure_window, evaluate_visits, Route};
use crate::instance::{Instance, NodeId, Vehicle, VehicleType};
use crate::solution::Solution;

/// Default customer-count guard of [`brute_force`].
pub const BRUTE_FORCE_GUARD: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactRoute {
    pub vehicle: Vehicle,
    pub visits: Vec<NodeId>,
    pub departure_time: f64,
    pub duration: f64,
}

/// Optimal solution found by enumeration; `routes` is empty and
/// `objective` infinite when the instance is infeasible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactSolution {
    pub feasible: bool,
    pub objective: f64,
    pub routes: Vec<ExactRoute>,
}

impl ExactSolution {
    pub fn to_solution(&self, inst: &Instance) -> Result<Solution> {
        Solution::from_routes(
            inst,
            self.routes.iter().map(|r| Route::new(r.vehicle, r.visits.clone())),
        )
    }
}

#[derive(Clone)]
struct Best {
    cost: f64,
    visits: Vec<NodeId>,
}

/// Cheapest single route of type `vtype` for every customer subset.
fn best_single_routes(inst: &Instance, vtype: VehicleType) -> Vec<Option<Best>> {
    let n = inst.n();
    let mut best: Vec<Option<Best>> = vec![None; 1 << n];
    best[0] = Some(Best {
        cost: 0.0,
        visits: Vec::new(),
    });
    let fleet = inst.fleet(vtype);
    struct Dfs<'a> {
        inst: &'a Instance,
        vtype: VehicleType,
        capacity: f64,
        range: Option<f64>,
        fixed: f64,
        best: &'a mut Vec<Option<Best>>,
        visits: Vec<NodeId>,
    }
    impl Dfs<'_> {
        fn go(&mut self, mask: usize, load: f64, dist: f64, t: f64) {
            let inst = self.inst;
            let last = *self.visits.last().unwrap_or(&inst.origin());
            for c in 1..=inst.n() {
                if mask & (1 << (c - 1)) != 0 {
                    continue;
                }
                let load2 = load + inst.customer(c).demand;
                if load2 > self.capacity + 1e-9 {
                    continue;
                }
                for sdl in [false, true] {
                    let node = inst.node_for(c, sdl);
                    if !inst.allows(self.vtype, node) {
                        continue;
                    }
                    let dist2 = dist + inst.distance(last, node);
                    if self.range.is_some_and(|p| dist2 > p + 1e-9) {
                        continue;
                    }
                    let (e, l) = departure_window(inst, node);
                    let tau = inst.travel(last, node);
                    let t2 = tau.ready(t.max(tau.start()), inst.service(node)).max(e);
                    if t2 > l + 1e-9 {
                        continue;
                    }
                    self.visits.push(node);
                    let mask2 = mask | (1 << (c - 1));
                    let r = evaluate_visits(inst, self.vtype, &self.visits);
                    if r.feasible {
                        let cost = r.min_duration + self.fixed;
                        let slot = &mut self.best[mask2];
                        if slot.as_ref().is_none_or(|b| cost < b.cost - 1e-9) {
                            *slot = Some(Best {
                                cost,
                                visits: self.visits.clone(),
                            });
                        }
                    }
                    self.go(mask2, load2, dist2, t2);
                    self.visits.pop();
                }
            }
        }
    }
    let mut dfs = Dfs {
        inst,
        vtype,
        capacity: fleet.capacity,
        range: fleet.max_distance,
        fixed: fleet.fixed_cost,
        best: &mut best,
        visits: Vec::new(),
    };
    dfs.go(0, 0.0, 0.0, inst.horizon().early);
    best
}

/// For up to `count` routes built from `single`, the cheapest cover of every
/// subset, with the chosen route subsets.
fn cover(single: &[Option<Best>], count: usize, n: usize) -> Vec<Option<(f64, Vec<usize>)>> {
    let full = 1usize << n;
    let mut layer: Vec<Option<(f64, Vec<usize>)>> = vec![None; full];
    layer[0] = Some((0.0, Vec::new()));
    for _ in 0..count.min(n.max(1)) {
        let mut next = layer.clone();
        for mask in 1..full {
            let low = mask & mask.wrapping_neg();
            // submasks containing the lowest customer of `mask`
            let rest = mask ^ low;
            let mut sub = rest;
            loop {
                let part = sub | low;
                if let (Some(b), Some((c0, parts))) = (&single[part], &layer[mask ^ part]) {
                    let cost = b.cost + c0;
                    if next[mask].as_ref().is_none_or(|(c, _)| cost < c - 1e-9) {
                        let mut p = parts.clone();
                        p.push(part);
                        next[mask] = Some((cost, p));
                    }
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & rest;
            }
        }
        layer = next;
    }
    layer
}

/// Exact optimum by enumerating, per vehicle type, every feasible visit
/// sequence (home or SDL for each customer), then partitioning customers
/// over the available vehicles.
pub fn brute_force(inst: &Instance, guard: usize) -> Result<ExactSolution> {
    let n = inst.n();
    if n > guard {
        return Err(Error::GuardExceeded {
            what: "brute force",
            n,
            limit: guard,
        });
    }
    if n >= usize::BITS as usize - 1 {
        return Err(Error::GuardExceeded {
            what: "brute force",
            n,
            limit: usize::BITS as usize - 2,
        });
    }
    let full = (1usize << n) - 1;
    let mut covers = Vec::new();
    let mut singles = Vec::new();
    for vtype in VehicleType::ALL {
        let count = inst.fleet(vtype).count;
        if count == 0 {
            let mut only_empty = vec![None; full + 1];
            only_empty[0] = Some((0.0, Vec::new()));
            covers.push(only_empty);
            singles.push(Vec::new());
            continue;
        }
        let single = best_single_routes(inst, vtype);
        covers.push(cover(&single, count, n));
        singles.push(single);
    }

    let mut best: Option<(f64, usize)> = None;
    let mut sub = full;
    loop {
        if let (Some((a, _)), Some((b, _))) = (&covers[0][sub], &covers[1][full ^ sub]) {
            let cost = a + b;
            if best.is_none_or(|(c, _)| cost < c - 1e-9) {
                best = Some((cost, sub));
            }
        }
        if sub == 0 {
            break;
        }
        sub = (sub - 1) & full;
    }

    let Some((objective, fuel_mask)) = best else {
        return Ok(ExactSolution {
            feasible: false,
            objective: f64::INFINITY,
            routes: Vec::new(),
        });
    };
    let mut routes = Vec::new();
    for (slot, vtype) in VehicleType::ALL.into_iter().enumerate() {
        let mask = if slot == 0 { fuel_mask } else { full ^ fuel_mask };
        let (_, parts) = covers[slot][mask].as_ref().unwrap();
        let mut parts = parts.clone();
        parts.sort_unstable_by_key(|p| p.trailing_zeros());
        for (index, part) in parts.into_iter().enumerate() {
            let b = singles[slot][part].as_ref().unwrap();
            let r = evaluate_visits(inst, vtype, &b.visits);
            routes.push(ExactRoute {
                vehicle: Vehicle { vtype, index },
                visits: b.visits.clone(),
                departure_time: r.departure_time,
                duration: r.min_duration,
            });
        }
    }
    Ok(ExactSolution {
        feasible: true,
        objective,
        routes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::tests::minimal_data;

    #[test]
    fn no_customers_costs_nothing() {
        let mut d = minimal_data();
        d.meta.n = 0;
        d.customers.clear();
        let inst = Instance::new(d).unwrap();
        let s = brute_force(&inst, 6).unwrap();
        assert!(s.feasible);
        assert_eq!(s.objective, 0.0);
        assert!(s.routes.is_empty());
    }

    #[test]
    fn refusing_customer_goes_home_by_fuel() {
        let mut d = minimal_data();
        d.customers[0].accepts_aev = false;
        d.customers[0].accepts_sdl = false;
        let inst = Instance::new(d).unwrap();
        let s = brute_force(&inst, 6).unwrap();
        assert_eq!(s.routes.len(), 1);
        assert_eq!(s.routes[0].vehicle.vtype, VehicleType::Fuel);
        assert_eq!(s.routes[0].visits, vec![NodeId(1)]);
        // 5 out, 1 service, 5 back, fixed cost 5
        assert!((s.objective - 16.0).abs() < 1e-9);
    }

    #[test]
    fn sdl_used_when_closer() {
        // SDL at (3, 0) is 3 away versus 5 for home
        let inst = Instance::new(minimal_data()).unwrap();
        let s = brute_force(&inst, 6).unwrap();
        assert_eq!(s.routes[0].visits, vec![NodeId(2)]);
        assert!((s.objective - 12.0).abs() < 1e-9);
    }

    #[test]
    fn guard_is_enforced() {
        let inst = Instance::new(minimal_data()).unwrap();
        assert!(matches!(brute_force(&inst, 0), Err(Error::GuardExceeded { .. })));
    }

    #[test]
    fn infeasible_instance_is_reported() {
        let mut d = minimal_data();
        d.customers[0].l = 2.0;
        d.customers[0].e = 0.0;
        d.customers[0].l_sdl = 2.0;
        d.customers[0].e_sdl = 0.0;
        let inst = Instance::new(d).unwrap();
        let s = brute_force(&inst, 6).unwrap();
        assert!(!s.feasible);
    }
}
