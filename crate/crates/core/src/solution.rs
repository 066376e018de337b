//! Solutions: one route per vehicle plus unassigned-customer bookkeeping,
//! with cached per-route evaluations.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{evaluate_visits, route_cost, EvalResult, Route};
use crate::instance::{Instance, NodeId, Vehicle, VehicleType};

#[derive(Debug, Clone)]
pub struct Solution {
    routes: Vec<Route>,
    evals: Vec<EvalResult>,
    costs: Vec<f64>,
    unassigned: BTreeSet<usize>,
    total: f64,
}

/// Where a customer is served: route index, position in `visits`, and
/// whether the SDL node is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Placement {
    pub route: usize,
    pub pos: usize,
    pub sdl: bool,
}

fn cost_of(inst: &Instance, route: &Route, eval: &EvalResult) -> f64 {
    route_cost(eval, !route.is_empty(), inst.fleet(route.vehicle.vtype)).unwrap_or(f64::INFINITY)
}

impl Solution {
    /// Every vehicle idle, every customer unassigned.
    pub fn empty(inst: &Instance) -> Solution {
        let routes: Vec<Route> = inst.vehicles().into_iter().map(Route::empty).collect();
        let evals: Vec<EvalResult> = routes
            .iter()
            .map(|r| evaluate_visits(inst, r.vehicle.vtype, &r.visits))
            .collect();
        Solution {
            costs: vec![0.0; routes.len()],
            routes,
            evals,
            unassigned: (1..=inst.n()).collect(),
            total: 0.0,
        }
    }

    /// Builds a solution from explicit routes; vehicles without a route stay
    /// idle and customers not visited are unassigned.
    pub fn from_routes(inst: &Instance, routes: impl IntoIterator<Item = Route>) -> Result<Solution> {
        let mut sol = Solution::empty(inst);
        let vehicles = inst.vehicles();
        for r in routes {
            let idx = vehicles
                .iter()
                .position(|v| *v == r.vehicle)
                .ok_or_else(|| Error::Config(format!("unknown vehicle {:?}", r.vehicle)))?;
            if !sol.routes[idx].is_empty() {
                return Err(Error::Config(format!("vehicle {:?} has two routes", r.vehicle)));
            }
            for &v in &r.visits {
                let c = inst
                    .customer_of(v)
                    .ok_or_else(|| Error::Config(format!("node {v} is not a customer node")))?;
                if !sol.unassigned.remove(&c) {
                    return Err(Error::Config(format!("customer {c} is visited twice")));
                }
            }
            sol.set_route(inst, idx, r.visits);
        }
        Ok(sol)
    }

    pub fn routes(&self) -> &[Route] {
        &self.routes
    }

    pub fn route(&self, idx: usize) -> &Route {
        &self.routes[idx]
    }

    pub fn eval(&self, idx: usize) -> &EvalResult {
        &self.evals[idx]
    }

    pub fn route_cost(&self, idx: usize) -> f64 {
        self.costs[idx]
    }

    pub fn total_cost(&self) -> f64 {
        self.total
    }

    pub fn unassigned(&self) -> &BTreeSet<usize> {
        &self.unassigned
    }

    pub fn is_complete(&self) -> bool {
        self.unassigned.is_empty()
    }

    /// Complete and every route feasible.
    pub fn is_feasible(&self) -> bool {
        self.is_complete() && self.total.is_finite()
    }

    pub fn routed_count(&self) -> usize {
        self.routes.iter().map(|r| r.visits.len()).sum()
    }

    fn refresh_total(&mut self) {
        self.total = self.costs.iter().sum();
    }

    /// Replaces a route's visits and re-evaluates it. Customers are not
    /// moved in or out of the unassigned set.
    pub fn set_route(&mut self, inst: &Instance, idx: usize, visits: Vec<NodeId>) -> EvalResult {
        let eval = evaluate_visits(inst, self.routes[idx].vehicle.vtype, &visits);
        self.set_route_evaluated(inst, idx, visits, eval);
        eval
    }

    /// Replaces a route whose evaluation is already known.
    pub fn set_route_evaluated(&mut self, inst: &Instance, idx: usize, visits: Vec<NodeId>, eval: EvalResult) {
        self.routes[idx].visits = visits;
        self.evals[idx] = eval;
        self.costs[idx] = cost_of(inst, &self.routes[idx], &eval);
        self.refresh_total();
    }

    pub fn mark_unassigned(&mut self, customer: usize) {
        self.unassigned.insert(customer);
    }

    pub fn mark_assigned(&mut self, customer: usize) {
        self.unassigned.remove(&customer);
    }

    /// Placement of every customer (index 0 unused).
    pub fn placements(&self, inst: &Instance) -> Vec<Option<Placement>> {
        let mut out = vec![None; inst.n() + 1];
        for (r, route) in self.routes.iter().enumerate() {
            for (pos, &v) in route.visits.iter().enumerate() {
                if let Some(c) = inst.customer_of(v) {
                    out[c] = Some(Placement {
                        route: r,
                        pos,
                        sdl: inst.is_sdl(v),
                    });
                }
            }
        }
        out
    }

    /// Re-evaluates every route from scratch and returns the total cost.
    pub fn recompute(&mut self, inst: &Instance) -> f64 {
        for idx in 0..self.routes.len() {
            let visits = std::mem::take(&mut self.routes[idx].visits);
            self.set_route(inst, idx, visits);
        }
        self.total
    }

    /// Non-empty routes as ordered node sequences.
    pub fn route_sequences(&self) -> impl Iterator<Item = &[NodeId]> {
        self.routes.iter().filter(|r| !r.is_empty()).map(|r| r.visits.as_slice())
    }

    /// Number of non-empty routes that do not occur (as node sequences) in `other`.
    pub fn new_routes_against(&self, other: &Solution) -> usize {
        let known: BTreeSet<&[NodeId]> = other.route_sequences().collect();
        self.route_sequences().filter(|s| !known.contains(s)).count()
    }

    /// Canonical encoding used for deterministic tie-breaking.
    pub fn encoding(&self) -> Vec<Vec<usize>> {
        self.routes
            .iter()
            .map(|r| r.visits.iter().map(|v| v.0).collect())
            .collect()
    }

    pub fn to_file(&self, inst: &Instance) -> SolutionFile {
        SolutionFile {
            instance: inst.name().to_string(),
            objective: self.total,
            routes: self
                .routes
                .iter()
                .enumerate()
                .filter(|(_, r)| !r.is_empty())
                .map(|(k, r)| {
                    let e = &self.evals[k];
                    RouteRecord {
                        vehicle_type: r.vehicle.vtype,
                        vehicle_index: r.vehicle.index,
                        nodes: r.nodes(inst).iter().map(|v| v.0).collect(),
                        departure_time: e.departure_time,
                        duration: e.min_duration,
                        distance: e.total_distance,
                        load: e.load,
                        cost: self.costs[k],
                    }
                })
                .collect(),
            unassigned: self.unassigned.iter().copied().collect(),
        }
    }

    /// Rebuilds a solution from a file, re-evaluating every route.
    pub fn from_file(inst: &Instance, file: &SolutionFile) -> Result<Solution> {
        let routes = file.routes.iter().map(|r| {
            let inner = if r.nodes.len() >= 2 { &r.nodes[1..r.nodes.len() - 1] } else { &[][..] };
            Route::new(
                Vehicle {
                    vtype: r.vehicle_type,
                    index: r.vehicle_index,
                },
                inner.iter().map(|&v| NodeId(v)).collect(),
            )
        });
        Solution::from_routes(inst, routes.collect::<Vec<_>>())
    }
}

/// Serialized solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub instance: String,
    pub objective: f64,
    pub routes: Vec<RouteRecord>,
    pub unassigned: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteRecord {
    pub vehicle_type: VehicleType,
    pub vehicle_index: usize,
    /// Full node sequence, depots included.
    pub nodes: Vec<usize>,
    pub departure_time: f64,
    pub duration: f64,
    pub distance: f64,
    pub load: f64,
    pub cost: f64,
}

impl SolutionFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serializes")
    }

    pub fn from_json(text: &str) -> Result<SolutionFile> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::tests::minimal_data;

    #[test]
    fn empty_solution_costs_nothing() {
        let inst = Instance::new(minimal_data()).unwrap();
        let s = Solution::empty(&inst);
        assert_eq!(s.total_cost(), 0.0);
        assert!(!s.is_complete());
    }

    #[test]
    fn file_round_trip() {
        let inst = Instance::new(minimal_data()).unwrap();
        let v = Vehicle {
            vtype: VehicleType::Fuel,
            index: 0,
        };
        let s = Solution::from_routes(&inst, [Route::new(v, vec![NodeId(2)])]).unwrap();
        assert!(s.is_feasible());
        let f = s.to_file(&inst);
        let back = SolutionFile::from_json(&f.to_json()).unwrap();
        assert_eq!(f, back);
        let s2 = Solution::from_file(&inst, &back).unwrap();
        assert_eq!(s2.total_cost(), s.total_cost());
    }

    #[test]
    fn double_visit_rejected() {
        let inst = Instance::new(minimal_data()).unwrap();
        let v = Vehicle {
            vtype: VehicleType::Fuel,
            index: 0,
        };
        assert!(Solution::from_routes(&inst, [Route::new(v, vec![NodeId(1), NodeId(2)])]).is_err());
    }
}
