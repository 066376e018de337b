//! Route feasibility and minimal-duration evaluation.
//!
//! Time windows bound the *departure* from a node: service may start in
//! `[e_j, l_j]` and occupies `s_j`, so the vehicle leaves `j` within
//! `[e_j + s_j, l_j + s_j]`. Early arrivals wait. The depot departure lies in
//! `[e_0, l_{2n+1}]` and the return must happen by `l_{2n+1}`.
//!
//! [`evaluate_temporal`] runs a backward pass that tightens the window of
//! useful departure times at every node and collects the breakpoints of the
//! composed arrival function, then a forward pass that evaluates the route
//! duration at every surviving depot breakpoint. Because the duration is
//! piecewise linear in the depot departure, its minimum is attained at one
//! of those breakpoints.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{FleetSpec, Instance, NodeId, Vehicle, VehicleType};
use crate::travel_time::EPS_BP;

/// A vehicle's route; `visits` holds the interior nodes only, the depots
/// `0` and `2n+1` are implicit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Route {
    pub vehicle: Vehicle,
    pub visits: Vec<NodeId>,
}

impl Route {
    pub fn new(vehicle: Vehicle, visits: Vec<NodeId>) -> Self {
        Route { vehicle, visits }
    }

    pub fn empty(vehicle: Vehicle) -> Self {
        Route::new(vehicle, Vec::new())
    }

    pub fn is_empty(&self) -> bool {
        self.visits.is_empty()
    }

    /// Full node sequence including both depots.
    pub fn nodes(&self, inst: &Instance) -> Vec<NodeId> {
        let mut v = Vec::with_capacity(self.visits.len() + 2);
        v.push(inst.origin());
        v.extend_from_slice(&self.visits);
        v.push(inst.destination());
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Infeasibility {
    /// A depot or out-of-range node inside the route.
    Structure,
    /// Both nodes of a customer, or one node twice.
    DuplicateCustomer,
    Capacity,
    SdlRefused,
    AevRefused,
    Range,
    TimeWindow,
    WorkingHours,
}

impl std::fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Infeasibility::Structure => "structure",
            Infeasibility::DuplicateCustomer => "duplicate-customer",
            Infeasibility::Capacity => "capacity",
            Infeasibility::SdlRefused => "sdl-refused",
            Infeasibility::AevRefused => "aev-refused",
            Infeasibility::Range => "range",
            Infeasibility::TimeWindow => "time-window",
            Infeasibility::WorkingHours => "working-hours",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    pub feasible: bool,
    /// Optimal depot departure (NaN when infeasible).
    pub departure_time: f64,
    /// Minimal arrival-minus-departure (infinite when infeasible).
    pub min_duration: f64,
    pub total_distance: f64,
    pub load: f64,
    pub reason: Option<Infeasibility>,
}

impl EvalResult {
    fn infeasible(reason: Infeasibility, total_distance: f64, load: f64) -> Self {
        EvalResult {
            feasible: false,
            departure_time: f64::NAN,
            min_duration: f64::INFINITY,
            total_distance,
            load,
            reason: Some(reason),
        }
    }
}

/// Outcome of the non-temporal checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticCheck {
    pub reason: Option<Infeasibility>,
    pub distance: f64,
    pub load: f64,
}

impl StaticCheck {
    pub fn ok(&self) -> bool {
        self.reason.is_none()
    }
}

thread_local! {
    static EVALUATIONS: Cell<u64> = const { Cell::new(0) };
}

/// Number of temporal evaluations run on the current thread so far.
pub fn evaluation_count() -> u64 {
    EVALUATIONS.with(Cell::get)
}

fn within(x: f64, limit: f64) -> bool {
    x <= limit + EPS_BP * limit.abs().max(1.0)
}

/// Capacity, acceptance flags, at-most-once and AEV range.
pub fn check_static(route: &Route, inst: &Instance) -> StaticCheck {
    check_static_visits(inst, route.vehicle.vtype, &route.visits)
}

pub fn check_static_visits(inst: &Instance, vtype: VehicleType, visits: &[NodeId]) -> StaticCheck {
    let n = inst.n();
    let mut load = 0.0;
    let mut distance = 0.0;
    let mut prev = inst.origin();
    let mut reason = None;
    let mut seen = [0u64; 4];
    let mut seen_big: Vec<bool> = if n >= 256 { vec![false; n + 1] } else { Vec::new() };
    for &v in visits {
        let Some(c) = inst.customer_of(v) else {
            return StaticCheck {
                reason: Some(Infeasibility::Structure),
                distance,
                load,
            };
        };
        let dup = if n >= 256 {
            std::mem::replace(&mut seen_big[c], true)
        } else {
            let (w, b) = (c / 64, 1u64 << (c % 64));
            let was = seen[w] & b != 0;
            seen[w] |= b;
            was
        };
        if dup {
            reason.get_or_insert(Infeasibility::DuplicateCustomer);
        }
        let cu = inst.customer(c);
        if inst.is_sdl(v) && !cu.accepts_sdl {
            reason.get_or_insert(Infeasibility::SdlRefused);
        }
        if vtype == VehicleType::Aev && !cu.accepts_aev {
            reason.get_or_insert(Infeasibility::AevRefused);
        }
        load += cu.demand;
        distance += inst.distance(prev, v);
        prev = v;
    }
    distance += inst.distance(prev, inst.destination());
    let fleet = inst.fleet(vtype);
    if reason.is_none() && !within(load, fleet.capacity) {
        reason = Some(Infeasibility::Capacity);
    }
    if reason.is_none() {
        if let Some(p) = fleet.max_distance {
            if !within(distance, p) {
                reason = Some(Infeasibility::Range);
            }
        }
    }
    StaticCheck {
        reason,
        distance,
        load,
    }
}

/// Departure window `[E, L]` of a node.
#[inline]
pub fn departure_window(inst: &Instance, node: NodeId) -> (f64, f64) {
    let h = inst.horizon();
    match inst.customer_of(node) {
        None => (h.early, h.late),
        Some(_) => {
            let w = inst.window(node);
            let s = inst.service(node);
            (w.early + s, w.late + s)
        }
    }
}

/// Intermediate data of the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalTrace {
    /// Useful depot departure window.
    pub etw0: f64,
    pub ltw0: f64,
    /// Candidate depot departures, sorted.
    pub bps0: Vec<f64>,
}

fn dedup_sorted(v: &mut Vec<f64>) {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= EPS_BP * b.abs().max(1.0));
}

/// Backward pass over `path` (including depots). Returns `None` when some
/// node's window opens after its latest feasible departure.
fn backward(inst: &Instance, path: &[NodeId]) -> Option<TemporalTrace> {
    let m = path.len() - 1;
    let end = inst.horizon().late;
    let mut ltw = end;
    let mut etw = f64::NEG_INFINITY;
    let mut bps: Vec<f64> = Vec::new();
    let mut next: Vec<f64> = Vec::new();
    for k in (0..m).rev() {
        let (i, j) = (path[k], path[k + 1]);
        let tau = inst.travel(i, j);
        let w = inst.service(j);
        let (e_i, l_i) = departure_window(inst, i);
        let lo = tau.start();
        let ltw_i = tau.ready_inverse(ltw, w).ok()?.min(l_i);
        let etw_i = if etw == f64::NEG_INFINITY {
            e_i
        } else {
            tau.ready_inverse(etw, w).unwrap_or(lo).max(e_i)
        };
        if e_i > ltw_i + EPS_BP * ltw_i.abs().max(1.0) {
            return None;
        }
        // leaving later than ltw_i is never possible; if even that is too
        // early for the successor's useful window, the route waits there
        let etw_i = etw_i.min(ltw_i);
        next.clear();
        for &b in &bps {
            if let Ok(t) = tau.ready_inverse(b, w) {
                next.push(t);
            }
        }
        next.extend(tau.breakpoints());
        next.extend([e_i, l_i, etw_i, ltw_i]);
        let tol_lo = EPS_BP * etw_i.abs().max(1.0);
        let tol_hi = EPS_BP * ltw_i.abs().max(1.0);
        next.retain(|&t| t >= etw_i - tol_lo && t <= ltw_i + tol_hi);
        for t in next.iter_mut() {
            *t = t.clamp(etw_i, ltw_i);
        }
        dedup_sorted(&mut next);
        std::mem::swap(&mut bps, &mut next);
        ltw = ltw_i;
        etw = etw_i;
    }
    Some(TemporalTrace {
        etw0: etw,
        ltw0: ltw,
        bps0: bps,
    })
}

/// Arrival at the destination depot for a depot departure `t0`, or `None`
/// if some window is missed.
pub fn simulate(inst: &Instance, path: &[NodeId], t0: f64) -> Option<f64> {
    let mut t = t0;
    for k in 0..path.len() - 1 {
        let (i, j) = (path[k], path[k + 1]);
        let tau = inst.travel(i, j);
        let ready = tau.ready(t.max(tau.start()), inst.service(j));
        let (e_j, l_j) = if k + 2 == path.len() {
            (f64::NEG_INFINITY, inst.horizon().late)
        } else {
            departure_window(inst, j)
        };
        t = ready.max(e_j);
        if !within(t, l_j) {
            return None;
        }
    }
    Some(t)
}

/// Runs the backward pass only, exposing the candidate depot departures.
pub fn temporal_trace(inst: &Instance, visits: &[NodeId]) -> Option<TemporalTrace> {
    let path = path_of(inst, visits);
    if simulate(inst, &path, inst.horizon().early).is_none() {
        return None;
    }
    backward(inst, &path)
}

fn path_of(inst: &Instance, visits: &[NodeId]) -> Vec<NodeId> {
    let mut path = Vec::with_capacity(visits.len() + 2);
    path.push(inst.origin());
    path.extend_from_slice(visits);
    path.push(inst.destination());
    path
}

/// Temporal evaluation of a route whose static checks passed.
pub fn evaluate_temporal(route: &Route, inst: &Instance) -> EvalResult {
    let st = check_static(route, inst);
    temporal(inst, route.vehicle.vtype, &route.visits, st.distance, st.load)
}

fn temporal(inst: &Instance, vtype: VehicleType, visits: &[NodeId], distance: f64, load: f64) -> EvalResult {
    EVALUATIONS.with(|c| c.set(c.get() + 1));
    let path = path_of(inst, visits);
    // Leaving the depot as early as possible gives the earliest time at every
    // node (FIFO), so missing a window here rules out every schedule.
    if simulate(inst, &path, inst.horizon().early).is_none() {
        return EvalResult::infeasible(Infeasibility::TimeWindow, distance, load);
    }
    let Some(trace) = backward(inst, &path) else {
        return EvalResult::infeasible(Infeasibility::TimeWindow, distance, load);
    };
    let mut best: Option<(f64, f64)> = None;
    for &t0 in &trace.bps0 {
        let Some(arrival) = simulate(inst, &path, t0) else { continue };
        let dur = arrival - t0;
        if best.is_none_or(|(_, d)| dur < d - 1e-12 * d.abs().max(1.0)) {
            best = Some((t0, dur));
        }
    }
    let Some((departure, duration)) = best else {
        return EvalResult::infeasible(Infeasibility::TimeWindow, distance, load);
    };
    if let Some(h) = inst.fleet(vtype).max_duration {
        if !within(duration, h) {
            return EvalResult {
                departure_time: departure,
                min_duration: duration,
                ..EvalResult::infeasible(Infeasibility::WorkingHours, distance, load)
            };
        }
    }
    EvalResult {
        feasible: true,
        departure_time: departure,
        min_duration: duration,
        total_distance: distance,
        load,
        reason: None,
    }
}

/// Static checks followed by temporal evaluation.
pub fn evaluate(route: &Route, inst: &Instance) -> EvalResult {
    evaluate_visits(inst, route.vehicle.vtype, &route.visits)
}

pub fn evaluate_visits(inst: &Instance, vtype: VehicleType, visits: &[NodeId]) -> EvalResult {
    let st = check_static_visits(inst, vtype, visits);
    if let Some(r) = st.reason {
        return EvalResult::infeasible(r, st.distance, st.load);
    }
    temporal(inst, vtype, visits, st.distance, st.load)
}

/// Route cost: minimal duration plus the fixed cost when the vehicle serves
/// at least one customer. An unused vehicle costs nothing.
pub fn route_cost(result: &EvalResult, activated: bool, fleet: &FleetSpec) -> Result<f64> {
    if !activated {
        return Ok(0.0);
    }
    if !result.feasible {
        return Err(Error::InfeasibleRoute);
    }
    Ok(result.min_duration + fleet.fixed_cost)
}
