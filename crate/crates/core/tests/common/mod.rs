//! Test fixtures and independent oracles shared by the integration suites.
#![allow(dead_code)]

use std::time::Instant;

use mttd::instance::{
    generate_mt_instance, synthetic_solomon, ArcProfiles, Customer, FleetSpec, Instance, InstanceData, Meta,
    MtConfig, NodeId, SolomonClass, SpeedProfile, Units, VehicleType,
};
use mttd_highs_check::{solve_lp_file, Status};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Travel time by driving through the zones: distance covered at each
/// zone's speed until the remaining distance is used up.
pub fn stepwise_travel(boundaries: &[f64], speeds: &[f64], distance: f64, depart: f64) -> f64 {
    let mut zone = 0;
    while zone + 1 < speeds.len() && boundaries[zone + 1] <= depart {
        zone += 1;
    }
    let mut t = depart;
    let mut left = distance;
    loop {
        let v = speeds[zone];
        if zone + 1 == speeds.len() {
            return t + left / v - depart;
        }
        let zone_end = boundaries[zone + 1];
        let can = v * (zone_end - t);
        if left <= can {
            return t + left / v - depart;
        }
        left -= can;
        t = zone_end;
        zone += 1;
    }
}

fn arc_travel(inst: &Instance, i: NodeId, j: NodeId, depart: f64) -> f64 {
    let p = inst.arc_profile(i, j);
    stepwise_travel(&p.boundaries, &p.speeds, inst.distance(i, j), depart)
}

/// Simulates a route leaving the depot at `t0`: service starts at
/// `max(arrival, e)` and must not pass `l`. Returns the duration.
pub fn simulate_from(inst: &Instance, vtype: VehicleType, visits: &[NodeId], t0: f64) -> Option<f64> {
    let tol = 1e-9;
    let mut path = vec![inst.origin()];
    path.extend_from_slice(visits);
    path.push(inst.destination());
    let mut t = t0;
    for w in path.windows(2) {
        let arrive = t + arc_travel(inst, w[0], w[1], t);
        if w[1] == inst.destination() {
            if arrive > inst.horizon().late + tol {
                return None;
            }
            let dur = arrive - t0;
            if let Some(h) = inst.fleet(vtype).max_duration {
                if dur > h + tol {
                    return None;
                }
            }
            return Some(dur);
        }
        let win = inst.window(w[1]);
        let start = arrive.max(win.early);
        if start > win.late + tol {
            return None;
        }
        t = start + inst.service(w[1]);
    }
    unreachable!()
}

/// Minimum duration over departures `e_0 + k * step` up to the last
/// departure that can still meet the first visit's window.
pub fn sweep_min_duration(inst: &Instance, vtype: VehicleType, visits: &[NodeId], step: f64) -> Option<(f64, f64)> {
    let e0 = inst.horizon().early;
    let mut hi = inst.horizon().late;
    if let Some(&first) = visits.first() {
        hi = hi.min(inst.window(first).late + inst.service(first));
    }
    let count = ((hi - e0) / step).floor() as usize;
    let mut best: Option<(f64, f64)> = None;
    for k in 0..=count {
        let t0 = e0 + k as f64 * step;
        if let Some(d) = simulate_from(inst, vtype, visits, t0) {
            if best.is_none_or(|(b, _)| d < b) {
                best = Some((d, t0));
            }
        }
    }
    best
}

/// Upper bound on the slope of route arrival time in departure time:
/// product of the fastest-to-slowest speed ratios of the arcs used.
pub fn arrival_slope_bound(inst: &Instance, visits: &[NodeId]) -> f64 {
    let mut path = vec![inst.origin()];
    path.extend_from_slice(visits);
    path.push(inst.destination());
    path.windows(2)
        .map(|w| {
            let p = inst.arc_profile(w[0], w[1]);
            let hi = p.speeds.iter().copied().fold(0.0, f64::max);
            let lo = p.speeds.iter().copied().fold(f64::INFINITY, f64::min);
            hi / lo
        })
        .product()
}

/// Random stepwise profile over `[start, end]`.
pub fn random_profile(rng: &mut ChaCha8Rng, name: &str, start: f64, end: f64) -> SpeedProfile {
    let zones = rng.random_range(1..=5);
    let mut cuts: Vec<f64> = (0..zones - 1).map(|_| rng.random_range(start + 1.0..end - 1.0)).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 0.5);
    let mut boundaries = vec![start];
    boundaries.extend(cuts);
    boundaries.push(end);
    let speeds = (0..boundaries.len() - 1).map(|_| rng.random_range(0.5..1.5)).collect();
    SpeedProfile::new(name, boundaries, speeds)
}

/// Small random instance on a `side x side` square with horizon
/// `[0, horizon]`, random profiles per arc and mixed acceptance flags.
pub fn random_instance(seed: u64, n: usize, side: f64, horizon: f64, fuel: usize, aev: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let profiles: Vec<SpeedProfile> = (0..3)
        .map(|k| random_profile(&mut rng, &format!("p{k}"), 0.0, horizon))
        .collect();
    let size = 2 * n + 2;
    let matrix: Vec<Vec<usize>> = (0..size)
        .map(|_| (0..size).map(|_| rng.random_range(0..profiles.len())).collect())
        .collect();
    let customers = (1..=n)
        .map(|id| {
            let x = rng.random_range(0.0..side);
            let y = rng.random_range(0.0..side);
            let e = rng.random_range(0.0..horizon * 0.5);
            let l = (e + rng.random_range(horizon * 0.15..horizon * 0.5)).min(horizon);
            let e_sdl = (e - 5.0).max(0.0);
            let l_sdl = (l + 5.0).min(horizon);
            Customer {
                id,
                x,
                y,
                sdl_x: (x + rng.random_range(-3.0..3.0)).clamp(0.0, side),
                sdl_y: (y + rng.random_range(-3.0..3.0)).clamp(0.0, side),
                demand: rng.random_range(1..=4) as f64,
                e,
                l,
                e_sdl,
                l_sdl,
                s: rng.random_range(0.5..2.0),
                s_sdl: rng.random_range(0.2..1.0),
                accepts_aev: rng.random_bool(0.6),
                accepts_sdl: rng.random_bool(0.6),
            }
        })
        .collect();
    let data = InstanceData {
        meta: Meta {
            name: format!("rand-{n}-{seed}"),
            n,
            horizon: [0.0, horizon],
            depot: [side / 2.0, side / 2.0],
            units: Units::default(),
        },
        fleets: vec![
            FleetSpec {
                vtype: VehicleType::Fuel,
                count: fuel,
                capacity: 10.0,
                fixed_cost: 20.0,
                max_duration: Some(horizon * 0.9),
                max_distance: None,
            },
            FleetSpec {
                vtype: VehicleType::Aev,
                count: aev,
                capacity: 6.0,
                fixed_cost: 10.0,
                max_duration: None,
                max_distance: Some(side * 3.0),
            },
        ],
        profiles,
        arc_profiles: ArcProfiles {
            default: 0,
            matrix: Some(matrix),
        },
        customers,
        distance_matrix: None,
    };
    Instance::new(data).expect("fixture is valid")
}

/// Generated MT-style instance with the given fleet sizes.
pub fn mt_instance(class: SolomonClass, n: usize, seed: u64, fuel: usize, aev: usize) -> Instance {
    let records = synthetic_solomon(class, n, seed);
    let base = MtConfig::default();
    let cfg = MtConfig {
        fleets: vec![
            FleetSpec {
                vtype: VehicleType::Fuel,
                count: fuel,
                capacity: 200.0,
                fixed_cost: base.fuel_fixed_cost,
                max_duration: Some(480.0 * base.max_duration_share),
                max_distance: None,
            },
            FleetSpec {
                vtype: VehicleType::Aev,
                count: aev,
                capacity: 100.0,
                fixed_cost: base.aev_fixed_cost,
                max_duration: None,
                max_distance: Some(base.aev_max_distance),
            },
        ],
        ..base
    };
    generate_mt_instance(&records, seed, &cfg).expect("generated instance is valid")
}

/// Random routes that the evaluator accepts statically.
pub fn random_visits(inst: &Instance, rng: &mut ChaCha8Rng, max_len: usize) -> (VehicleType, Vec<NodeId>) {
    let vtype = if rng.random_bool(0.5) { VehicleType::Fuel } else { VehicleType::Aev };
    let mut ids: Vec<usize> = (1..=inst.n()).collect();
    for k in (1..ids.len()).rev() {
        ids.swap(k, rng.random_range(0..=k));
    }
    let len = rng.random_range(1..=max_len.min(inst.n()));
    let visits = ids[..len]
        .iter()
        .map(|&c| inst.node_for(c, rng.random_bool(0.5)))
        .collect();
    (vtype, visits)
}

pub struct MilpResult {
    pub status: Status,
    pub objective: Option<f64>,
    pub seconds: f64,
}

/// Exports the model, solves it with HiGHS and returns the objective.
pub fn solve_exported(inst: &Instance, time_limit: f64) -> MilpResult {
    let start = Instant::now();
    let model = mttd::milp::export_milp(inst).expect("export");
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("model.lp");
    std::fs::write(&path, model.to_lp()).expect("write lp");
    let out = solve_lp_file(&path, Some(time_limit)).expect("HiGHS runs");
    MilpResult {
        status: out.status,
        objective: out.objective,
        seconds: start.elapsed().as_secs_f64(),
    }
}
