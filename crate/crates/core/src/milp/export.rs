use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::eval::Route;
use crate::instance::{Instance, NodeId, Vehicle, VehicleType};
use crate::travel_time::Piece;

/// Largest customer count accepted by [`export_milp`].
pub const EXPORT_GUARD: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Var {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A mixed-integer linear model in memory, writable as an LP file.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    pub vars: Vec<Var>,
    pub objective: Vec<(usize, f64)>,
    pub rows: Vec<Row>,
    /// Big-M used to switch off the time-progress rows of unused arcs.
    pub big_m: f64,
    pub header: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl MilpModel {
    fn new() -> Self {
        MilpModel {
            vars: Vec::new(),
            objective: Vec::new(),
            rows: Vec::new(),
            big_m: 0.0,
            header: Vec::new(),
            index: BTreeMap::new(),
        }
    }

    fn var(&mut self, name: String, kind: VarKind, lower: f64, upper: f64) -> usize {
        let k = self.vars.len();
        self.index.insert(name.clone(), k);
        self.vars.push(Var {
            name,
            kind,
            lower,
            upper,
        });
        k
    }

    fn row(&mut self, name: String, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.rows.push(Row {
            name,
            terms,
            sense,
            rhs,
        });
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn binary_count(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    /// Rows whose name starts with `family`.
    pub fn rows_in(&self, family: &str) -> impl Iterator<Item = &Row> {
        let prefix = format!("{family}_");
        self.rows.iter().filter(move |r| r.name.starts_with(&prefix))
    }

    pub fn to_lp(&self) -> String {
        fn num(out: &mut String, c: f64) {
            let _ = write!(out, "{}", c);
        }
        fn terms(out: &mut String, vars: &[Var], raw: &[(usize, f64)]) {
            // LP readers do not sum repeated variables, so merge them here
            let mut terms: Vec<(usize, f64)> = Vec::with_capacity(raw.len());
            let mut slot: BTreeMap<usize, usize> = BTreeMap::new();
            for &(v, c) in raw {
                match slot.get(&v) {
                    Some(&k) => terms[k].1 += c,
                    None => {
                        slot.insert(v, terms.len());
                        terms.push((v, c));
                    }
                }
            }
            terms.retain(|&(_, c)| c != 0.0);
            if terms.is_empty() {
                out.push_str(" 0 ");
                out.push_str(&vars[0].name);
                return;
            }
            for (k, &(v, c)) in terms.iter().enumerate() {
                if k > 0 && k % 8 == 0 {
                    out.push_str("\n   ");
                }
                out.push_str(if c < 0.0 { " - " } else { " + " });
                num(out, c.abs());
                out.push(' ');
                out.push_str(&vars[v].name);
            }
        }
        let mut out = String::new();
        for h in &self.header {
            let _ = writeln!(out, "\\ {h}");
        }
        out.push_str("Minimize\n obj:");
        terms(&mut out, &self.vars, &self.objective);
        out.push_str("\nSubject To\n");
        for r in &self.rows {
            let _ = write!(out, " {}:", r.name);
            terms(&mut out, &self.vars, &r.terms);
            out.push_str(match r.sense {
                Sense::Le => " <= ",
                Sense::Ge => " >= ",
                Sense::Eq => " = ",
            });
            num(&mut out, r.rhs);
            out.push('\n');
        }
        out.push_str("Bounds\n");
        for v in &self.vars {
            if v.kind == VarKind::Binary {
                continue;
            }
            if v.lower == v.upper {
                let _ = writeln!(out, " {} = {}", v.name, v.lower);
            } else if v.upper.is_finite() {
                let _ = writeln!(out, " {} <= {} <= {}", v.lower, v.name, v.upper);
            } else {
                let _ = writeln!(out, " {} >= {}", v.name, v.lower);
            }
        }
        out.push_str("Binaries\n");
        for v in self.vars.iter().filter(|v| v.kind == VarKind::Binary) {
            let _ = writeln!(out, " {}", v.name);
        }
        out.push_str("End\n");
        out
    }
}

fn vehicle_tag(v: Vehicle) -> String {
    match v.vtype {
        VehicleType::Fuel => format!("f{}", v.index),
        VehicleType::Aev => format!("a{}", v.index),
    }
}

/// Travel-time pieces of an arc that start inside the horizon, with their
/// upper departure bound.
pub fn horizon_pieces(inst: &Instance, i: NodeId, j: NodeId) -> Vec<(Piece, f64)> {
    let end = inst.horizon().late;
    let pieces = inst.travel(i, j).pieces();
    pieces
        .iter()
        .enumerate()
        .filter(|(_, p)| p.start < end)
        .map(|(k, p)| {
            let hi = pieces.get(k + 1).map_or(end, |q| q.start.min(end));
            (*p, hi)
        })
        .collect()
}

/// Name of the arc variable for vehicle `v`, arc `(i, j)` and segment `k`.
pub fn arc_var_name(v: Vehicle, i: NodeId, j: NodeId, k: usize) -> String {
    format!("x_{}_{}_{}_{}", vehicle_tag(v), i.0, j.0, k)
}

/// Builds the routing MILP: arc-segment binaries `x`, segment departure
/// times `t`, node departure times `g`, loads `q` and AEV distances `d`.
///
/// The time-progress rows contain the product of a node departure time and
/// an arc binary; they are linearized as
/// `g_j >= (1 + theta) g_i + (eta + s_j) - M (1 - x)` and tightened by the
/// equivalent segment form `g_j >= (1 + theta) t + (eta + s_j) x`.
pub fn export_milp(inst: &Instance) -> Result<MilpModel> {
    let n = inst.n();
    if n > EXPORT_GUARD {
        return Err(Error::GuardExceeded {
            what: "MILP export",
            n,
            limit: EXPORT_GUARD,
        });
    }
    let h = inst.horizon();
    if h.early < 0.0 {
        return Err(Error::Config("MILP export needs a non-negative horizon start".into()));
    }
    let size = inst.node_count();
    let end = inst.destination();
    let nodes: Vec<NodeId> = (0..size).map(NodeId).collect();
    let arcs: Vec<(NodeId, NodeId)> = nodes
        .iter()
        .flat_map(|&i| nodes.iter().map(move |&j| (i, j)))
        .filter(|&(i, j)| inst.is_arc(i, j))
        .collect();
    let pieces: BTreeMap<(usize, usize), Vec<(Piece, f64)>> = arcs
        .iter()
        .map(|&(i, j)| ((i.0, j.0), horizon_pieces(inst, i, j)))
        .collect();

    let s_max = nodes.iter().map(|&v| inst.service(v)).fold(0.0, f64::max);
    let theta_max = pieces.values().flatten().map(|(p, _)| p.slope).fold(0.0, f64::max);
    let eta_max = pieces.values().flatten().map(|(p, _)| p.intercept).fold(0.0, f64::max);
    let g_max = h.late + s_max;
    let big_m = (1.0 + theta_max) * g_max + eta_max + s_max;
    let demand_total: f64 = inst.customers().iter().map(|c| c.demand).sum();
    let d_max = arcs.iter().map(|&(i, j)| inst.distance(i, j)).fold(0.0, f64::max);

    let mut m = MilpModel::new();
    m.big_m = big_m;
    m.header = vec![
        format!("routing model for instance {}", inst.name()),
        format!("n = {n}, nodes 0..={}, arcs = {}", size - 1, arcs.len()),
        "x = arc used in travel-time segment k, t = departure time in that segment,".into(),
        "g = node departure time, q = load after node, d = AEV distance after node".into(),
        format!(
            "big-M = (1 + max slope) * (horizon end + max service) + max intercept + max service = {big_m}"
        ),
        "variable one is fixed to 1 and carries the fixed-cost constant".into(),
    ];
    let one = m.var("one".into(), VarKind::Continuous, 1.0, 1.0);

    let vehicles = inst.vehicles();
    // x variables per vehicle: (i, j) -> [(segment index, x var, t var)]
    let mut xs: Vec<BTreeMap<(usize, usize), Vec<(usize, usize, usize)>>> = Vec::new();
    let mut gs: Vec<Vec<usize>> = Vec::new();
    let mut qs: Vec<Vec<usize>> = Vec::new();
    let mut ds: Vec<Option<Vec<usize>>> = Vec::new();
    for &veh in &vehicles {
        let tag = vehicle_tag(veh);
        let fleet = inst.fleet(veh.vtype);
        let mut xmap = BTreeMap::new();
        for &(i, j) in &arcs {
            let segs = pieces[&(i.0, j.0)]
                .iter()
                .enumerate()
                .map(|(k, _)| {
                    let x = m.var(arc_var_name(veh, i, j, k), VarKind::Binary, 0.0, 1.0);
                    let t = m.var(format!("t_{tag}_{}_{}_{k}", i.0, j.0), VarKind::Continuous, 0.0, h.late);
                    (k, x, t)
                })
                .collect::<Vec<_>>();
            xmap.insert((i.0, j.0), segs);
        }
        xs.push(xmap);
        gs.push(
            nodes
                .iter()
                .map(|v| m.var(format!("g_{tag}_{}", v.0), VarKind::Continuous, 0.0, g_max))
                .collect(),
        );
        qs.push(
            nodes
                .iter()
                .map(|v| {
                    let ub = if v.0 == 0 { 0.0 } else { fleet.capacity.max(0.0) };
                    m.var(format!("q_{tag}_{}", v.0), VarKind::Continuous, 0.0, ub)
                })
                .collect(),
        );
        ds.push(fleet.max_distance.filter(|_| veh.vtype == VehicleType::Aev).map(|p| {
            nodes
                .iter()
                .map(|v| {
                    let ub = if v.0 == 0 { 0.0 } else { p };
                    m.var(format!("d_{}_{}", veh.index, v.0), VarKind::Continuous, 0.0, ub)
                })
                .collect()
        }));
    }

    let all_x = |xmap: &BTreeMap<(usize, usize), Vec<(usize, usize, usize)>>, i: usize, j: usize| -> Vec<usize> {
        xmap.get(&(i, j)).map_or(Vec::new(), |s| s.iter().map(|&(_, x, _)| x).collect())
    };

    for (vi, &veh) in vehicles.iter().enumerate() {
        let tag = vehicle_tag(veh);
        let fleet = inst.fleet(veh.vtype).clone();
        let xmap = &xs[vi];
        let g = &gs[vi];
        let q = &qs[vi];

        // objective: duration plus fixed cost unless the vehicle goes straight home
        m.objective.push((g[end.0], 1.0));
        m.objective.push((g[0], -1.0));
        if fleet.fixed_cost != 0.0 {
            m.objective.push((one, fleet.fixed_cost));
            for x in all_x(xmap, 0, end.0) {
                m.objective.push((x, -fleet.fixed_cost));
            }
        }

        let out_of = |i: usize| -> Vec<(usize, f64)> {
            (0..size).flat_map(|j| all_x(xmap, i, j)).map(|x| (x, 1.0)).collect()
        };
        let into = |j: usize| -> Vec<(usize, f64)> {
            (0..size).flat_map(|i| all_x(xmap, i, j)).map(|x| (x, 1.0)).collect()
        };

        m.row(format!("origin_out_{tag}"), out_of(0), Sense::Eq, 1.0);
        m.row(format!("destination_in_{tag}"), into(end.0), Sense::Eq, 1.0);

        for i in 0..end.0 {
            let mut terms = vec![(g[i], 1.0)];
            for j in 0..size {
                if let Some(segs) = xmap.get(&(i, j)) {
                    terms.extend(segs.iter().map(|&(_, _, t)| (t, -1.0)));
                }
            }
            m.row(format!("time_consistency_{tag}_{i}"), terms, Sense::Eq, 0.0);
        }

        for i in 1..end.0 {
            let mut terms = out_of(i);
            terms.extend(into(i).into_iter().map(|(x, _)| (x, -1.0)));
            m.row(format!("flow_{tag}_{i}"), terms, Sense::Eq, 0.0);
        }

        for &(i, j) in &arcs {
            let s_j = inst.service(j);
            let d_j = inst.demand(j);
            for (&(k, x, t), &(p, hi)) in xmap[&(i.0, j.0)].iter().zip(&pieces[&(i.0, j.0)]) {
                let slope = 1.0 + p.slope;
                let c = p.intercept + s_j;
                m.row(
                    format!("time_progress_{tag}_{}_{}_{k}", i.0, j.0),
                    vec![(g[j.0], 1.0), (g[i.0], -slope), (x, -big_m)],
                    Sense::Ge,
                    c - big_m,
                );
                m.row(
                    format!("time_segment_{tag}_{}_{}_{k}", i.0, j.0),
                    vec![(g[j.0], 1.0), (t, -slope), (x, -c)],
                    Sense::Ge,
                    0.0,
                );
                m.row(
                    format!("time_interval_lo_{tag}_{}_{}_{k}", i.0, j.0),
                    vec![(t, 1.0), (x, -p.start)],
                    Sense::Ge,
                    0.0,
                );
                m.row(
                    format!("time_interval_hi_{tag}_{}_{}_{k}", i.0, j.0),
                    vec![(t, 1.0), (x, -hi)],
                    Sense::Le,
                    0.0,
                );
            }
            let arc_x = all_x(xmap, i.0, j.0);
            let big_q = fleet.capacity.max(0.0) + demand_total;
            let mut terms = vec![(q[i.0], 1.0), (q[j.0], -1.0)];
            terms.extend(arc_x.iter().map(|&x| (x, big_q)));
            m.row(format!("load_progress_{tag}_{}_{}", i.0, j.0), terms, Sense::Le, big_q - d_j);
            if let (Some(d), Some(p)) = (&ds[vi], fleet.max_distance) {
                let big_d = p + d_max;
                let mut terms = vec![(d[j.0], 1.0), (d[i.0], -1.0)];
                terms.extend(arc_x.iter().map(|&x| (x, -big_d)));
                m.row(
                    format!("dis_progress_{}_{}_{}", veh.index, i.0, j.0),
                    terms,
                    Sense::Ge,
                    inst.distance(i, j) - big_d,
                );
            }
        }

        for j in 1..end.0 {
            let node = NodeId(j);
            let w = inst.window(node);
            let s = inst.service(node);
            let visits = into(j);
            let mut terms = vec![(g[j], 1.0)];
            terms.extend(visits.iter().map(|&(x, _)| (x, -(w.late + s))));
            m.row(format!("time_window_hi_{tag}_{j}"), terms, Sense::Le, 0.0);
            let mut terms = vec![(g[j], 1.0)];
            terms.extend(visits.iter().map(|&(x, _)| (x, -(w.early + s))));
            m.row(format!("time_window_lo_{tag}_{j}"), terms, Sense::Ge, 0.0);
            let mut terms = vec![(q[j], 1.0)];
            terms.extend(visits.iter().map(|&(x, _)| (x, -fleet.capacity.max(0.0))));
            m.row(format!("load_unvisited_{tag}_{j}"), terms, Sense::Le, 0.0);
        }

        m.row(
            format!("max_load_{tag}"),
            vec![(q[end.0], 1.0), (q[0], -1.0)],
            Sense::Le,
            fleet.capacity,
        );
        m.row(format!("return_by_{tag}"), vec![(g[end.0], 1.0)], Sense::Le, h.late);
        if veh.vtype == VehicleType::Fuel {
            if let Some(hmax) = fleet.max_duration {
                m.row(
                    format!("working_hour_{tag}"),
                    vec![(g[end.0], 1.0), (g[0], -1.0)],
                    Sense::Le,
                    hmax,
                );
            }
        }
        if let (Some(d), Some(p)) = (&ds[vi], fleet.max_distance) {
            m.row(
                format!("max_dis_{}", veh.index),
                vec![(d[end.0], 1.0), (d[0], -1.0)],
                Sense::Le,
                p,
            );
        }

        for c in 1..=n {
            let cu = inst.customer(c);
            let sdl = inst.sdl_node(c).0;
            m.row(
                format!("self_pickup_{tag}_{sdl}"),
                into(sdl),
                Sense::Le,
                if cu.accepts_sdl { 1.0 } else { 0.0 },
            );
            if veh.vtype == VehicleType::Aev {
                let mut terms = into(c);
                terms.extend(into(sdl));
                m.row(
                    format!("unmanned_vehicle_{}_{c}", veh.index),
                    terms,
                    Sense::Le,
                    if cu.accepts_aev { 1.0 } else { 0.0 },
                );
            }
        }
    }

    for c in 1..=n {
        let sdl = inst.sdl_node(c).0;
        let terms: Vec<(usize, f64)> = xs
            .iter()
            .flat_map(|xmap| {
                (0..size)
                    .flat_map(move |i| all_x(xmap, i, c).into_iter().chain(all_x(xmap, i, sdl)))
                    .map(|x| (x, 1.0))
            })
            .collect();
        m.row(format!("visit_once_{c}"), terms, Sense::Eq, 1.0);
    }

    Ok(m)
}

/// Reads routes back from solver column values (arc binaries above 0.5).
pub fn decode_routes(inst: &Instance, value: impl Fn(&str) -> Option<f64>) -> Vec<Route> {
    let size = inst.node_count();
    let end = inst.destination();
    inst.vehicles()
        .into_iter()
        .filter_map(|veh| {
            let mut visits = Vec::new();
            let mut cur = NodeId(0);
            'walk: while cur != end && visits.len() <= size {
                for j in 1..size {
                    let j = NodeId(j);
                    if !inst.is_arc(cur, j) {
                        continue;
                    }
                    let used = (0..horizon_pieces(inst, cur, j).len())
                        .any(|k| value(&arc_var_name(veh, cur, j, k)).is_some_and(|x| x > 0.5));
                    if used {
                        if j != end {
                            visits.push(j);
                        }
                        cur = j;
                        continue 'walk;
                    }
                }
                break;
            }
            (!visits.is_empty()).then(|| Route::new(veh, visits))
        })
        .collect()
}
