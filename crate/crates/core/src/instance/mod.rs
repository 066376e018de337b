//! Problem datum: nodes, customers, fleets, speed profiles and per-arc
//! travel-time functions.
//!
//! Node numbering: `0` is the origin depot, `1..=n` are home delivery nodes,
//! `n+1..=2n` are shared delivery locations (customer `i` uses node `i + n`),
//! and `2n+1` is the destination depot.

mod format;
mod generate;

pub use format::{parse_instance, serialize_instance};
pub use generate::{
    generate_mt_instance, parse_solomon, profile_library, synthetic_solomon, vary_sdl_density,
    MtConfig, SolomonClass, SolomonData, SolomonRecord, DENSITY_CLUSTER_SIZES, DENSITY_R_MIN,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use crate::travel_time::SpeedProfile;
use crate::travel_time::{build_travel_time, TravelTimeFn};

/// Index of a node in `[0, 2n+1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VehicleType {
    Fuel,
    Aev,
}

impl VehicleType {
    pub const ALL: [VehicleType; 2] = [VehicleType::Fuel, VehicleType::Aev];

    pub fn slot(self) -> usize {
        match self {
            VehicleType::Fuel => 0,
            VehicleType::Aev => 1,
        }
    }

    /// Numeric type used in exported models: 1 for fuel, 2 for AEV.
    pub fn number(self) -> usize {
        self.slot() + 1
    }
}

impl std::fmt::Display for VehicleType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            VehicleType::Fuel => "fuel",
            VehicleType::Aev => "aev",
        })
    }
}

/// A concrete vehicle: its type and index within that type's fleet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Vehicle {
    pub vtype: VehicleType,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub early: f64,
    pub late: f64,
}

impl TimeWindow {
    pub fn new(early: f64, late: f64) -> Self {
        TimeWindow { early, late }
    }

    pub fn contains(&self, other: &TimeWindow) -> bool {
        self.early <= other.early && other.late <= self.late
    }
}

/// One customer as stored in the instance file.
///
/// `e`/`l` bound the start of service at the home node, `e_sdl`/`l_sdl` at
/// the shared delivery location. `A` and `S` are the AEV and SDL acceptance
/// flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Customer {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub sdl_x: f64,
    pub sdl_y: f64,
    pub demand: f64,
    pub e: f64,
    pub l: f64,
    pub e_sdl: f64,
    pub l_sdl: f64,
    pub s: f64,
    pub s_sdl: f64,
    #[serde(rename = "A")]
    pub accepts_aev: bool,
    #[serde(rename = "S")]
    pub accepts_sdl: bool,
}

impl Customer {
    pub fn home_window(&self) -> TimeWindow {
        TimeWindow::new(self.e, self.l)
    }

    pub fn sdl_window(&self) -> TimeWindow {
        TimeWindow::new(self.e_sdl, self.l_sdl)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetSpec {
    #[serde(rename = "type")]
    pub vtype: VehicleType,
    pub count: usize,
    pub capacity: f64,
    pub fixed_cost: f64,
    /// Working-hour limit; fuel vehicles only. Absent means unbounded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_duration: Option<f64>,
    /// Driving-range limit; AEVs only. Absent means unbounded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_distance: Option<f64>,
}

impl FleetSpec {
    pub fn unused(vtype: VehicleType) -> Self {
        FleetSpec {
            vtype,
            count: 0,
            capacity: 0.0,
            fixed_cost: 0.0,
            max_duration: None,
            max_distance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Units {
    pub time: String,
    pub distance: String,
    pub demand: String,
}

impl Default for Units {
    fn default() -> Self {
        Units {
            time: "minute".into(),
            distance: "distance unit".into(),
            demand: "unit".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub name: String,
    pub n: usize,
    /// `[e_0, l_{2n+1}]`: earliest depot departure, latest depot return.
    pub horizon: [f64; 2],
    pub depot: [f64; 2],
    #[serde(default)]
    pub units: Units,
}

/// Which speed profile each arc uses. `matrix[i][j]` overrides `default`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcProfiles {
    pub default: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<usize>>>,
}

/// Explicit arc distances replacing the Euclidean default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceMatrix {
    pub rows: Vec<Vec<f64>>,
}

/// Raw instance content, mirroring the file layout one-to-one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceData {
    pub meta: Meta,
    pub fleets: Vec<FleetSpec>,
    pub profiles: Vec<SpeedProfile>,
    #[serde(default)]
    pub arc_profiles: ArcProfiles,
    pub customers: Vec<Customer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_matrix: Option<DistanceMatrix>,
}

/// A validated instance with per-arc distances and travel-time functions
/// precomputed. Immutable and `Sync`.
#[derive(Debug, Clone)]
pub struct Instance {
    data: InstanceData,
    fleets: [FleetSpec; 2],
    size: usize,
    dist: Vec<f64>,
    travel: Vec<TravelTimeFn>,
    arc_profile: Vec<u32>,
    mean_speed: Vec<f64>,
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        self.data == other.data
    }
}

fn finite(location: &str, field: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(location, format!("{field} must be finite, got {v}")))
    }
}

impl Instance {
    /// Validates `data` and precomputes arc data.
    pub fn new(data: InstanceData) -> Result<Instance> {
        let n = data.meta.n;
        let [h0, h1] = data.meta.horizon;
        finite("meta", "horizon start", h0)?;
        finite("meta", "horizon end", h1)?;
        if h0 >= h1 {
            return Err(Error::invalid("meta", format!("horizon [{h0}, {h1}] is empty")));
        }
        finite("meta", "depot x", data.meta.depot[0])?;
        finite("meta", "depot y", data.meta.depot[1])?;
        if data.customers.len() != n {
            return Err(Error::invalid(
                "meta",
                format!("n = {n} but {} customers are listed", data.customers.len()),
            ));
        }
        let horizon = TimeWindow::new(h0, h1);
        for (k, c) in data.customers.iter().enumerate() {
            let loc = format!("customer {}", c.id);
            if c.id != k + 1 {
                return Err(Error::invalid(
                    loc,
                    format!("customers must be listed with ids 1..=n in order (position {})", k + 1),
                ));
            }
            for (field, v) in [
                ("x", c.x),
                ("y", c.y),
                ("sdl_x", c.sdl_x),
                ("sdl_y", c.sdl_y),
                ("demand", c.demand),
                ("e", c.e),
                ("l", c.l),
                ("e_sdl", c.e_sdl),
                ("l_sdl", c.l_sdl),
                ("s", c.s),
                ("s_sdl", c.s_sdl),
            ] {
                finite(&loc, field, v)?;
            }
            if c.demand < 0.0 {
                return Err(Error::invalid(loc, "demand must be non-negative"));
            }
            if c.s < 0.0 || c.s_sdl < 0.0 {
                return Err(Error::invalid(loc, "service times must be non-negative"));
            }
            if c.e > c.l {
                return Err(Error::invalid(loc, format!("home window [{}, {}] is inverted", c.e, c.l)));
            }
            if c.e_sdl > c.l_sdl {
                return Err(Error::invalid(
                    loc,
                    format!("SDL window [{}, {}] is inverted", c.e_sdl, c.l_sdl),
                ));
            }
            if !horizon.contains(&c.home_window()) {
                return Err(Error::invalid(loc, "home window lies outside the horizon"));
            }
            if !horizon.contains(&c.sdl_window()) {
                return Err(Error::invalid(loc, "SDL window lies outside the horizon"));
            }
        }

        let mut fleets = [FleetSpec::unused(VehicleType::Fuel), FleetSpec::unused(VehicleType::Aev)];
        let mut seen = [false; 2];
        for f in &data.fleets {
            let loc = format!("fleet {}", f.vtype);
            let slot = f.vtype.slot();
            if seen[slot] {
                return Err(Error::invalid(loc, "listed twice"));
            }
            seen[slot] = true;
            finite(&loc, "capacity", f.capacity)?;
            finite(&loc, "fixed_cost", f.fixed_cost)?;
            if f.capacity < 0.0 || f.fixed_cost < 0.0 {
                return Err(Error::invalid(loc, "capacity and fixed cost must be non-negative"));
            }
            match f.vtype {
                VehicleType::Fuel if f.max_distance.is_some() => {
                    return Err(Error::invalid(loc, "max_distance applies to AEVs only"))
                }
                VehicleType::Aev if f.max_duration.is_some() => {
                    return Err(Error::invalid(loc, "max_duration applies to fuel vehicles only"))
                }
                _ => {}
            }
            for v in [f.max_duration, f.max_distance].into_iter().flatten() {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::invalid(loc, "limits must be strictly positive"));
                }
            }
            fleets[slot] = f.clone();
        }

        if data.profiles.is_empty() {
            return Err(Error::invalid("profiles", "at least one speed profile is required"));
        }
        for p in &data.profiles {
            p.validate(h0, h1)?;
        }

        let size = 2 * n + 2;
        let np = data.profiles.len();
        if data.arc_profiles.default >= np {
            return Err(Error::invalid("arc_profiles", "default profile index out of range"));
        }
        if let Some(m) = &data.arc_profiles.matrix {
            if m.len() != size || m.iter().any(|r| r.len() != size) {
                return Err(Error::invalid(
                    "arc_profiles",
                    format!("matrix must be {size} x {size}"),
                ));
            }
            if m.iter().flatten().any(|&k| k >= np) {
                return Err(Error::invalid("arc_profiles", "profile index out of range"));
            }
        }
        if let Some(dm) = &data.distance_matrix {
            if dm.rows.len() != size || dm.rows.iter().any(|r| r.len() != size) {
                return Err(Error::invalid(
                    "distance_matrix",
                    format!("matrix must be {size} x {size}"),
                ));
            }
            if dm.rows.iter().flatten().any(|d| !(d.is_finite() && *d >= 0.0)) {
                return Err(Error::invalid("distance_matrix", "distances must be finite and >= 0"));
            }
        }

        let coord = |i: usize| -> [f64; 2] {
            if i == 0 || i == size - 1 {
                data.meta.depot
            } else if i <= n {
                let c = &data.customers[i - 1];
                [c.x, c.y]
            } else {
                let c = &data.customers[i - n - 1];
                [c.sdl_x, c.sdl_y]
            }
        };

        let mut dist = vec![0.0; size * size];
        let mut travel = Vec::with_capacity(size * size);
        let mut arc_profile = vec![0u32; size * size];
        let mut mean_speed = vec![0.0; size * size];
        let speeds: Vec<f64> = data.profiles.iter().map(SpeedProfile::mean_speed).collect();
        for i in 0..size {
            for j in 0..size {
                let k = i * size + j;
                let d = match &data.distance_matrix {
                    Some(dm) => dm.rows[i][j],
                    None => {
                        let (a, b) = (coord(i), coord(j));
                        (a[0] - b[0]).hypot(a[1] - b[1])
                    }
                };
                let d = if i == j { 0.0 } else { d };
                let p = data
                    .arc_profiles
                    .matrix
                    .as_ref()
                    .map_or(data.arc_profiles.default, |m| m[i][j]);
                dist[k] = d;
                arc_profile[k] = p as u32;
                mean_speed[k] = speeds[p];
                travel.push(build_travel_time(d, &data.profiles[p])?);
            }
        }

        Ok(Instance {
            data,
            fleets,
            size,
            dist,
            travel,
            arc_profile,
            mean_speed,
        })
    }

    pub fn data(&self) -> &InstanceData {
        &self.data
    }

    pub fn into_data(self) -> InstanceData {
        self.data
    }

    pub fn name(&self) -> &str {
        &self.data.meta.name
    }

    /// Number of customers.
    #[inline]
    pub fn n(&self) -> usize {
        self.data.meta.n
    }

    /// Total node count `2n + 2`.
    #[inline]
    pub fn node_count(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn origin(&self) -> NodeId {
        NodeId(0)
    }

    #[inline]
    pub fn destination(&self) -> NodeId {
        NodeId(self.size - 1)
    }

    pub fn horizon(&self) -> TimeWindow {
        let [a, b] = self.data.meta.horizon;
        TimeWindow::new(a, b)
    }

    pub fn customers(&self) -> &[Customer] {
        &self.data.customers
    }

    /// Customer by 1-based id.
    #[inline]
    pub fn customer(&self, id: usize) -> &Customer {
        &self.data.customers[id - 1]
    }

    #[inline]
    pub fn home_node(&self, customer: usize) -> NodeId {
        NodeId(customer)
    }

    #[inline]
    pub fn sdl_node(&self, customer: usize) -> NodeId {
        NodeId(customer + self.n())
    }

    /// Node serving `customer` in the given mode.
    #[inline]
    pub fn node_for(&self, customer: usize, sdl: bool) -> NodeId {
        if sdl {
            self.sdl_node(customer)
        } else {
            self.home_node(customer)
        }
    }

    /// Customer served at `node`, or `None` for depots.
    #[inline]
    pub fn customer_of(&self, node: NodeId) -> Option<usize> {
        let n = self.n();
        match node.0 {
            i if i >= 1 && i <= n => Some(i),
            i if i > n && i <= 2 * n => Some(i - n),
            _ => None,
        }
    }

    #[inline]
    pub fn is_sdl(&self, node: NodeId) -> bool {
        node.0 > self.n() && node.0 <= 2 * self.n()
    }

    /// Whether `(i, j)` belongs to the arc set: no self-loops, nothing into
    /// the origin depot, nothing out of the destination depot.
    pub fn is_arc(&self, i: NodeId, j: NodeId) -> bool {
        i != j && j.0 != 0 && i.0 != self.size - 1 && i.0 < self.size && j.0 < self.size
    }

    /// Service time at `node` (zero at depots).
    #[inline]
    pub fn service(&self, node: NodeId) -> f64 {
        let n = self.n();
        match node.0 {
            i if i >= 1 && i <= n => self.data.customers[i - 1].s,
            i if i > n && i <= 2 * n => self.data.customers[i - n - 1].s_sdl,
            _ => 0.0,
        }
    }

    /// Window on the start of service at `node`; the depot window is the horizon.
    #[inline]
    pub fn window(&self, node: NodeId) -> TimeWindow {
        let n = self.n();
        match node.0 {
            i if i >= 1 && i <= n => self.data.customers[i - 1].home_window(),
            i if i > n && i <= 2 * n => self.data.customers[i - n - 1].sdl_window(),
            _ => self.horizon(),
        }
    }

    #[inline]
    pub fn demand(&self, node: NodeId) -> f64 {
        self.customer_of(node).map_or(0.0, |c| self.customer(c).demand)
    }

    pub fn coord(&self, node: NodeId) -> [f64; 2] {
        let n = self.n();
        match node.0 {
            i if i >= 1 && i <= n => {
                let c = &self.data.customers[i - 1];
                [c.x, c.y]
            }
            i if i > n && i <= 2 * n => {
                let c = &self.data.customers[i - n - 1];
                [c.sdl_x, c.sdl_y]
            }
            _ => self.data.meta.depot,
        }
    }

    #[inline]
    pub fn distance(&self, i: NodeId, j: NodeId) -> f64 {
        self.dist[i.0 * self.size + j.0]
    }

    #[inline]
    pub fn travel(&self, i: NodeId, j: NodeId) -> &TravelTimeFn {
        &self.travel[i.0 * self.size + j.0]
    }

    pub fn arc_profile(&self, i: NodeId, j: NodeId) -> &SpeedProfile {
        &self.data.profiles[self.arc_profile[i.0 * self.size + j.0] as usize]
    }

    /// Time-averaged speed of the arc's profile.
    #[inline]
    pub fn mean_speed(&self, i: NodeId, j: NodeId) -> f64 {
        self.mean_speed[i.0 * self.size + j.0]
    }

    #[inline]
    pub fn fleet(&self, vtype: VehicleType) -> &FleetSpec {
        &self.fleets[vtype.slot()]
    }

    /// All vehicles, fuel first, each type in index order.
    pub fn vehicles(&self) -> Vec<Vehicle> {
        VehicleType::ALL
            .iter()
            .flat_map(|&vtype| (0..self.fleet(vtype).count).map(move |index| Vehicle { vtype, index }))
            .collect()
    }

    /// Whether `customer` may be served by `vtype` at `node` per the flags.
    #[inline]
    pub fn allows(&self, vtype: VehicleType, node: NodeId) -> bool {
        match self.customer_of(node) {
            None => true,
            Some(c) => {
                let cu = self.customer(c);
                (vtype != VehicleType::Aev || cu.accepts_aev) && (!self.is_sdl(node) || cu.accepts_sdl)
            }
        }
    }

    /// Home-to-SDL distance of a customer.
    pub fn last_mile(&self, customer: usize) -> f64 {
        let c = self.customer(customer);
        (c.x - c.sdl_x).hypot(c.y - c.sdl_y)
    }

    /// The duration-minimizing degenerate form: no SDLs, no AEVs, no
    /// acceptance flags and no fixed costs.
    pub fn to_dm_tdvrptw(&self) -> Result<Instance> {
        let mut data = self.data.clone();
        for c in &mut data.customers {
            c.accepts_aev = false;
            c.accepts_sdl = false;
        }
        data.fleets.retain(|f| f.vtype == VehicleType::Fuel);
        for f in &mut data.fleets {
            f.fixed_cost = 0.0;
        }
        Instance::new(data)
    }

    /// Whether any SDL or AEV content would be dropped by [`Self::to_dm_tdvrptw`].
    pub fn has_mixed_content(&self) -> bool {
        self.fleet(VehicleType::Aev).count > 0
            || self.fleet(VehicleType::Fuel).fixed_cost != 0.0
            || self.customers().iter().any(|c| c.accepts_aev || c.accepts_sdl)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn minimal_data() -> InstanceData {
        InstanceData {
            meta: Meta {
                name: "tiny".into(),
                n: 1,
                horizon: [0.0, 100.0],
                depot: [0.0, 0.0],
                units: Units::default(),
            },
            fleets: vec![FleetSpec {
                vtype: VehicleType::Fuel,
                count: 1,
                capacity: 10.0,
                fixed_cost: 5.0,
                max_duration: Some(100.0),
                max_distance: None,
            }],
            profiles: vec![SpeedProfile::constant("flat", 0.0, 100.0, 1.0)],
            arc_profiles: ArcProfiles::default(),
            customers: vec![Customer {
                id: 1,
                x: 3.0,
                y: 4.0,
                sdl_x: 3.0,
                sdl_y: 0.0,
                demand: 1.0,
                e: 0.0,
                l: 100.0,
                e_sdl: 0.0,
                l_sdl: 100.0,
                s: 1.0,
                s_sdl: 1.0,
                accepts_aev: true,
                accepts_sdl: true,
            }],
            distance_matrix: None,
        }
    }

    #[test]
    fn minimal_instance_has_four_nodes() {
        let inst = Instance::new(minimal_data()).unwrap();
        assert_eq!(inst.node_count(), 4);
        assert_eq!(inst.destination(), NodeId(3));
        assert_eq!(inst.sdl_node(1), NodeId(2));
        assert_eq!(inst.customer_of(NodeId(2)), Some(1));
        assert_eq!(inst.customer_of(NodeId(3)), None);
        assert!((inst.distance(NodeId(0), NodeId(1)) - 5.0).abs() < 1e-12);
        assert!((inst.distance(NodeId(1), NodeId(2)) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn arc_set_excludes_loops_and_depot_directions() {
        let inst = Instance::new(minimal_data()).unwrap();
        let arcs: Vec<(usize, usize)> = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .filter(|&(i, j)| inst.is_arc(NodeId(i), NodeId(j)))
            .collect();
        assert_eq!(arcs.len(), 7);
        assert!(arcs.contains(&(0, 3)));
        assert!(!arcs.contains(&(3, 0)));
    }

    #[test]
    fn inverted_window_names_customer() {
        let mut d = minimal_data();
        d.customers[0].e = 50.0;
        d.customers[0].l = 40.0;
        let err = Instance::new(d).unwrap_err().to_string();
        assert!(err.contains("customer 1"), "{err}");
    }

    #[test]
    fn fleet_limits_are_type_specific() {
        let mut d = minimal_data();
        d.fleets[0].max_distance = Some(10.0);
        assert!(Instance::new(d).is_err());
        let mut d = minimal_data();
        d.fleets[0].max_duration = Some(0.0);
        assert!(Instance::new(d).is_err());
    }

    #[test]
    fn distance_matrix_overrides_euclidean() {
        let mut d = minimal_data();
        let mut rows = vec![vec![7.0; 4]; 4];
        for (i, r) in rows.iter_mut().enumerate() {
            r[i] = 0.0;
        }
        d.distance_matrix = Some(DistanceMatrix { rows });
        let inst = Instance::new(d).unwrap();
        assert_eq!(inst.distance(NodeId(0), NodeId(1)), 7.0);
    }

    #[test]
    fn degenerate_mode_strips_mixed_content() {
        let inst = Instance::new(minimal_data()).unwrap();
        assert!(inst.has_mixed_content());
        let dm = inst.to_dm_tdvrptw().unwrap();
        assert!(!dm.has_mixed_content());
        assert!(!dm.allows(VehicleType::Fuel, NodeId(2)));
    }
}
