//! Solomon-style seed records and the MT / SDL-density generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{
    ArcProfiles, Customer, FleetSpec, Instance, InstanceData, Meta, SpeedProfile, Units,
    VehicleType,
};
use crate::error::{Error, Result};

/// One row of a Solomon-format file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolomonRecord {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub demand: f64,
    pub ready: f64,
    pub due: f64,
    pub service: f64,
}

/// A Solomon-format file: vehicle data, the depot row and customer rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SolomonData {
    pub name: String,
    pub vehicles: usize,
    pub capacity: f64,
    pub depot: SolomonRecord,
    pub customers: Vec<SolomonRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolomonClass {
    R,
    C,
    Rc,
}

impl std::str::FromStr for SolomonClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "r" => Ok(SolomonClass::R),
            "c" => Ok(SolomonClass::C),
            "rc" => Ok(SolomonClass::Rc),
            other => Err(Error::Config(format!("unknown customer class `{other}` (expected r, c or rc)"))),
        }
    }
}

fn numbers(line: &str) -> Option<Vec<f64>> {
    line.split_whitespace().map(|t| t.parse::<f64>().ok()).collect()
}

/// Parses the classic Solomon text layout. The first record (id 0) is the depot.
pub fn parse_solomon(text: &str) -> Result<SolomonData> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let name = lines
        .next()
        .ok_or_else(|| Error::Syntax("empty Solomon file".into()))?
        .to_string();
    let mut fleet = None;
    let mut records = Vec::new();
    for line in lines {
        let Some(nums) = numbers(line) else { continue };
        match nums.len() {
            2 if fleet.is_none() && records.is_empty() => fleet = Some((nums[0] as usize, nums[1])),
            7 => records.push(SolomonRecord {
                id: nums[0] as usize,
                x: nums[1],
                y: nums[2],
                demand: nums[3],
                ready: nums[4],
                due: nums[5],
                service: nums[6],
            }),
            _ => return Err(Error::Syntax(format!("unexpected Solomon line `{line}`"))),
        }
    }
    let (vehicles, capacity) =
        fleet.ok_or_else(|| Error::Syntax("missing vehicle number / capacity line".into()))?;
    if records.is_empty() {
        return Err(Error::Syntax("no customer records".into()));
    }
    let depot = records.remove(0);
    Ok(SolomonData {
        name,
        vehicles,
        capacity,
        depot,
        customers: records,
    })
}

/// Synthetic Solomon-like records on a 100 x 100 grid: depot at the centre,
/// horizon `[0, 480]`, service time 10, tight windows.
pub fn synthetic_solomon(class: SolomonClass, n: usize, seed: u64) -> SolomonData {
    const HORIZON: f64 = 480.0;
    const SERVICE: f64 = 10.0;
    // slowest speed in the profile library, used to keep windows reachable
    const V_MIN: f64 = 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depot = SolomonRecord {
        id: 0,
        x: 50.0,
        y: 50.0,
        demand: 0.0,
        ready: 0.0,
        due: HORIZON,
        service: 0.0,
    };
    let centres: Vec<(f64, f64)> = (0..n.div_ceil(8).max(1))
        .map(|_| (rng.random_range(15.0..85.0), rng.random_range(15.0..85.0)))
        .collect();
    let spread = Normal::new(0.0, 5.0).unwrap();
    let customers = (1..=n)
        .map(|id| {
            let clustered = match class {
                SolomonClass::R => false,
                SolomonClass::C => true,
                SolomonClass::Rc => id % 2 == 0,
            };
            let (x, y) = if clustered {
                let (cx, cy) = centres[rng.random_range(0..centres.len())];
                (
                    (cx + spread.sample(&mut rng)).clamp(0.0, 100.0),
                    (cy + spread.sample(&mut rng)).clamp(0.0, 100.0),
                )
            } else {
                (rng.random_range(0.0..100.0), rng.random_range(0.0..100.0))
            };
            let x = (x * 10.0f64).round() / 10.0;
            let y = (y * 10.0f64).round() / 10.0;
            let d0 = (x - depot.x).hypot(y - depot.y);
            let half: f64 = rng.random_range(10.0..30.0f64).round();
            let lo = (d0 / V_MIN + half).ceil();
            let hi = (HORIZON - SERVICE - d0 / V_MIN - half).floor();
            let centre = rng.random_range(lo..=hi.max(lo)).round();
            SolomonRecord {
                id,
                x,
                y,
                demand: rng.random_range(1..=30) as f64,
                ready: (centre - half).max(0.0),
                due: (centre + half).min(HORIZON),
                service: SERVICE,
            }
        })
        .collect();
    SolomonData {
        name: format!("{class:?}-{n}-{seed}").to_lowercase(),
        vehicles: 25,
        capacity: 200.0,
        depot,
        customers,
    }
}

/// Five-zone profiles over `[start, end]` (zone lengths 20/10/40/10/20 % of
/// the horizon, two congestion peaks) plus a flat profile.
pub fn profile_library(start: f64, end: f64) -> Vec<SpeedProfile> {
    let span = end - start;
    let mut boundaries = vec![start];
    let mut acc = 0.0;
    for share in [0.2, 0.1, 0.4, 0.1] {
        acc += share;
        boundaries.push(start + acc * span);
    }
    boundaries.push(end);
    let five = |name: &str, speeds: [f64; 5]| SpeedProfile::new(name, boundaries.clone(), speeds.to_vec());
    vec![
        five("congested", [1.0, 0.5, 0.8, 0.5, 1.0]),
        five("moderate", [1.2, 0.7, 1.0, 0.7, 1.2]),
        five("free", [1.4, 1.0, 1.2, 1.0, 1.4]),
        SpeedProfile::constant("flat", start, end, 1.0),
    ]
}

/// Settings of [`generate_mt_instance`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MtConfig {
    pub name: Option<String>,
    /// Probability that a customer accepts AEV delivery.
    pub accept_aev: f64,
    /// Probability that a customer accepts SDL delivery.
    pub accept_sdl: f64,
    /// Fleets; when empty, one fuel and one AEV fleet sized from `n`.
    pub fleets: Vec<FleetSpec>,
    pub fuel_fixed_cost: f64,
    pub aev_fixed_cost: f64,
    /// Working-hour limit as a fraction of the horizon length.
    pub max_duration_share: f64,
    pub aev_max_distance: f64,
    /// Speed profiles; empty means the congested / moderate / free library.
    pub profiles: Vec<SpeedProfile>,
    /// SDL distance from home is drawn uniformly over this annulus.
    pub sdl_radius: [f64; 2],
    /// The SDL window is the home window scaled about its centre by this
    /// factor and padded by `sdl_window_pad` on both sides.
    pub sdl_window_widening: f64,
    pub sdl_window_pad: f64,
    pub sdl_service_factor: f64,
}

impl Default for MtConfig {
    fn default() -> Self {
        MtConfig {
            name: None,
            accept_aev: 0.5,
            accept_sdl: 0.5,
            fleets: Vec::new(),
            fuel_fixed_cost: 100.0,
            aev_fixed_cost: 60.0,
            max_duration_share: 0.75,
            aev_max_distance: 150.0,
            profiles: Vec::new(),
            sdl_radius: [2.0, 8.0],
            sdl_window_widening: 2.0,
            sdl_window_pad: 15.0,
            sdl_service_factor: 0.5,
        }
    }
}

impl MtConfig {
    fn validate(&self) -> Result<()> {
        for (what, p) in [("accept_aev", self.accept_aev), ("accept_sdl", self.accept_sdl)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{what} = {p} is not a probability")));
            }
        }
        let [r0, r1] = self.sdl_radius;
        if !(r0 >= 0.0 && r1 >= r0) {
            return Err(Error::Config("sdl_radius must satisfy 0 <= r_min <= r_max".into()));
        }
        if !(self.sdl_window_widening >= 1.0 && self.sdl_window_pad >= 0.0) {
            return Err(Error::Config("SDL windows must not be narrower than home windows".into()));
        }
        Ok(())
    }
}

fn annulus_point(rng: &mut ChaCha8Rng, [r0, r1]: [f64; 2]) -> (f64, f64) {
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    // uniform over the annulus area
    let r = (r0 * r0 + rng.random::<f64>() * (r1 * r1 - r0 * r0)).sqrt();
    (r * angle.cos(), r * angle.sin())
}

/// Builds an MT instance from seed records: each customer gets an SDL in an
/// annulus around its home with a wider window, and acceptance flags drawn
/// independently with the configured probabilities.
pub fn generate_mt_instance(seed: &SolomonData, rng_seed: u64, config: &MtConfig) -> Result<Instance> {
    if seed.customers.is_empty() {
        return Err(Error::EmptySeed);
    }
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let (h0, h1) = (seed.depot.ready, seed.depot.due);
    let n = seed.customers.len();

    let customers = seed
        .customers
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let e = r.ready.clamp(h0, h1);
            let l = r.due.clamp(e, h1);
            let (dx, dy) = annulus_point(&mut rng, config.sdl_radius);
            let centre = 0.5 * (e + l);
            let half = 0.5 * (l - e) * config.sdl_window_widening + config.sdl_window_pad;
            Customer {
                id: k + 1,
                x: r.x,
                y: r.y,
                sdl_x: r.x + dx,
                sdl_y: r.y + dy,
                demand: r.demand,
                e,
                l,
                e_sdl: (centre - half).max(h0).min(e),
                l_sdl: (centre + half).min(h1).max(l),
                s: r.service,
                s_sdl: r.service * config.sdl_service_factor,
                accepts_aev: rng.random_bool(config.accept_aev),
                accepts_sdl: rng.random_bool(config.accept_sdl),
            }
        })
        .collect::<Vec<_>>();

    let profiles = if config.profiles.is_empty() {
        profile_library(h0, h1)[..3].to_vec()
    } else {
        config.profiles.clone()
    };
    let size = 2 * n + 2;
    let mut matrix = vec![vec![0usize; size]; size];
    for i in 0..size {
        for j in i + 1..size {
            let class = rng.random_range(0..profiles.len());
            matrix[i][j] = class;
            matrix[j][i] = class;
        }
    }

    let fleets = if config.fleets.is_empty() {
        let count = n.div_ceil(4).max(1);
        vec![
            FleetSpec {
                vtype: VehicleType::Fuel,
                count,
                capacity: seed.capacity,
                fixed_cost: config.fuel_fixed_cost,
                max_duration: Some(config.max_duration_share * (h1 - h0)),
                max_distance: None,
            },
            FleetSpec {
                vtype: VehicleType::Aev,
                count,
                capacity: seed.capacity,
                fixed_cost: config.aev_fixed_cost,
                max_duration: None,
                max_distance: Some(config.aev_max_distance),
            },
        ]
    } else {
        config.fleets.clone()
    };

    Instance::new(InstanceData {
        meta: Meta {
            name: config.name.clone().unwrap_or_else(|| format!("{n}-MT-{}", seed.name)),
            n,
            horizon: [h0, h1],
            depot: [seed.depot.x, seed.depot.y],
            units: Units::default(),
        },
        fleets,
        profiles,
        arc_profiles: ArcProfiles {
            default: 0,
            matrix: Some(matrix),
        },
        customers,
        distance_matrix: None,
    })
}

/// Upper bound on customers per shared SDL point at density levels 1..=7.
pub const DENSITY_CLUSTER_SIZES: [usize; 7] = [1, 2, 3, 5, 8, 12, 20];

/// SDL radius used at density level 1.
pub const DENSITY_R_MIN: f64 = 2.0;

fn kmeans(points: &[(f64, f64)], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let d2 = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2);
    // k-means++ seeding
    let mut centres = vec![points[rng.random_range(0..points.len())]];
    while centres.len() < k {
        let weights: Vec<f64> = points
            .iter()
            .map(|&p| centres.iter().map(|&c| d2(p, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut target = rng.random::<f64>() * total;
        let mut pick = points.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            if target < *w {
                pick = i;
                break;
            }
            target -= w;
        }
        centres.push(points[pick]);
    }
    let mut assign = vec![0usize; points.len()];
    for _ in 0..100 {
        let mut changed = false;
        for (i, &p) in points.iter().enumerate() {
            let best = (0..centres.len())
                .min_by(|&a, &b| d2(p, centres[a]).total_cmp(&d2(p, centres[b])))
                .unwrap();
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        for (c, centre) in centres.iter_mut().enumerate() {
            let members: Vec<_> = points.iter().zip(&assign).filter(|(_, &a)| a == c).collect();
            if !members.is_empty() {
                let m = members.len() as f64;
                *centre = (
                    members.iter().map(|(p, _)| p.0).sum::<f64>() / m,
                    members.iter().map(|(p, _)| p.1).sum::<f64>() / m,
                );
            }
        }
        if !changed {
            break;
        }
    }
    assign
}

/// Reassigns SDL coordinates only. Level 1 puts each SDL within
/// [`DENSITY_R_MIN`] of its home; levels 2..=7 merge SDLs onto
/// `ceil(n / size)` cluster centroids of the home coordinates, with `size`
/// taken from [`DENSITY_CLUSTER_SIZES`].
pub fn vary_sdl_density(base: &Instance, level: u8, rng_seed: u64) -> Result<Instance> {
    if !(1..=7).contains(&level) {
        return Err(Error::DensityLevel(level));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut data = base.data().clone();
    let n = data.meta.n;
    if n == 0 {
        return Instance::new(data);
    }
    if level == 1 {
        for c in &mut data.customers {
            let (dx, dy) = annulus_point(&mut rng, [0.0, DENSITY_R_MIN]);
            c.sdl_x = c.x + dx;
            c.sdl_y = c.y + dy;
        }
    } else {
        let k = n.div_ceil(DENSITY_CLUSTER_SIZES[level as usize - 1]);
        let homes: Vec<(f64, f64)> = data.customers.iter().map(|c| (c.x, c.y)).collect();
        let assign = kmeans(&homes, k, &mut rng);
        for cluster in 0..k {
            let members: Vec<usize> = (0..n).filter(|&i| assign[i] == cluster).collect();
            if members.is_empty() {
                continue;
            }
            let m = members.len() as f64;
            let cx = members.iter().map(|&i| homes[i].0).sum::<f64>() / m;
            let cy = members.iter().map(|&i| homes[i].1).sum::<f64>() / m;
            for &i in &members {
                data.customers[i].sdl_x = cx;
                data.customers[i].sdl_y = cy;
            }
        }
    }
    data.meta.name = format!("{}-{level}", base.name());
    Instance::new(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SOLOMON: &str = "C101

VEHICLE
NUMBER     CAPACITY
  25         200

CUSTOMER
CUST NO.  XCOORD.   YCOORD.    DEMAND   READY TIME  DUE DATE   SERVICE   TIME

    0      40         50          0          0       1236          0
    1      45         68         10        912        967         90
    2      45         70         30        825        870         90
";

    #[test]
    fn parses_solomon_layout() {
        let s = parse_solomon(SOLOMON).unwrap();
        assert_eq!(s.name, "C101");
        assert_eq!(s.vehicles, 25);
        assert_eq!(s.capacity, 200.0);
        assert_eq!(s.depot.due, 1236.0);
        assert_eq!(s.customers.len(), 2);
        assert_eq!(s.customers[1].ready, 825.0);
    }

    #[test]
    fn empty_seed_is_rejected() {
        let mut s = parse_solomon(SOLOMON).unwrap();
        s.customers.clear();
        assert!(matches!(
            generate_mt_instance(&s, 1, &MtConfig::default()),
            Err(Error::EmptySeed)
        ));
    }

    #[test]
    fn certain_acceptance() {
        let seed = synthetic_solomon(SolomonClass::R, 12, 3);
        let cfg = MtConfig {
            accept_aev: 1.0,
            accept_sdl: 1.0,
            ..MtConfig::default()
        };
        let inst = generate_mt_instance(&seed, 5, &cfg).unwrap();
        assert!(inst.customers().iter().all(|c| c.accepts_aev && c.accepts_sdl));
        let cfg = MtConfig {
            accept_aev: 0.0,
            accept_sdl: 0.0,
            ..MtConfig::default()
        };
        let inst = generate_mt_instance(&seed, 5, &cfg).unwrap();
        assert!(inst.customers().iter().all(|c| !c.accepts_aev && !c.accepts_sdl));
    }

    #[test]
    fn synthetic_windows_fit_the_horizon() {
        for class in [SolomonClass::R, SolomonClass::C, SolomonClass::Rc] {
            let s = synthetic_solomon(class, 40, 9);
            assert!(s.customers.iter().all(|r| 0.0 <= r.ready && r.ready <= r.due && r.due <= 480.0));
        }
    }

    #[test]
    fn density_level_out_of_range() {
        let seed = synthetic_solomon(SolomonClass::R, 5, 1);
        let inst = generate_mt_instance(&seed, 1, &MtConfig::default()).unwrap();
        assert!(matches!(vary_sdl_density(&inst, 0, 1), Err(Error::DensityLevel(0))));
        assert!(matches!(vary_sdl_density(&inst, 8, 1), Err(Error::DensityLevel(8))));
    }
}
