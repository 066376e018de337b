//! Piecewise-linear time-dependent travel times.
//!
//! A [`SpeedProfile`] assigns a constant speed to each time zone of the
//! planning horizon. Driving a fixed distance under such a profile gives a
//! travel time that is piecewise linear in the departure time, with slope
//! `v_dep / v_arr - 1` on each piece. The slope is always greater than `-1`,
//! so the arrival time `t + tau(t)` is strictly increasing (FIFO).
//!
//! [`TravelTimeFn`] stores `tau` for one arc. [`ReadyTimeFn`] stores the map
//! from a departure time at one node to the earliest time the vehicle can
//! leave the next node (`t + tau(t) + service`), and supports inversion and
//! composition along a route.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for breakpoint deduplication and segment selection.
pub const EPS_BP: f64 = 1e-9;

fn tol(y: f64) -> f64 {
    EPS_BP * y.abs().max(1.0)
}

/// Stepwise-constant speeds over consecutive time zones.
///
/// `boundaries` has one more entry than `speeds`: zone `k` covers
/// `[boundaries[k], boundaries[k + 1])`. The last zone's speed also applies
/// after the final boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedProfile {
    pub name: String,
    pub boundaries: Vec<f64>,
    pub speeds: Vec<f64>,
}

impl SpeedProfile {
    pub fn new(name: impl Into<String>, boundaries: Vec<f64>, speeds: Vec<f64>) -> Self {
        SpeedProfile {
            name: name.into(),
            boundaries,
            speeds,
        }
    }

    /// A single zone with constant speed over `[start, end]`.
    pub fn constant(name: impl Into<String>, start: f64, end: f64, speed: f64) -> Self {
        SpeedProfile::new(name, vec![start, end], vec![speed])
    }

    /// Checks positivity, ordering and that the zones span exactly `[start, end]`.
    pub fn validate(&self, start: f64, end: f64) -> Result<()> {
        let err = |message: String| Error::Profile {
            profile: self.name.clone(),
            message,
        };
        if self.speeds.is_empty() {
            return Err(err("at least one zone is required".into()));
        }
        if self.boundaries.len() != self.speeds.len() + 1 {
            return Err(err(format!(
                "{} boundaries given for {} zones (expected {})",
                self.boundaries.len(),
                self.speeds.len(),
                self.speeds.len() + 1
            )));
        }
        if let Some(v) = self.speeds.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(err(format!("speed {v} is not strictly positive")));
        }
        if self.boundaries.iter().any(|b| !b.is_finite()) {
            return Err(err("boundaries must be finite".into()));
        }
        if let Some(w) = self.boundaries.windows(2).find(|w| w[0] >= w[1]) {
            return Err(err(format!(
                "boundaries must be strictly increasing ({} >= {})",
                w[0], w[1]
            )));
        }
        let first = self.boundaries[0];
        let last = *self.boundaries.last().unwrap();
        if (first - start).abs() > tol(start) || (last - end).abs() > tol(end) {
            return Err(err(format!(
                "zones cover [{first}, {last}] but the horizon is [{start}, {end}]; gaps are not allowed"
            )));
        }
        Ok(())
    }

    pub fn zones(&self) -> usize {
        self.speeds.len()
    }

    pub fn start(&self) -> f64 {
        self.boundaries[0]
    }

    /// Interior boundaries where the speed changes.
    fn change_points(&self) -> &[f64] {
        &self.boundaries[1..self.speeds.len()]
    }

    /// Zone index of time `t`; times before the first boundary map to zone 0.
    fn zone_of(&self, t: f64) -> usize {
        self.change_points().partition_point(|&b| b <= t)
    }

    /// Time-weighted mean speed over the profile's zones.
    pub fn mean_speed(&self) -> f64 {
        let span = self.boundaries.last().unwrap() - self.boundaries[0];
        self.speeds
            .iter()
            .zip(self.boundaries.windows(2))
            .map(|(v, w)| v * (w[1] - w[0]))
            .sum::<f64>()
            / span
    }

    /// Arrival time when leaving at `depart` to cover `distance`.
    pub fn arrival(&self, depart: f64, distance: f64) -> f64 {
        let cps = self.change_points();
        let mut zone = self.zone_of(depart);
        let mut time = depart;
        let mut remaining = distance;
        loop {
            let speed = self.speeds[zone];
            match cps.get(zone) {
                Some(&zone_end) => {
                    let reach = speed * (zone_end - time);
                    if remaining <= reach {
                        return time + remaining / speed;
                    }
                    remaining -= reach;
                    time = zone_end;
                    zone += 1;
                }
                None => return time + remaining / speed,
            }
        }
    }

    /// Latest departure that arrives exactly at `arrive` after covering
    /// `distance`. Zone 0's speed is extended backwards before the horizon.
    fn departure_for_arrival(&self, arrive: f64, distance: f64) -> f64 {
        let cps = self.change_points();
        // zone containing the instant just before `arrive`
        let mut zone = cps.partition_point(|&b| b < arrive);
        let mut time = arrive;
        let mut remaining = distance;
        loop {
            let speed = self.speeds[zone];
            if zone == 0 {
                return time - remaining / speed;
            }
            let zone_start = cps[zone - 1];
            let reach = speed * (time - zone_start);
            if remaining <= reach {
                return time - remaining / speed;
            }
            remaining -= reach;
            time = zone_start;
            zone -= 1;
        }
    }
}

/// One linear piece `y = slope * t + intercept`, valid from `start` up to the
/// next piece's start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub start: f64,
    pub slope: f64,
    pub intercept: f64,
}

impl Piece {
    #[inline]
    pub fn at(&self, t: f64) -> f64 {
        self.slope * t + self.intercept
    }
}

/// Continuous piecewise-linear function on `[start, end]` with half-open
/// pieces; the final piece is closed at `end`, which may be `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    pieces: Vec<Piece>,
    end: f64,
}

impl PiecewiseLinear {
    pub fn new(pieces: Vec<Piece>, end: f64) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::EmptyDomain);
        }
        if pieces.windows(2).any(|w| w[0].start >= w[1].start) || end < pieces.last().unwrap().start
        {
            return Err(Error::Config(
                "piece starts must be strictly increasing and below the domain end".into(),
            ));
        }
        Ok(PiecewiseLinear { pieces, end })
    }

    pub fn affine(start: f64, end: f64, slope: f64, intercept: f64) -> Self {
        PiecewiseLinear {
            pieces: vec![Piece {
                start,
                slope,
                intercept,
            }],
            end,
        }
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn start(&self) -> f64 {
        self.pieces[0].start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.pieces.iter().map(|p| p.start)
    }

    #[inline]
    fn piece_index(&self, t: f64) -> usize {
        self.pieces
            .partition_point(|p| p.start <= t)
            .saturating_sub(1)
    }

    #[inline]
    fn piece_at(&self, t: f64) -> &Piece {
        &self.pieces[self.piece_index(t)]
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start() - tol(self.start()) && t <= self.end + tol(self.end)
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if t.is_nan() || !self.contains(t) {
            return Err(Error::OutOfDomain {
                t,
                start: self.start(),
                end: self.end,
            });
        }
        Ok(self.eval_unchecked(t))
    }

    /// Evaluates without a domain check; times before the start use the
    /// first piece.
    #[inline]
    pub fn eval_unchecked(&self, t: f64) -> f64 {
        self.piece_at(t).at(t)
    }

    /// Value at the domain end (only meaningful for a finite end).
    fn value_at_end(&self) -> f64 {
        self.pieces.last().unwrap().at(self.end)
    }
}

/// Travel time `tau(t)` on one arc as a function of the departure time.
#[derive(Debug, Clone, PartialEq)]
pub struct TravelTimeFn {
    tau: PiecewiseLinear,
}

/// Builds the exact travel-time function for `distance` under `profile`.
///
/// The domain starts at the profile's first boundary and is unbounded above.
pub fn build_travel_time(distance: f64, profile: &SpeedProfile) -> Result<TravelTimeFn> {
    if !(distance.is_finite() && distance >= 0.0) {
        return Err(Error::Config(format!("distance {distance} must be finite and non-negative")));
    }
    let start = profile.start();
    if distance == 0.0 {
        return Ok(TravelTimeFn {
            tau: PiecewiseLinear::affine(start, f64::INFINITY, 0.0, 0.0),
        });
    }

    let mut bps: Vec<f64> = Vec::with_capacity(2 * profile.zones());
    bps.push(start);
    for &c in profile.change_points() {
        bps.push(c);
        let back = profile.departure_for_arrival(c, distance);
        if back > start {
            bps.push(back);
        }
    }
    bps.sort_by(f64::total_cmp);
    bps.dedup_by(|a, b| (*a - *b).abs() <= tol(*b));

    let pieces = bps
        .iter()
        .enumerate()
        .map(|(k, &w)| {
            let probe = match bps.get(k + 1) {
                Some(&next) => 0.5 * (w + next),
                None => w + 1.0,
            };
            let v_dep = profile.speeds[profile.zone_of(probe)];
            let v_arr = profile.speeds[profile.zone_of(profile.arrival(probe, distance))];
            let slope = v_dep / v_arr - 1.0;
            let tau_w = profile.arrival(w, distance) - w;
            Piece {
                start: w,
                slope,
                intercept: tau_w - slope * w,
            }
        })
        .collect();

    Ok(TravelTimeFn {
        tau: PiecewiseLinear::new(pieces, f64::INFINITY)?,
    })
}

impl TravelTimeFn {
    /// Constant travel time over `[start, +inf)`.
    pub fn constant(start: f64, value: f64) -> Self {
        TravelTimeFn {
            tau: PiecewiseLinear::affine(start, f64::INFINITY, 0.0, value),
        }
    }

    pub fn from_pieces(pieces: Vec<Piece>) -> Result<Self> {
        Ok(TravelTimeFn {
            tau: PiecewiseLinear::new(pieces, f64::INFINITY)?,
        })
    }

    pub fn pieces(&self) -> &[Piece] {
        self.tau.pieces()
    }

    /// Breakpoints `w^0 < w^1 < ...` in departure time.
    pub fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.tau.breakpoints()
    }

    pub fn start(&self) -> f64 {
        self.tau.start()
    }

    /// Travel time for a departure at `t`; pieces are half-open, so a
    /// departure exactly at `w^k` uses piece `k`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        self.tau.eval(t)
    }

    /// Arrival-plus-service time at the next node, without domain checks.
    #[inline]
    pub fn ready(&self, t: f64, service: f64) -> f64 {
        t + self.tau.eval_unchecked(t) + service
    }

    /// Departure time whose ready time equals `y`.
    pub fn ready_inverse(&self, y: f64, service: f64) -> Result<f64> {
        let pieces = self.tau.pieces();
        let first = pieces[0].start;
        if y < self.ready(first, service) - tol(y) {
            return Err(Error::NoFeasibleDeparture(y));
        }
        let k = pieces
            .partition_point(|p| self.ready(p.start, service) <= y)
            .saturating_sub(1);
        let p = &pieces[k];
        Ok(((y - service - p.intercept) / (1.0 + p.slope)).max(first))
    }

    pub fn is_fifo(&self) -> bool {
        self.tau.pieces().iter().all(|p| p.slope > -1.0)
    }

    pub fn ready_fn(&self, service: f64) -> ReadyTimeFn {
        ReadyTimeFn::from_travel(self, service)
    }
}

/// Map from a departure time at node `i` to the earliest departure-ready
/// time at its successor `j`: `f(t) = t + tau_ij(t) + W_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadyTimeFn {
    f: PiecewiseLinear,
}

impl ReadyTimeFn {
    pub fn from_travel(tau: &TravelTimeFn, service: f64) -> Self {
        let pieces = tau
            .pieces()
            .iter()
            .map(|p| Piece {
                start: p.start,
                slope: 1.0 + p.slope,
                intercept: p.intercept + service,
            })
            .collect();
        ReadyTimeFn {
            f: PiecewiseLinear {
                pieces,
                end: tau.tau.end(),
            },
        }
    }

    /// Wraps a piecewise-linear function; every piece must have positive slope.
    pub fn new(f: PiecewiseLinear) -> Result<Self> {
        if f.pieces().iter().any(|p| !(p.slope > 0.0)) {
            return Err(Error::Config("ready-time functions must be strictly increasing".into()));
        }
        Ok(ReadyTimeFn { f })
    }

    pub fn as_pwl(&self) -> &PiecewiseLinear {
        &self.f
    }

    pub fn start(&self) -> f64 {
        self.f.start()
    }

    pub fn end(&self) -> f64 {
        self.f.end()
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.f.breakpoints()
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        self.f.eval(t)
    }

    /// Departure time `t` with `f(t) = y`, picking the unique piece whose
    /// image contains `y`.
    pub fn invert(&self, y: f64) -> Result<f64> {
        let f = &self.f;
        if y.is_nan() || y < f.eval_unchecked(f.start()) - tol(y) {
            return Err(Error::NoFeasibleDeparture(y));
        }
        if f.end().is_finite() && y > f.value_at_end() + tol(y) {
            return Err(Error::AboveRange(y));
        }
        let pieces = f.pieces();
        let k = pieces
            .partition_point(|p| p.at(p.start) <= y)
            .saturating_sub(1);
        let p = &pieces[k];
        Ok(((y - p.intercept) / p.slope).clamp(f.start(), f.end()))
    }

    /// Pointwise composition `g ∘ self`, restricted to departures whose
    /// image falls in `g`'s domain.
    pub fn then(&self, g: &ReadyTimeFn) -> Result<ReadyTimeFn> {
        let f = &self.f;
        let mut lo = f.start();
        if f.eval_unchecked(lo) < g.start() {
            if f.end().is_finite() && f.value_at_end() < g.start() - tol(g.start()) {
                return Err(Error::EmptyDomain);
            }
            lo = self.invert(g.start())?;
        }
        let mut hi = f.end();
        if g.end().is_finite() && (hi.is_infinite() || f.value_at_end() > g.end()) {
            hi = self.invert(g.end())?;
        }
        if lo > hi + tol(hi) {
            return Err(Error::EmptyDomain);
        }
        let hi = hi.max(lo);

        let mut points = vec![lo];
        points.extend(f.breakpoints().filter(|&b| b > lo && b < hi));
        let (ylo, yhi) = (f.eval_unchecked(lo), f.eval_unchecked(hi));
        for b in g.breakpoints() {
            if b > ylo && b < yhi {
                points.push(self.invert(b)?);
            }
        }
        points.sort_by(f64::total_cmp);
        points.dedup_by(|a, b| (*a - *b).abs() <= tol(*b));

        let pieces = points
            .iter()
            .enumerate()
            .map(|(k, &s)| {
                let probe = match points.get(k + 1) {
                    Some(&next) => 0.5 * (s + next),
                    None if hi.is_finite() && hi > s => 0.5 * (s + hi),
                    None => s + 1.0,
                };
                let inner = f.piece_at(probe);
                let outer = g.f.piece_at(inner.at(probe));
                Piece {
                    start: s,
                    slope: outer.slope * inner.slope,
                    intercept: outer.slope * inner.intercept + outer.intercept,
                }
            })
            .collect();
        Ok(ReadyTimeFn {
            f: PiecewiseLinear { pieces, end: hi },
        })
    }
}

/// Departure time at `i` whose ready time at `j` equals `y`.
pub fn invert_ready(f: &ReadyTimeFn, y: f64) -> Result<f64> {
    f.invert(y)
}

/// Composes `f_ab` (departure at a -> ready at b) with `f_bc` into a map from
/// departure at a to ready time at c.
pub fn compose_ready(f_ab: &ReadyTimeFn, f_bc: &ReadyTimeFn) -> Result<ReadyTimeFn> {
    f_ab.then(f_bc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_speed() -> SpeedProfile {
        SpeedProfile::new("two", vec![0.0, 10.0, 100.0], vec![2.0, 1.0])
    }

    #[test]
    fn constant_speed_gives_constant_travel_time() {
        let p = SpeedProfile::constant("flat", 0.0, 100.0, 1.0);
        let f = build_travel_time(10.0, &p).unwrap();
        assert_eq!(f.pieces().len(), 1);
        assert_eq!(f.pieces()[0].slope, 0.0);
        assert_eq!(f.pieces()[0].intercept, 10.0);
        for t in [0.0, 3.5, 99.0, 250.0] {
            assert_eq!(f.eval(t).unwrap(), 10.0);
        }
    }

    #[test]
    fn speed_drop_examples() {
        let f = build_travel_time(30.0, &two_speed()).unwrap();
        assert!((f.eval(0.0).unwrap() - 20.0).abs() < 1e-12);
        assert!((f.eval(10.0).unwrap() - 30.0).abs() < 1e-12);
        assert!(f.is_fifo());
        assert!(f.pieces().len() <= 4);
    }

    #[test]
    fn breakpoint_uses_right_piece() {
        let f = build_travel_time(30.0, &two_speed()).unwrap();
        let w1 = f.pieces()[1].start;
        let right = f.pieces()[1].at(w1);
        assert_eq!(f.eval(w1).unwrap(), right);
    }

    #[test]
    fn eval_before_domain_is_an_error() {
        let f = build_travel_time(30.0, &two_speed()).unwrap();
        assert!(matches!(f.eval(-1.0), Err(Error::OutOfDomain { .. })));
        assert!(f.eval(f64::NAN).is_err());
    }

    #[test]
    fn zero_distance_is_free() {
        let f = build_travel_time(0.0, &two_speed()).unwrap();
        assert_eq!(f.eval(5.0).unwrap(), 0.0);
    }

    #[test]
    fn affine_inversion() {
        let f = TravelTimeFn::constant(0.0, 10.0).ready_fn(2.0);
        assert!((f.invert(17.0).unwrap() - 5.0).abs() < 1e-12);
        assert!(matches!(f.invert(11.0), Err(Error::NoFeasibleDeparture(_))));
    }

    #[test]
    fn inversion_above_finite_range() {
        let f = ReadyTimeFn::new(PiecewiseLinear::affine(0.0, 10.0, 1.0, 0.0)).unwrap();
        assert!(matches!(f.invert(11.0), Err(Error::AboveRange(_))));
    }

    #[test]
    fn composing_constants_adds_offsets() {
        let a = TravelTimeFn::constant(0.0, 4.0).ready_fn(1.0);
        let b = TravelTimeFn::constant(0.0, 6.0).ready_fn(2.0);
        let c = compose_ready(&a, &b).unwrap();
        assert_eq!(c.as_pwl().pieces().len(), 1);
        assert!((c.eval(3.0).unwrap() - 16.0).abs() < 1e-12);
    }

    #[test]
    fn composition_domain_is_trimmed() {
        let a = ReadyTimeFn::new(PiecewiseLinear::affine(0.0, 10.0, 1.0, 0.0)).unwrap();
        let b = ReadyTimeFn::new(PiecewiseLinear::affine(5.0, 8.0, 1.0, 1.0)).unwrap();
        let c = a.then(&b).unwrap();
        assert!((c.start() - 5.0).abs() < 1e-12);
        assert!((c.end() - 8.0).abs() < 1e-12);
        let far = ReadyTimeFn::new(PiecewiseLinear::affine(50.0, 60.0, 1.0, 0.0)).unwrap();
        assert!(matches!(a.then(&far), Err(Error::EmptyDomain)));
    }

    #[test]
    fn profile_validation_reports_gaps() {
        let p = SpeedProfile::new("gap", vec![0.0, 50.0], vec![1.0]);
        assert!(matches!(p.validate(0.0, 100.0), Err(Error::Profile { .. })));
        let p = SpeedProfile::new("neg", vec![0.0, 100.0], vec![-1.0]);
        assert!(p.validate(0.0, 100.0).is_err());
        assert!(two_speed().validate(0.0, 100.0).is_ok());
    }

    #[test]
    fn mean_speed_is_time_weighted() {
        assert!((two_speed().mean_speed() - 1.1).abs() < 1e-12);
    }
}
