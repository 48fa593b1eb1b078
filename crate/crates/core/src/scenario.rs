//! Seeded vehicle mobility and per-tick service requests.
//!
//! A scenario is a sequence of [`StateObservation`]s, one per time unit. Vehicles follow
//! random-waypoint trips (straight legs between uniformly drawn points at a uniformly drawn
//! speed). A density profile decides how many of them are active at each tick, and every
//! active vehicle issues exactly one request for a uniformly chosen service.
//!
//! Traces can be exported to and imported from a small CSV format
//! (`t,vehicle_id,x_m,y_m,service_id`), so externally produced mobility traces can be
//! replayed through the same pipeline.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TRACE_HEADER: &str = "t,vehicle_id,x_m,y_m,service_id";

/// Rectangular simulation area in meters, anchored at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub width: f64,
    pub height: f64,
}

impl Area {
    pub fn new(width: f64, height: f64) -> Result<Self> {
        let area = Area { width, height };
        area.validate()?;
        Ok(area)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.height > 0.0) || !self.width.is_finite() || !self.height.is_finite() {
            return Err(Error::config(format!(
                "area dimensions must be positive, got {} x {}",
                self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn contains(&self, p: Point) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }

    pub fn center(&self) -> Point {
        Point::new(self.width / 2.0, self.height / 2.0)
    }

    pub fn diagonal_km(&self) -> f64 {
        self.width.hypot(self.height) / 1000.0
    }
}

impl Default for Area {
    /// Roughly 3 km² of urban grid.
    fn default() -> Self {
        Area {
            width: 1732.0,
            height: 1732.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn lerp(self, other: Point, f: f64) -> Point {
        Point::new(self.x + (other.x - self.x) * f, self.y + (other.y - self.y) * f)
    }

    /// Snap to millimeter resolution so positions survive a round trip through the trace CSV.
    fn snap_mm(self, area: &Area) -> Point {
        let snap = |v: f64, hi: f64| ((v * 1000.0).round() / 1000.0).clamp(0.0, hi);
        Point::new(snap(self.x, area.width), snap(self.y, area.height))
    }
}

/// An edge site hosting service instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeNode {
    pub id: usize,
    pub position: Point,
    /// Available resource units.
    pub capacity: u32,
}

/// Lay out one node per capacity entry on a regular grid centered in `area`, with
/// `spacing` meters between neighbours (clamped to stay inside the area).
pub fn grid_edge_nodes(area: &Area, capacities: &[u32], spacing: f64) -> Result<Vec<EdgeNode>> {
    if capacities.is_empty() {
        return Err(Error::config("at least one edge node is required"));
    }
    if let Some(c) = capacities.iter().find(|&&c| c == 0) {
        return Err(Error::config(format!("edge capacity must be positive, got {c}")));
    }
    let n = capacities.len();
    let rows = ((n as f64).sqrt().floor() as usize).max(1);
    let cols = n.div_ceil(rows);
    let center = area.center();
    let nodes = capacities
        .iter()
        .enumerate()
        .map(|(id, &capacity)| {
            let (r, c) = (id / cols, id % cols);
            let x = center.x + (c as f64 - (cols - 1) as f64 / 2.0) * spacing;
            let y = center.y + (r as f64 - (rows - 1) as f64 / 2.0) * spacing;
            EdgeNode {
                id,
                position: Point::new(x.clamp(0.0, area.width), y.clamp(0.0, area.height)),
                capacity,
            }
        })
        .collect();
    Ok(nodes)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    /// Simulation time in (fractional) time units.
    pub time: f64,
    pub position: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: u32,
    /// Time-sorted trip corners; positions between them are linearly interpolated.
    pub trip: Vec<Waypoint>,
    /// First and last tick (inclusive) at which the vehicle is active.
    pub active: Option<(u32, u32)>,
}

impl Vehicle {
    pub fn position_at(&self, t: f64) -> Point {
        let trip = &self.trip;
        let idx = trip.partition_point(|w| w.time <= t);
        if idx == 0 {
            return trip[0].position;
        }
        if idx == trip.len() {
            return trip[trip.len() - 1].position;
        }
        let (a, b) = (trip[idx - 1], trip[idx]);
        let span = b.time - a.time;
        let f = if span > 0.0 { (t - a.time) / span } else { 1.0 };
        a.position.lerp(b.position, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServiceRequest {
    pub vehicle: u32,
    pub location: Point,
    pub time: u32,
    pub service: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleAt {
    pub vehicle: u32,
    pub location: Point,
}

/// Everything the placement agent sees at one time unit: for each service, the vehicles
/// requesting it and where they are.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateObservation {
    pub time: u32,
    /// Indexed by service id; each list sorted by vehicle id.
    pub per_service: Vec<Vec<VehicleAt>>,
}

impl StateObservation {
    pub fn empty(time: u32, service_count: usize) -> Self {
        StateObservation {
            time,
            per_service: vec![Vec::new(); service_count],
        }
    }

    /// Group requests for a single tick by service. Requests for other ticks are ignored.
    pub fn from_requests(time: u32, service_count: usize, requests: &[ServiceRequest]) -> Self {
        let mut obs = StateObservation::empty(time, service_count);
        for r in requests.iter().filter(|r| r.time == time) {
            obs.per_service[r.service].push(VehicleAt {
                vehicle: r.vehicle,
                location: r.location,
            });
        }
        for list in &mut obs.per_service {
            list.sort_by_key(|v| v.vehicle);
        }
        obs
    }

    pub fn service_count(&self) -> usize {
        self.per_service.len()
    }

    /// λ_s: number of vehicles requesting service `s`.
    pub fn demand(&self, s: usize) -> usize {
        self.per_service[s].len()
    }

    pub fn demands(&self) -> Vec<usize> {
        self.per_service.iter().map(Vec::len).collect()
    }

    pub fn total_requests(&self) -> usize {
        self.per_service.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total_requests() == 0
    }

    pub fn locations(&self, s: usize) -> impl Iterator<Item = Point> + '_ {
        self.per_service[s].iter().map(|v| v.location)
    }

    /// All requests, ordered by vehicle id.
    pub fn requests(&self) -> Vec<ServiceRequest> {
        let mut out: Vec<ServiceRequest> = self
            .per_service
            .iter()
            .enumerate()
            .flat_map(|(s, list)| {
                list.iter().map(move |v| ServiceRequest {
                    vehicle: v.vehicle,
                    location: v.location,
                    time: self.time,
                    service: s,
                })
            })
            .collect();
        out.sort_by_key(|r| r.vehicle);
        out
    }

    fn retain_vehicles(&mut self, keep: impl Fn(u32) -> bool) {
        for list in &mut self.per_service {
            list.retain(|v| keep(v.vehicle));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrivalProfile {
    /// Ramp up over the first third of the horizon, plateau, ramp down over the last third.
    Ramp,
    /// Every vehicle active at every tick.
    Uniform,
    /// Explicit active fraction in [0, 1] per tick; length must equal the horizon.
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbruptChange {
    pub period: u32,
    pub duration: u32,
    pub factor: f64,
}

impl AbruptChange {
    pub fn validate(&self) -> Result<()> {
        if self.period == 0 {
            return Err(Error::config("abrupt-change period must be positive"));
        }
        if self.duration >= self.period {
            return Err(Error::config(format!(
                "abrupt-change duration ({}) must be shorter than its period ({})",
                self.duration, self.period
            )));
        }
        if !(self.factor > 0.0 && self.factor <= 1.0) {
            return Err(Error::config(format!(
                "abrupt-change density factor must lie in (0, 1], got {}",
                self.factor
            )));
        }
        Ok(())
    }

    /// Index of the reduced-density window containing `t`, if any. Windows start at every
    /// positive multiple of the period.
    pub fn window(&self, t: u32) -> Option<u32> {
        let k = t / self.period;
        (k >= 1 && t - k * self.period < self.duration).then_some(k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub vehicle_count: usize,
    pub service_count: usize,
    pub horizon: u32,
    pub arrival_profile: ArrivalProfile,
    pub abrupt_change: Option<AbruptChange>,
    /// m/s
    pub min_speed: f64,
    /// m/s
    pub max_speed: f64,
    /// Seconds of simulated time per time unit.
    pub tick_seconds: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 1,
            vehicle_count: 200,
            service_count: 8,
            horizon: 600,
            arrival_profile: ArrivalProfile::Ramp,
            abrupt_change: None,
            min_speed: 5.0,
            max_speed: 15.0,
            tick_seconds: 1.0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vehicle_count == 0 {
            return Err(Error::config("vehicle count must be positive"));
        }
        if self.service_count == 0 {
            return Err(Error::config("service count must be positive"));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon must be at least one time unit"));
        }
        if !(self.min_speed > 0.0 && self.min_speed <= self.max_speed && self.max_speed.is_finite()) {
            return Err(Error::config(format!(
                "speed range must satisfy 0 < min <= max, got [{}, {}]",
                self.min_speed, self.max_speed
            )));
        }
        if !(self.tick_seconds > 0.0 && self.tick_seconds.is_finite()) {
            return Err(Error::config("tick length must be positive"));
        }
        if let ArrivalProfile::Custom(fracs) = &self.arrival_profile {
            if fracs.len() != self.horizon as usize {
                return Err(Error::config(format!(
                    "custom arrival profile has {} entries, horizon is {}",
                    fracs.len(),
                    self.horizon
                )));
            }
            if fracs.iter().any(|f| !(0.0..=1.0).contains(f)) {
                return Err(Error::config("custom arrival fractions must lie in [0, 1]"));
            }
        }
        if let Some(change) = &self.abrupt_change {
            change.validate()?;
        }
        Ok(())
    }

    /// Number of vehicles active at tick `t` (1-based) before any abrupt change.
    pub fn active_count(&self, t: u32) -> usize {
        let v = self.vehicle_count as f64;
        let frac = match &self.arrival_profile {
            ArrivalProfile::Uniform => 1.0,
            ArrivalProfile::Custom(fracs) => fracs[(t - 1) as usize],
            ArrivalProfile::Ramp => {
                let ramp = self.horizon as f64 / 3.0;
                let up = t as f64 / ramp;
                let down = (self.horizon + 1 - t) as f64 / ramp;
                up.min(down).min(1.0)
            }
        };
        ((v * frac - 1e-9).ceil().max(0.0) as usize).min(self.vehicle_count)
    }
}

/// Random-waypoint trips for the whole fleet plus each vehicle's rank in the activation order.
/// Vehicle `i` is active at `t` iff `rank[i] < active_count(t)`, so active sets are nested.
fn generate_fleet_with_ranks(config: &ScenarioConfig, area: &Area, rng: &mut ChaCha8Rng) -> (Vec<Vehicle>, Vec<usize>) {
    let horizon = config.horizon as f64;
    let mut vehicles = Vec::with_capacity(config.vehicle_count);
    for id in 0..config.vehicle_count {
        let mut pos = Point::new(rng.random_range(0.0..=area.width), rng.random_range(0.0..=area.height));
        let mut time = 0.0;
        let mut trip = vec![Waypoint { time, position: pos }];
        while time < horizon {
            let dest = Point::new(rng.random_range(0.0..=area.width), rng.random_range(0.0..=area.height));
            let speed = rng.random_range(config.min_speed..=config.max_speed);
            let travel = pos.distance(dest) / (speed * config.tick_seconds);
            // Degenerate zero-length legs would stall the loop.
            time += travel.max(1e-6);
            pos = dest;
            trip.push(Waypoint { time, position: pos });
        }
        vehicles.push(Vehicle {
            id: id as u32,
            trip,
            active: None,
        });
    }

    let mut order: Vec<usize> = (0..config.vehicle_count).collect();
    order.shuffle(rng);
    let mut rank = vec![0; config.vehicle_count];
    for (r, &id) in order.iter().enumerate() {
        rank[id] = r;
    }

    for t in 1..=config.horizon {
        let n = config.active_count(t);
        for v in vehicles.iter_mut().filter(|v| rank[v.id as usize] < n) {
            v.active = Some(match v.active {
                None => (t, t),
                Some((first, _)) => (first, t),
            });
        }
    }
    (vehicles, rank)
}

/// The fleet a scenario is built from (trips and activity hulls).
pub fn generate_fleet(config: &ScenarioConfig, area: &Area) -> Result<Vec<Vehicle>> {
    config.validate()?;
    area.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    Ok(generate_fleet_with_ranks(config, area, &mut rng).0)
}

/// Generate one observation per tick `1..=horizon`.
pub fn generate_scenario(config: &ScenarioConfig, area: &Area) -> Result<Vec<StateObservation>> {
    config.validate()?;
    area.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (vehicles, rank) = generate_fleet_with_ranks(config, area, &mut rng);
    let s_count = config.service_count;

    let mut observations = Vec::with_capacity(config.horizon as usize);
    let mut deck = Vec::new();
    for t in 1..=config.horizon {
        let n = config.active_count(t);
        let active: Vec<&Vehicle> = vehicles.iter().filter(|v| rank[v.id as usize] < n).collect();

        // Stratified draw: each vehicle's service is uniform over S, while the per-service
        // counts never exceed ceil(n / |S|).
        deck.clear();
        let copies = n.div_ceil(s_count);
        deck.extend((0..s_count).flat_map(|s| std::iter::repeat_n(s, copies)));
        deck.shuffle(&mut rng);

        let mut obs = StateObservation::empty(t, s_count);
        for (v, &s) in active.iter().zip(deck.iter()) {
            obs.per_service[s].push(VehicleAt {
                vehicle: v.id,
                location: v.position_at(t as f64).snap_mm(area),
            });
        }
        observations.push(obs);
    }

    match &config.abrupt_change {
        Some(change) => apply_abrupt_change(observations, change),
        None => Ok(observations),
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Thin every tick inside a reduced-density window down to `ceil(factor * n)` vehicles.
///
/// The retained subset is chosen by a per-window hash of the vehicle id, so it is uniform
/// over vehicles, reproducible, and stable for the duration of a window. Ticks outside the
/// windows are returned unchanged.
pub fn apply_abrupt_change(mut observations: Vec<StateObservation>, change: &AbruptChange) -> Result<Vec<StateObservation>> {
    change.validate()?;
    for obs in &mut observations {
        let Some(k) = change.window(obs.time) else {
            continue;
        };
        let n = obs.total_requests();
        let keep = ((change.factor * n as f64) - 1e-9).ceil() as usize;
        if keep >= n {
            continue;
        }
        let salt = splitmix64(k as u64);
        let mut ids: Vec<(u64, u32)> = obs
            .requests()
            .iter()
            .map(|r| (splitmix64(salt ^ r.vehicle as u64), r.vehicle))
            .collect();
        ids.sort_unstable();
        let mut kept: Vec<u32> = ids[..keep].iter().map(|&(_, id)| id).collect();
        kept.sort_unstable();
        obs.retain_vehicles(|id| kept.binary_search(&id).is_ok());
    }
    Ok(observations)
}

/// Render observations in the trace CSV format.
pub fn trace_to_string(observations: &[StateObservation]) -> String {
    let mut out = String::with_capacity(64 * observations.iter().map(|o| o.total_requests()).sum::<usize>() + 64);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for obs in observations {
        for r in obs.requests() {
            let _ = writeln!(
                out,
                "{},{},{:.3},{:.3},{}",
                r.time, r.vehicle, r.location.x, r.location.y, r.service
            );
        }
    }
    out
}

pub fn export_trace(path: &Path, observations: &[StateObservation]) -> Result<()> {
    std::fs::write(path, trace_to_string(observations)).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Deserialize)]
struct TraceRow {
    t: u32,
    vehicle_id: u32,
    x_m: f64,
    y_m: f64,
    service_id: usize,
}

/// Read a trace CSV, grouping rows by tick. Only ticks that appear in the file are returned.
pub fn import_trace(path: &Path, area: &Area, service_count: usize) -> Result<Vec<StateObservation>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_trace(file, path, area, service_count)
}

pub fn read_trace<R: std::io::Read>(reader: R, path: &Path, area: &Area, service_count: usize) -> Result<Vec<StateObservation>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let expected: Vec<&str> = TRACE_HEADER.split(',').collect();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header `{TRACE_HEADER}`"),
        });
    }

    let mut requests = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row: TraceRow = record.deserialize(Some(&headers)).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: e.to_string(),
        })?;
        if row.service_id >= service_count {
            return Err(Error::Validation(format!(
                "{}:{line}: service id {} out of range (|S| = {service_count})",
                path.display(),
                row.service_id
            )));
        }
        let location = Point::new(row.x_m, row.y_m);
        if !area.contains(location) {
            return Err(Error::Validation(format!(
                "{}:{line}: position ({}, {}) outside the {} x {} m area",
                path.display(),
                row.x_m,
                row.y_m,
                area.width,
                area.height
            )));
        }
        requests.push(ServiceRequest {
            vehicle: row.vehicle_id,
            location,
            time: row.t,
            service: row.service_id,
        });
    }

    requests.sort_by_key(|r| (r.time, r.vehicle));
    if let Some(w) = requests.windows(2).find(|w| w[0].time == w[1].time && w[0].vehicle == w[1].vehicle) {
        return Err(Error::Validation(format!(
            "{}: vehicle {} issues more than one request at t={}",
            path.display(),
            w[0].vehicle,
            w[0].time
        )));
    }

    let mut observations = Vec::new();
    for chunk in requests.chunk_by(|a, b| a.time == b.time) {
        observations.push(StateObservation::from_requests(chunk[0].time, service_count, chunk));
    }
    Ok(observations)
}
