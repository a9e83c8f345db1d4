//! Towers, time grids and per-user trajectories, plus the synthetic
//! population generator and the trajectory/tower CSV formats.

mod generator;
mod io;

pub use generator::{generate_population, GeneratorConfig};
pub(crate) use generator::stream_rng;
pub use io::{
    load_raw_trajectories, load_tower_map, load_trajectories, read_raw_trajectories,
    read_tower_map, read_trajectories, store_tower_map, store_trajectories, write_tower_map,
    write_trajectories, IdStyle,
};

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const SECONDS_PER_DAY: u32 = 86_400;

/// Identifier of a location cell. `TowerId::NO_RECORD` (-1) is reserved for
/// "no record in this slot" and is never a valid tower.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TowerId(pub i64);

impl TowerId {
    pub const NO_RECORD: TowerId = TowerId(-1);

    pub fn is_record(self) -> bool {
        self != Self::NO_RECORD
    }
}

impl fmt::Display for TowerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Planar position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// `self + (self - prev)`: one more step at the last observed velocity.
    pub fn extrapolate_from(self, prev: Point) -> Point {
        Point::new(self.x + (self.x - prev.x), self.y + (self.y - prev.y))
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tower {
    pub id: TowerId,
    pub x: f64,
    pub y: f64,
    pub base_station_id: i64,
    pub district_id: i64,
}

impl Tower {
    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Spatial resolution of a published series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    Sector,
    BaseStation,
    District,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Sector, Level::BaseStation, Level::District];

    pub fn name(self) -> &'static str {
        match self {
            Level::Sector => "sector",
            Level::BaseStation => "base_station",
            Level::District => "district",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sector" => Ok(Level::Sector),
            "base_station" | "basestation" | "bs" => Ok(Level::BaseStation),
            "district" => Ok(Level::District),
            other => Err(Error::UnknownLevel(other.to_string())),
        }
    }
}

/// A group of towers at one coarsening level, located at the mean of its
/// members' coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub id: i64,
    pub centroid: Point,
    pub members: Vec<TowerId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TowerMap {
    towers: Vec<Tower>,
    index: HashMap<TowerId, usize>,
    base_stations: Vec<Group>,
    districts: Vec<Group>,
}

impl TowerMap {
    /// Builds a map, sorting towers by id. Fails on duplicate or reserved ids,
    /// non-finite coordinates, or a base station split across districts.
    pub fn new(mut towers: Vec<Tower>) -> Result<Self> {
        if towers.is_empty() {
            return Err(Error::InvalidConfig("tower map has no towers".into()));
        }
        towers.sort_by_key(|t| t.id);
        let mut index = HashMap::with_capacity(towers.len());
        let mut district_of_station: HashMap<i64, i64> = HashMap::new();
        for (i, t) in towers.iter().enumerate() {
            if !t.id.is_record() {
                return Err(Error::InvalidConfig(format!(
                    "tower id {} is reserved for missing records",
                    t.id
                )));
            }
            if !t.x.is_finite() || !t.y.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "tower {} has non-finite coordinates",
                    t.id
                )));
            }
            if index.insert(t.id, i).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate tower id {}", t.id)));
            }
            match district_of_station.insert(t.base_station_id, t.district_id) {
                Some(d) if d != t.district_id => {
                    return Err(Error::InvalidConfig(format!(
                        "base station {} spans districts {} and {}",
                        t.base_station_id, d, t.district_id
                    )))
                }
                _ => {}
            }
        }
        let base_stations = build_groups(&towers, |t| t.base_station_id);
        let districts = build_groups(&towers, |t| t.district_id);
        Ok(TowerMap {
            towers,
            index,
            base_stations,
            districts,
        })
    }

    pub fn towers(&self) -> &[Tower] {
        &self.towers
    }

    pub fn len(&self) -> usize {
        self.towers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.towers.is_empty()
    }

    pub fn contains(&self, id: TowerId) -> bool {
        self.index.contains_key(&id)
    }

    /// Dense index of a tower (position in id order).
    pub fn index_of(&self, id: TowerId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn get(&self, id: TowerId) -> Option<&Tower> {
        self.index_of(id).map(|i| &self.towers[i])
    }

    pub fn position(&self, id: TowerId) -> Option<Point> {
        self.get(id).map(Tower::position)
    }

    pub fn distance(&self, a: TowerId, b: TowerId) -> Result<f64> {
        let pa = self.position(a).ok_or(Error::UnknownTower(a))?;
        let pb = self.position(b).ok_or(Error::UnknownTower(b))?;
        Ok(pa.distance(pb))
    }

    /// Positions in dense-index order.
    pub fn positions(&self) -> Vec<Point> {
        self.towers.iter().map(Tower::position).collect()
    }

    pub fn group_of(&self, level: Level, id: TowerId) -> Option<i64> {
        let t = self.get(id)?;
        Some(match level {
            Level::Sector => t.id.0,
            Level::BaseStation => t.base_station_id,
            Level::District => t.district_id,
        })
    }

    pub fn groups(&self, level: Level) -> Vec<Group> {
        match level {
            Level::Sector => self
                .towers
                .iter()
                .map(|t| Group {
                    id: t.id.0,
                    centroid: t.position(),
                    members: vec![t.id],
                })
                .collect(),
            Level::BaseStation => self.base_stations.clone(),
            Level::District => self.districts.clone(),
        }
    }

    pub fn group_count(&self, level: Level) -> usize {
        match level {
            Level::Sector => self.towers.len(),
            Level::BaseStation => self.base_stations.len(),
            Level::District => self.districts.len(),
        }
    }

    /// The map whose locations are the groups of `level`, placed at their
    /// centroids, together with the tower → group translation.
    pub fn coarsen(&self, level: Level) -> (TowerMap, HashMap<TowerId, TowerId>) {
        let mapping: HashMap<TowerId, TowerId> = self
            .towers
            .iter()
            .map(|t| (t.id, TowerId(self.group_of(level, t.id).unwrap())))
            .collect();
        if level == Level::Sector {
            return (self.clone(), mapping);
        }
        let towers = self
            .groups(level)
            .into_iter()
            .map(|g| {
                let first = self.get(g.members[0]).unwrap();
                let (bs, district) = match level {
                    Level::BaseStation => (g.id, first.district_id),
                    _ => (g.id, g.id),
                };
                Tower {
                    id: TowerId(g.id),
                    x: g.centroid.x,
                    y: g.centroid.y,
                    base_station_id: bs,
                    district_id: district,
                }
            })
            .collect();
        let coarse = TowerMap::new(towers).expect("groups form a valid map");
        (coarse, mapping)
    }
}

fn build_groups(towers: &[Tower], key: impl Fn(&Tower) -> i64) -> Vec<Group> {
    let mut acc: BTreeMap<i64, Vec<&Tower>> = BTreeMap::new();
    for t in towers {
        acc.entry(key(t)).or_default().push(t);
    }
    acc.into_iter()
        .map(|(id, members)| {
            let n = members.len() as f64;
            let x = members.iter().map(|t| t.x).sum::<f64>() / n;
            let y = members.iter().map(|t| t.y).sum::<f64>() / n;
            Group {
                id,
                centroid: Point::new(x, y),
                members: members.iter().map(|t| t.id).collect(),
            }
        })
        .collect()
}

/// A time-of-day interval `[start, end)` in seconds after local midnight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DayWindow {
    pub start: u32,
    pub end: u32,
}

impl DayWindow {
    /// 00:00 to 06:00.
    pub const NIGHT: DayWindow = DayWindow {
        start: 0,
        end: 6 * 3600,
    };
    /// 09:00 to 18:00.
    pub const WORK: DayWindow = DayWindow {
        start: 9 * 3600,
        end: 18 * 3600,
    };

    pub fn new(start: u32, end: u32) -> Result<Self> {
        if start >= end || end > SECONDS_PER_DAY {
            return Err(Error::InvalidConfig(format!(
                "window [{start}, {end}) must be non-empty and lie within one day"
            )));
        }
        Ok(DayWindow { start, end })
    }

    pub fn contains(&self, second_of_day: u32) -> bool {
        (self.start..self.end).contains(&second_of_day)
    }
}

/// Uniform slot grid. `start` is the epoch second of the first local midnight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeGrid {
    start: i64,
    slot_seconds: u32,
    slots_per_day: usize,
    num_days: usize,
}

impl TimeGrid {
    pub fn new(start: i64, slot_seconds: u32, num_days: usize) -> Result<Self> {
        if slot_seconds == 0 || SECONDS_PER_DAY % slot_seconds != 0 {
            return Err(Error::InvalidConfig(format!(
                "slot length {slot_seconds}s must divide one day"
            )));
        }
        if num_days == 0 {
            return Err(Error::InvalidConfig("grid needs at least one day".into()));
        }
        Ok(TimeGrid {
            start,
            slot_seconds,
            slots_per_day: (SECONDS_PER_DAY / slot_seconds) as usize,
            num_days,
        })
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn slot_seconds(&self) -> u32 {
        self.slot_seconds
    }

    pub fn slots_per_day(&self) -> usize {
        self.slots_per_day
    }

    pub fn num_days(&self) -> usize {
        self.num_days
    }

    /// T, the total number of slots.
    pub fn total_slots(&self) -> usize {
        self.slots_per_day * self.num_days
    }

    pub fn day_of(&self, slot: usize) -> usize {
        slot / self.slots_per_day
    }

    pub fn slot_in_day(&self, slot: usize) -> usize {
        slot % self.slots_per_day
    }

    /// Local start time of a slot, in seconds after midnight.
    pub fn second_of_day(&self, slot: usize) -> u32 {
        self.slot_in_day(slot) as u32 * self.slot_seconds
    }

    /// Slot containing an absolute epoch second, if it lies on the grid.
    pub fn slot_at(&self, epoch_seconds: i64) -> Option<usize> {
        let offset = epoch_seconds.checked_sub(self.start)?;
        if offset < 0 {
            return None;
        }
        let slot = (offset / self.slot_seconds as i64) as usize;
        (slot < self.total_slots()).then_some(slot)
    }

    /// Slots of one day whose start time falls inside `window`, as a range
    /// of day-relative slot indices.
    pub fn window_slots(&self, window: DayWindow) -> Range<usize> {
        let s = self.slot_seconds;
        let first = window.start.div_ceil(s) as usize;
        let last = window.end.div_ceil(s) as usize;
        first.min(self.slots_per_day)..last.min(self.slots_per_day)
    }

    pub fn day_range(&self, day: usize) -> Range<usize> {
        day * self.slots_per_day..(day + 1) * self.slots_per_day
    }

    /// The grid with `factor` consecutive slots merged into one.
    pub fn coarsen(&self, factor: usize) -> Result<TimeGrid> {
        if factor == 0 || self.slots_per_day % factor != 0 {
            return Err(Error::InvalidFactor {
                factor,
                slots_per_day: self.slots_per_day,
            });
        }
        TimeGrid::new(self.start, self.slot_seconds * factor as u32, self.num_days)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub user_id: u64,
    /// One tower per slot; `TowerId::NO_RECORD` where nothing was observed.
    pub locations: Vec<TowerId>,
}

impl Trajectory {
    pub fn new(user_id: u64, locations: Vec<TowerId>) -> Self {
        Trajectory { user_id, locations }
    }

    pub fn is_complete(&self) -> bool {
        self.locations.iter().all(|l| l.is_record())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    pub grid: TimeGrid,
    pub tower_map: TowerMap,
    pub trajectories: Vec<Trajectory>,
}

impl TrajectorySet {
    /// Validates lengths, id uniqueness and tower membership.
    pub fn new(grid: TimeGrid, tower_map: TowerMap, trajectories: Vec<Trajectory>) -> Result<Self> {
        let t = grid.total_slots();
        let mut seen = std::collections::HashSet::with_capacity(trajectories.len());
        for traj in &trajectories {
            if !seen.insert(traj.user_id) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate user id {}",
                    traj.user_id
                )));
            }
            if traj.locations.len() != t {
                return Err(Error::LengthMismatch {
                    user_id: traj.user_id,
                    expected: t,
                    found: traj.locations.len(),
                });
            }
            if let Some(bad) = traj
                .locations
                .iter()
                .find(|l| l.is_record() && !tower_map.contains(**l))
            {
                return Err(Error::UnknownTower(*bad));
            }
        }
        Ok(TrajectorySet {
            grid,
            tower_map,
            trajectories,
        })
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.trajectories.iter().all(Trajectory::is_complete)
    }

    /// The same users, with every location replaced by its group at `level`
    /// and the map replaced by the group map.
    pub fn coarsen_spatial(&self, level: Level) -> TrajectorySet {
        let (map, mapping) = self.tower_map.coarsen(level);
        let trajectories = self
            .trajectories
            .iter()
            .map(|t| Trajectory {
                user_id: t.user_id,
                locations: t
                    .locations
                    .iter()
                    .map(|l| mapping.get(l).copied().unwrap_or(TowerId::NO_RECORD))
                    .collect(),
            })
            .collect();
        TrajectorySet {
            grid: self.grid,
            tower_map: map,
            trajectories,
        }
    }

    /// The first `n` users (the generator's per-user streams make this the
    /// population an `n`-user run with the same seed would produce).
    pub fn take_users(&self, n: usize) -> TrajectorySet {
        TrajectorySet {
            grid: self.grid,
            tower_map: self.tower_map.clone(),
            trajectories: self.trajectories.iter().take(n).cloned().collect(),
        }
    }
}

/// Raw observations grouped into slots: for each user, every tower recorded
/// in each slot (possibly none, possibly several).
#[derive(Debug, Clone, PartialEq)]
pub struct SlottedRecords {
    pub grid: TimeGrid,
    pub tower_map: TowerMap,
    pub users: Vec<(u64, Vec<Vec<TowerId>>)>,
}
