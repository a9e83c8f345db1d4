//! Parametric home/work population generator.
//!
//! Every user owns a home and a distinct work tower. Each night is spent at
//! one tower, usually home. Working hours are anchored at work, the commute
//! follows the straight line between the two (snapped to the nearest tower
//! each slot), and the free slots around it are anchored at home or work.
//! From an anchor the user sometimes leaves for a nearby tower and stays
//! there for a geometric number of slots.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DayWindow, Point, TimeGrid, Tower, TowerId, TowerMap, Trajectory, TrajectorySet};
use crate::error::{Error, Result};

const NEIGHBORS: usize = 8;
const MORNING_START: u32 = 6 * 3600;
const EVENING_LATEST: u32 = 20 * 3600;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub num_users: usize,
    /// Sector count; sectors are grouped into base stations of
    /// `sectors_per_station`.
    pub num_towers: usize,
    /// Side of the square world, meters.
    pub world_size: f64,
    pub night_home_prob: f64,
    pub work_attachment: f64,
    pub exploration_prob: f64,
    /// Mean length, in slots, of a visit away from home or work.
    pub excursion_slots: f64,
    /// Meters travelled per slot while commuting.
    pub commute_speed: f64,
    /// Length scale of the exponential home-to-work distance preference.
    pub commute_scale: f64,
    pub sectors_per_station: usize,
    pub districts_per_side: usize,
    pub num_days: usize,
    pub slot_seconds: u32,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            num_users: 1000,
            num_towers: 600,
            world_size: 20_000.0,
            night_home_prob: 0.95,
            work_attachment: 0.9,
            exploration_prob: 0.05,
            excursion_slots: 2.0,
            commute_speed: 5_000.0,
            commute_scale: 1_500.0,
            sectors_per_station: 3,
            districts_per_side: 4,
            num_days: 7,
            slot_seconds: 1800,
            seed: 1,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_users == 0 {
            return Err(Error::InvalidConfig("num_users must be positive".into()));
        }
        if self.num_towers < 2 {
            return Err(Error::InvalidConfig(
                "num_towers must be at least 2 so home and work can differ".into(),
            ));
        }
        for p in [self.night_home_prob, self.work_attachment, self.exploration_prob] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidProbability(p));
            }
        }
        let positive = [self.world_size, self.commute_speed, self.commute_scale];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidConfig(
                "world_size, commute_speed and commute_scale must be positive".into(),
            ));
        }
        if !(self.excursion_slots.is_finite() && self.excursion_slots >= 1.0) {
            return Err(Error::InvalidConfig(
                "excursion_slots must be at least 1".into(),
            ));
        }
        if self.sectors_per_station == 0 || self.districts_per_side == 0 {
            return Err(Error::InvalidConfig(
                "sectors_per_station and districts_per_side must be positive".into(),
            ));
        }
        TimeGrid::new(0, self.slot_seconds, self.num_days)?;
        Ok(())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(0, self.slot_seconds, self.num_days)
    }
}

/// 32-byte ChaCha seed from (seed, stream, domain); distinct triples never
/// share a stream.
pub(crate) fn stream_rng(seed: u64, stream: u64, domain: u64) -> ChaCha8Rng {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&stream.to_le_bytes());
    bytes[16..24].copy_from_slice(&domain.to_le_bytes());
    ChaCha8Rng::from_seed(bytes)
}

const DOMAIN_WORLD: u64 = 1;
const DOMAIN_USER: u64 = 2;

struct World {
    map: TowerMap,
    positions: Vec<Point>,
    /// For each tower, nearby towers and distance-biased sampling weights.
    neighbors: Vec<(Vec<usize>, WeightedIndex<f64>)>,
}

impl World {
    fn nearest(&self, p: Point) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, q) in self.positions.iter().enumerate() {
            let d = p.distance(*q);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    fn nearby(&self, tower: usize, rng: &mut ChaCha8Rng) -> usize {
        let (ids, weights) = &self.neighbors[tower];
        ids[weights.sample(rng)]
    }
}

fn build_world(cfg: &GeneratorConfig) -> World {
    let mut rng = stream_rng(cfg.seed, 0, DOMAIN_WORLD);
    let stations = cfg.num_towers.div_ceil(cfg.sectors_per_station);
    let side = (stations as f64).sqrt().ceil() as usize;
    let spacing = cfg.world_size / side as f64;

    let mut cells: Vec<usize> = (0..side * side).collect();
    cells.shuffle(&mut rng);
    cells.truncate(stations);
    cells.sort_unstable();

    let sector_radius = if cfg.sectors_per_station > 1 {
        0.15 * spacing
    } else {
        0.0
    };
    let district_size = cfg.world_size / cfg.districts_per_side as f64;
    let last_district = cfg.districts_per_side - 1;

    let mut towers = Vec::with_capacity(cfg.num_towers);
    for (station, cell) in cells.iter().enumerate() {
        let (row, col) = (cell / side, cell % side);
        let site = Point::new(
            (col as f64 + 0.5 + rng.gen_range(-0.3..0.3)) * spacing,
            (row as f64 + 0.5 + rng.gen_range(-0.3..0.3)) * spacing,
        );
        let dx = ((site.x / district_size) as usize).min(last_district);
        let dy = ((site.y / district_size) as usize).min(last_district);
        let district = (dy * cfg.districts_per_side + dx) as i64;
        let rotation = rng.gen_range(0.0..std::f64::consts::TAU);
        for k in 0..cfg.sectors_per_station {
            if towers.len() == cfg.num_towers {
                break;
            }
            let angle = rotation + std::f64::consts::TAU * k as f64 / cfg.sectors_per_station as f64;
            towers.push(Tower {
                id: TowerId(towers.len() as i64),
                x: site.x + sector_radius * angle.cos(),
                y: site.y + sector_radius * angle.sin(),
                base_station_id: station as i64,
                district_id: district,
            });
        }
    }

    let map = TowerMap::new(towers).expect("generated towers are valid");
    let positions = map.positions();
    let k = NEIGHBORS.min(positions.len() - 1);
    let neighbors = (0..positions.len())
        .map(|i| {
            let mut others: Vec<(f64, usize)> = positions
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, p)| (positions[i].distance(*p), j))
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            others.truncate(k);
            let ids = others.iter().map(|&(_, j)| j).collect();
            let weights = WeightedIndex::new(others.iter().map(|&(d, _)| (-d / spacing).exp()))
                .expect("neighbor weights are positive");
            (ids, weights)
        })
        .collect();
    World {
        map,
        positions,
        neighbors,
    }
}

/// Generates `config.num_users` users over `config.num_days` days.
///
/// User `i` draws from its own stream derived from `(seed, i)`, so the first
/// `n` users are identical for every population size.
pub fn generate_population(config: &GeneratorConfig) -> Result<TrajectorySet> {
    config.validate()?;
    let grid = config.grid()?;
    let world = build_world(config);

    let user = |u: u64| generate_user(config, &grid, &world, u);
    #[cfg(feature = "parallel")]
    let trajectories: Vec<Trajectory> = {
        use rayon::prelude::*;
        (0..config.num_users as u64).into_par_iter().map(user).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let trajectories: Vec<Trajectory> = (0..config.num_users as u64).map(user).collect();

    TrajectorySet::new(grid, world.map, trajectories)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    Night,
    Free { anchor: usize },
    Commute(usize),
    Working,
}

fn generate_user(cfg: &GeneratorConfig, grid: &TimeGrid, world: &World, user: u64) -> Trajectory {
    let mut rng = stream_rng(cfg.seed, user, DOMAIN_USER);
    let m = world.positions.len();
    let home = rng.gen_range(0..m);
    let work = {
        let hp = world.positions[home];
        let weights: Vec<f64> = world
            .positions
            .iter()
            .enumerate()
            .map(|(j, p)| {
                if j == home {
                    0.0
                } else {
                    (-hp.distance(*p) / cfg.commute_scale).exp().max(f64::MIN_POSITIVE)
                }
            })
            .collect();
        WeightedIndex::new(&weights).expect("at least one other tower").sample(&mut rng)
    };

    let (hp, wp) = (world.positions[home], world.positions[work]);
    let travel = ((hp.distance(wp) / cfg.commute_speed).ceil() as usize).max(1);
    // Towers occupied on the way, the last one being the destination.
    let route_out: Vec<usize> = (1..=travel)
        .map(|k| {
            if k == travel {
                work
            } else {
                world.nearest(hp.lerp(wp, k as f64 / travel as f64))
            }
        })
        .collect();
    let route_back: Vec<usize> = (1..=travel)
        .map(|k| {
            if k == travel {
                home
            } else {
                world.nearest(wp.lerp(hp, k as f64 / travel as f64))
            }
        })
        .collect();

    let spd = grid.slots_per_day();
    let second = |s: usize| s as u32 * grid.slot_seconds();
    let work_slots = grid.window_slots(DayWindow::WORK);
    let morning: Vec<usize> = (0..spd)
        .filter(|&s| second(s) >= MORNING_START && s + travel <= work_slots.start)
        .collect();
    let evening: Vec<usize> = (work_slots.end..spd)
        .filter(|&s| second(s) < EVENING_LATEST)
        .collect();
    let first_morning = (0..spd)
        .find(|&s| second(s) >= MORNING_START)
        .unwrap_or(0);

    // Leaving the anchor for an excursion: chance per slot, and the chance
    // of extending an excursion by one more slot.
    let keep_going = 1.0 - 1.0 / cfg.excursion_slots;
    let work_leave = if cfg.work_attachment > 0.0 {
        ((1.0 - cfg.work_attachment) / (cfg.work_attachment * cfg.excursion_slots)).min(1.0)
    } else {
        1.0
    };

    let mut locations = Vec::with_capacity(grid.total_slots());
    for _day in 0..grid.num_days() {
        let depart = *morning.choose(&mut rng).unwrap_or(&first_morning);
        let back = evening.choose(&mut rng).copied().unwrap_or(work_slots.end.min(spd));
        let night_spot = if rng.gen_bool(cfg.night_home_prob) {
            home
        } else {
            world.nearby(home, &mut rng)
        };
        let mut excursion: Option<usize> = None;
        let mut last_phase = None;
        for s in 0..spd {
            let phase = if DayWindow::NIGHT.contains(second(s)) {
                Phase::Night
            } else if s < depart {
                Phase::Free { anchor: home }
            } else if s < depart + travel {
                Phase::Commute(route_out[s - depart])
            } else if s >= back && s < back + travel {
                Phase::Commute(route_back[s - back])
            } else if s >= back + travel {
                Phase::Free { anchor: home }
            } else if work_slots.contains(&s) {
                Phase::Working
            } else {
                Phase::Free { anchor: work }
            };
            if last_phase != Some(phase) {
                excursion = None;
                last_phase = Some(phase);
            }
            let (anchor, leave) = match phase {
                Phase::Night => (night_spot, 0.0),
                Phase::Commute(t) => (t, 0.0),
                Phase::Working => (work, work_leave),
                Phase::Free { anchor } => (anchor, cfg.exploration_prob),
            };
            excursion = match excursion {
                Some(spot) if rng.gen_bool(keep_going) => Some(spot),
                Some(_) => None,
                None if leave > 0.0 && rng.gen_bool(leave) => Some(world.nearby(anchor, &mut rng)),
                None => None,
            };
            let current = excursion.unwrap_or(anchor);
            locations.push(world.map.towers()[current].id);
        }
    }
    Trajectory::new(user, locations)
}
