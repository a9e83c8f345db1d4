//! Publishing side: turning raw records into per-slot tower counts, and the
//! coarsening and perturbation transforms applied before release.

mod io;

pub use io::{load_aggregate, read_aggregate, store_aggregate, write_aggregate};

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::mobility::{
    Level, Point, SlottedRecords, TimeGrid, TowerId, TowerMap, Trajectory, TrajectorySet,
};

/// Per-slot user counts by tower: the only thing an attacker sees.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateSeries {
    pub grid: TimeGrid,
    pub tower_map: TowerMap,
    /// `counts[t][m]`; towers with no users are omitted.
    pub counts: Vec<BTreeMap<TowerId, u32>>,
}

impl AggregateSeries {
    /// Validates slot count, tower membership and that every slot sums to
    /// the same population.
    pub fn new(
        grid: TimeGrid,
        tower_map: TowerMap,
        mut counts: Vec<BTreeMap<TowerId, u32>>,
    ) -> Result<Self> {
        if counts.len() != grid.total_slots() {
            return Err(Error::SizeMismatch {
                expected: grid.total_slots(),
                found: counts.len(),
            });
        }
        for slot in &mut counts {
            slot.retain(|_, c| *c > 0);
            if let Some(bad) = slot.keys().find(|id| !tower_map.contains(**id)) {
                return Err(Error::UnknownTower(*bad));
            }
        }
        let n = slot_total(&counts[0]);
        if n == 0 {
            return Err(Error::ZeroTrajectories);
        }
        for slot in &counts {
            let total = slot_total(slot);
            if total != n {
                return Err(Error::SizeMismatch {
                    expected: n,
                    found: total,
                });
            }
        }
        Ok(AggregateSeries {
            grid,
            tower_map,
            counts,
        })
    }

    /// N, the (constant) number of users per slot.
    pub fn population(&self) -> usize {
        slot_total(&self.counts[0])
    }

    pub fn slot_total(&self, slot: usize) -> usize {
        slot_total(&self.counts[slot])
    }
}

fn slot_total(slot: &BTreeMap<TowerId, u32>) -> usize {
    slot.values().map(|&c| c as usize).sum()
}

/// The identifier-free records of one slot, in canonical (ascending tower
/// id) order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordMultiset {
    pub slot: usize,
    pub records: Vec<TowerId>,
}

impl RecordMultiset {
    pub fn counts(&self) -> BTreeMap<TowerId, u32> {
        let mut out = BTreeMap::new();
        for r in &self.records {
            *out.entry(*r).or_insert(0) += 1;
        }
        out
    }
}

/// Most frequent tower among the records, ties to the smaller id;
/// `NO_RECORD` when there are none.
pub fn modal_tower(records: &[TowerId]) -> TowerId {
    let mut counts: BTreeMap<TowerId, usize> = BTreeMap::new();
    for r in records.iter().filter(|r| r.is_record()) {
        *counts.entry(*r).or_insert(0) += 1;
    }
    let mut best = TowerId::NO_RECORD;
    let mut best_count = 0;
    for (id, c) in counts {
        if c > best_count {
            best = id;
            best_count = c;
        }
    }
    best
}

/// A single timestamped observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawRecord {
    pub user_id: u64,
    pub time: i64,
    pub tower: TowerId,
}

/// Groups timestamped records into the slots of `grid`. Records outside the
/// grid are dropped.
pub fn group_into_slots(records: &[RawRecord], grid: TimeGrid, tower_map: TowerMap) -> Result<SlottedRecords> {
    let mut users: BTreeMap<u64, Vec<Vec<TowerId>>> = BTreeMap::new();
    for r in records {
        if !tower_map.contains(r.tower) {
            return Err(Error::UnknownTower(r.tower));
        }
        let slots = users
            .entry(r.user_id)
            .or_insert_with(|| vec![Vec::new(); grid.total_slots()]);
        if let Some(slot) = grid.slot_at(r.time) {
            slots[slot].push(r.tower);
        }
    }
    Ok(SlottedRecords {
        grid,
        tower_map,
        users: users.into_iter().collect(),
    })
}

/// Keeps each user's modal tower per slot; empty slots become `NO_RECORD`.
pub fn discretize(raw: &SlottedRecords) -> TrajectorySet {
    let trajectories = raw
        .users
        .iter()
        .map(|(user, slots)| Trajectory::new(*user, slots.iter().map(|s| modal_tower(s)).collect()))
        .collect();
    TrajectorySet {
        grid: raw.grid,
        tower_map: raw.tower_map.clone(),
        trajectories,
    }
}

fn nearest_tower(positions: &[Point], ids: &[TowerId], p: Point) -> TowerId {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, q) in positions.iter().enumerate() {
        let d = p.distance(*q);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    ids[best]
}

/// Fills `NO_RECORD` slots. Interior gaps take the tower nearest the linear
/// interpolation between the bracketing records; leading and trailing gaps
/// copy the nearest record.
pub fn interpolate(traj: &Trajectory, tower_map: &TowerMap) -> Result<Trajectory> {
    let known: Vec<usize> = traj
        .locations
        .iter()
        .enumerate()
        .filter(|(_, l)| l.is_record())
        .map(|(i, _)| i)
        .collect();
    let (Some(&first), Some(&last)) = (known.first(), known.last()) else {
        return Err(Error::AllSentinel {
            user_id: traj.user_id,
        });
    };
    let mut out = traj.locations.clone();
    if known.len() == out.len() {
        return Ok(Trajectory::new(traj.user_id, out));
    }
    let positions = tower_map.positions();
    let ids: Vec<TowerId> = tower_map.towers().iter().map(|t| t.id).collect();
    let pos_of = |id: TowerId| tower_map.position(id).ok_or(Error::UnknownTower(id));

    for slot in out.iter_mut().take(first) {
        *slot = traj.locations[first];
    }
    for slot in out.iter_mut().skip(last + 1) {
        *slot = traj.locations[last];
    }
    for pair in known.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b - a < 2 {
            continue;
        }
        let (la, lb) = (traj.locations[a], traj.locations[b]);
        if la == lb {
            out[a + 1..b].fill(la);
            continue;
        }
        let (pa, pb) = (pos_of(la)?, pos_of(lb)?);
        for s in a + 1..b {
            let p = pa.lerp(pb, (s - a) as f64 / (b - a) as f64);
            out[s] = nearest_tower(&positions, &ids, p);
        }
    }
    Ok(Trajectory::new(traj.user_id, out))
}

pub fn interpolate_set(set: &TrajectorySet) -> Result<TrajectorySet> {
    let trajectories = set
        .trajectories
        .iter()
        .map(|t| interpolate(t, &set.tower_map))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectorySet {
        grid: set.grid,
        tower_map: set.tower_map.clone(),
        trajectories,
    })
}

/// Counts users per tower per slot.
pub fn aggregate(set: &TrajectorySet) -> Result<AggregateSeries> {
    if set.trajectories.is_empty() {
        return Err(Error::ZeroTrajectories);
    }
    let mut counts = vec![BTreeMap::new(); set.grid.total_slots()];
    for traj in &set.trajectories {
        for (slot, loc) in traj.locations.iter().enumerate() {
            if !loc.is_record() {
                return Err(Error::SentinelEncountered {
                    user_id: traj.user_id,
                    slot,
                });
            }
            *counts[slot].entry(*loc).or_insert(0u32) += 1;
        }
    }
    AggregateSeries::new(set.grid, set.tower_map.clone(), counts)
}

/// Expands the counts of slot `t` into records, ascending by tower id.
pub fn derive_records(agg: &AggregateSeries, t: usize) -> Result<RecordMultiset> {
    let slot = agg.counts.get(t).ok_or(Error::SlotOutOfRange {
        slot: t,
        total: agg.counts.len(),
    })?;
    let mut records = Vec::with_capacity(slot_total(slot));
    for (&tower, &c) in slot {
        records.extend(std::iter::repeat_n(tower, c as usize));
    }
    Ok(RecordMultiset { slot: t, records })
}

/// Sums counts by group at `level`; the result lives on the group map.
pub fn coarsen_spatial(agg: &AggregateSeries, level: Level) -> AggregateSeries {
    let (map, mapping) = agg.tower_map.coarsen(level);
    let counts = agg
        .counts
        .iter()
        .map(|slot| {
            let mut out = BTreeMap::new();
            for (tower, &c) in slot {
                *out.entry(mapping[tower]).or_insert(0) += c;
            }
            out
        })
        .collect();
    AggregateSeries {
        grid: agg.grid,
        tower_map: map,
        counts,
    }
}

/// Re-discretizes ground truth onto a grid with `factor`-times longer slots:
/// each coarse slot holds the modal tower of the fine slots it covers.
pub fn rediscretize(truth: &TrajectorySet, factor: usize) -> Result<TrajectorySet> {
    let grid = truth.grid.coarsen(factor)?;
    if factor == 1 {
        return Ok(truth.clone());
    }
    let trajectories = truth
        .trajectories
        .iter()
        .map(|t| Trajectory::new(t.user_id, t.locations.chunks(factor).map(modal_tower).collect()))
        .collect();
    Ok(TrajectorySet {
        grid,
        tower_map: truth.tower_map.clone(),
        trajectories,
    })
}

/// The series a publisher would release at `factor`-times coarser slots.
/// Derived from ground truth rather than by summing counts, so every slot
/// still sums to N.
pub fn coarsen_temporal(truth: &TrajectorySet, factor: usize) -> Result<AggregateSeries> {
    aggregate(&rediscretize(truth, factor)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbConfig {
    /// Probability that a record is moved to another tower.
    pub probability: f64,
    pub seed: u64,
}

const DOMAIN_PERTURB: u64 = 3;

/// Moves each record, independently with the configured probability, to a
/// tower drawn uniformly from the others. Each user's draws come from a
/// stream keyed by (seed, user id).
pub fn perturb(truth: &TrajectorySet, cfg: &PerturbConfig) -> Result<TrajectorySet> {
    if !(0.0..=1.0).contains(&cfg.probability) {
        return Err(Error::InvalidProbability(cfg.probability));
    }
    let ids: Vec<TowerId> = truth.tower_map.towers().iter().map(|t| t.id).collect();
    if cfg.probability == 0.0 || ids.len() < 2 {
        return Ok(truth.clone());
    }
    let trajectories = truth
        .trajectories
        .iter()
        .map(|t| {
            let mut rng = crate::mobility::stream_rng(cfg.seed, t.user_id, DOMAIN_PERTURB);
            let locations = t
                .locations
                .iter()
                .map(|&loc| {
                    let moved = rng.gen_bool(cfg.probability);
                    let pick = rng.gen_range(0..ids.len() - 1);
                    if !moved || !loc.is_record() {
                        return loc;
                    }
                    // Uniform over the towers other than `loc`.
                    let current = truth.tower_map.index_of(loc).unwrap_or(usize::MAX);
                    if pick >= current {
                        ids[pick + 1]
                    } else {
                        ids[pick]
                    }
                })
                .collect();
            Trajectory::new(t.user_id, locations)
        })
        .collect();
    Ok(TrajectorySet {
        grid: truth.grid,
        tower_map: truth.tower_map.clone(),
        trajectories,
    })
}
