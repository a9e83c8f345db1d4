//! The attack: nighttime linking, daytime expansion, and cross-day chaining
//! of the per-slot records into trajectories.

mod entropy;

pub use entropy::{crossday_cost, entropy, info_gain, FrequencyHistogram};

use std::collections::BTreeMap;

use crate::aggregation::{AggregateSeries, RecordMultiset};
use crate::assignment::{prelink_indexed, solve_lsap, CostMatrix};
use crate::error::{Error, Result};
use crate::mobility::{DayWindow, Point, TimeGrid, TowerId, TowerMap, Trajectory};
use entropy::{gain_matrix, Distribution};

/// Which step of the attack produced a set of trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    Night,
    Day,
    Full,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::Night, Stage::Day, Stage::Full];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Night => "night",
            Stage::Day => "day",
            Stage::Full => "full",
        }
    }

    /// 1, 2 or 3.
    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_number(n: u8) -> Option<Stage> {
        Stage::ALL.get(usize::from(n).checked_sub(1)?).copied()
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "night" | "1" | "stage1" => Ok(Stage::Night),
            "day" | "2" | "stage2" => Ok(Stage::Day),
            "full" | "3" | "stage3" => Ok(Stage::Full),
            other => Err(Error::InvalidConfig(format!("unknown stage '{other}'"))),
        }
    }
}

/// Recovered trajectories, one row per recovered individual, indexed
/// `r0..r(N-1)`. Slots a stage does not cover hold `NO_RECORD`.
///
/// Before the cross-day stage, rows are only meaningful within a day: row i
/// on day d and row i on day d+1 are unrelated.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredTrajectorySet {
    pub grid: TimeGrid,
    pub tower_map: TowerMap,
    pub stage: Stage,
    pub night_window: DayWindow,
    pub trajectories: Vec<Trajectory>,
}

impl RecoveredTrajectorySet {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Whether the stage fills slot `t`.
    pub fn covers(&self, t: usize) -> bool {
        match self.stage {
            Stage::Night => self
                .grid
                .window_slots(self.night_window)
                .contains(&self.grid.slot_in_day(t)),
            Stage::Day | Stage::Full => t < self.grid.total_slots(),
        }
    }

    pub fn covered_slots(&self) -> Vec<usize> {
        (0..self.grid.total_slots()).filter(|&t| self.covers(t)).collect()
    }

    /// The slice of row `i` belonging to one day.
    pub fn sub_trajectory(&self, day: usize, i: usize) -> SubTrajectory {
        SubTrajectory {
            day,
            owner: i,
            locations: self.trajectories[i].locations[self.grid.day_range(day)].to_vec(),
        }
    }

    /// True when every covered slot holds exactly the published records of
    /// that slot, and every uncovered slot is empty.
    pub fn is_repartition_of(&self, agg: &AggregateSeries) -> bool {
        if agg.grid != self.grid || self.len() != agg.population() {
            return false;
        }
        (0..self.grid.total_slots()).all(|t| {
            if self.covers(t) {
                let mut seen: BTreeMap<TowerId, u32> = BTreeMap::new();
                for traj in &self.trajectories {
                    *seen.entry(traj.locations[t]).or_insert(0) += 1;
                }
                seen == agg.counts[t]
            } else {
                self.trajectories
                    .iter()
                    .all(|traj| !traj.locations[t].is_record())
            }
        })
    }
}

/// One recovered row restricted to one day.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubTrajectory {
    pub day: usize,
    pub owner: usize,
    pub locations: Vec<TowerId>,
}

impl SubTrajectory {
    pub fn histogram(&self) -> FrequencyHistogram {
        FrequencyHistogram::from_locations(&self.locations)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryConfig {
    pub night_window: DayWindow,
    /// Pre-link distance (meters) during the night stage.
    pub night_prelink: f64,
    /// Pre-link distance (meters) during the day stage.
    pub day_prelink: f64,
    /// Compare the next day against everything chained so far (`true`) or
    /// against the previous day alone.
    pub accumulate: bool,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        RecoveryConfig {
            night_window: DayWindow::NIGHT,
            night_prelink: 0.0,
            day_prelink: 0.0,
            accumulate: true,
        }
    }
}

impl RecoveryConfig {
    pub fn validate(&self) -> Result<()> {
        DayWindow::new(self.night_window.start, self.night_window.end)?;
        for (name, v) in [("night", self.night_prelink), ("day", self.day_prelink)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} pre-link threshold must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    fn window_in(&self, grid: &TimeGrid) -> Result<std::ops::Range<usize>> {
        let w = grid.window_slots(self.night_window);
        if w.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "night window holds no slot of {} s",
                grid.slot_seconds()
            )));
        }
        Ok(w)
    }
}

/// Costs for the night stage: distance from each row's last location to
/// each record of the next slot.
pub fn night_cost(last: &[TowerId], next: &RecordMultiset, tower_map: &TowerMap) -> Result<CostMatrix> {
    let estimates = positions_of(last, tower_map)?;
    distance_cost(&estimates, next, tower_map)
}

/// Costs for the day stage: distance from each row's velocity extrapolation
/// `q_t + (q_t - q_{t-1})` to each record of the next slot.
pub fn day_cost(
    before_last: &[TowerId],
    last: &[TowerId],
    next: &RecordMultiset,
    tower_map: &TowerMap,
) -> Result<CostMatrix> {
    if before_last.len() != last.len() {
        return Err(Error::SizeMismatch {
            expected: last.len(),
            found: before_last.len(),
        });
    }
    let prev = positions_of(before_last, tower_map)?;
    let estimates: Vec<Point> = positions_of(last, tower_map)?
        .into_iter()
        .zip(prev)
        .map(|(q, p)| q.extrapolate_from(p))
        .collect();
    distance_cost(&estimates, next, tower_map)
}

fn positions_of(ids: &[TowerId], tower_map: &TowerMap) -> Result<Vec<Point>> {
    ids.iter()
        .map(|id| tower_map.position(*id).ok_or(Error::UnknownTower(*id)))
        .collect()
}

fn distance_cost(estimates: &[Point], next: &RecordMultiset, tower_map: &TowerMap) -> Result<CostMatrix> {
    if estimates.len() != next.records.len() {
        return Err(Error::SizeMismatch {
            expected: next.records.len(),
            found: estimates.len(),
        });
    }
    let targets = positions_of(&next.records, tower_map)?;
    CostMatrix::from_fn(estimates.len(), |i, j| estimates[i].distance(targets[j]))
}

/// Published records per slot as dense tower indices, canonical order.
struct DenseSeries {
    slots: Vec<Vec<usize>>,
    positions: Vec<Point>,
}

impl DenseSeries {
    fn new(agg: &AggregateSeries) -> Result<Self> {
        let slots = agg
            .counts
            .iter()
            .map(|slot| {
                let mut out = Vec::new();
                for (&id, &c) in slot {
                    let k = agg.tower_map.index_of(id).ok_or(Error::UnknownTower(id))?;
                    out.extend(std::iter::repeat_n(k, c as usize));
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DenseSeries {
            slots,
            positions: agg.tower_map.positions(),
        })
    }
}

/// Assigns every row one of `records` (dense, sorted), minimizing total
/// distance from the row estimates after pre-linking.
fn link_slot(estimates: &[Point], records: &[usize], positions: &[Point], threshold: f64) -> Result<Vec<usize>> {
    let p = prelink_indexed(estimates, records, positions, threshold);
    let mut out = vec![usize::MAX; estimates.len()];
    for &(r, c) in &p.links {
        out[r] = records[c];
    }
    if !p.rows.is_empty() {
        let targets: Vec<Point> = p.cols.iter().map(|&c| positions[records[c]]).collect();
        let cost = CostMatrix::from_fn(p.rows.len(), |i, j| estimates[p.rows[i]].distance(targets[j]))?;
        let a = solve_lsap(&cost)?;
        for (i, &j) in a.perm.iter().enumerate() {
            out[p.rows[i]] = records[p.cols[j]];
        }
    }
    Ok(out)
}

/// One day's rows: `day[s][i]` is row i's dense tower at day slot s, or
/// `usize::MAX` where not yet recovered.
type DayRows = Vec<Vec<usize>>;

fn night_of_day(series: &DenseSeries, grid: &TimeGrid, day: usize, cfg: &RecoveryConfig) -> Result<DayRows> {
    let window = cfg.window_in(grid)?;
    let base = day * grid.slots_per_day();
    let n = series.slots[base].len();
    let mut rows: DayRows = vec![vec![usize::MAX; n]; grid.slots_per_day()];
    rows[window.start] = series.slots[base + window.start].clone();
    for s in window.start + 1..window.end {
        let estimates: Vec<Point> = rows[s - 1].iter().map(|&k| series.positions[k]).collect();
        rows[s] = link_slot(&estimates, &series.slots[base + s], &series.positions, cfg.night_prelink)?;
    }
    Ok(rows)
}

fn expand_day(series: &DenseSeries, grid: &TimeGrid, day: usize, rows: &mut DayRows, cfg: &RecoveryConfig) -> Result<()> {
    let window = cfg.window_in(grid)?;
    let base = day * grid.slots_per_day();
    let pos = &series.positions;
    let estimate = |rows: &DayRows, last: usize, before: Option<usize>| -> Vec<Point> {
        rows[last]
            .iter()
            .enumerate()
            .map(|(i, &k)| match before {
                Some(b) => pos[k].extrapolate_from(pos[rows[b][i]]),
                None => pos[k],
            })
            .collect()
    };
    for s in window.end..grid.slots_per_day() {
        let before = (s >= window.start + 2).then(|| s - 2);
        let est = estimate(rows, s - 1, before);
        rows[s] = link_slot(&est, &series.slots[base + s], pos, cfg.day_prelink)?;
    }
    let covered_end = grid.slots_per_day();
    for s in (0..window.start).rev() {
        let before = (s + 2 < covered_end).then_some(s + 2);
        let est = estimate(rows, s + 1, before);
        rows[s] = link_slot(&est, &series.slots[base + s], pos, cfg.day_prelink)?;
    }
    Ok(())
}

fn per_day<F>(num_days: usize, f: F) -> Result<Vec<DayRows>>
where
    F: Fn(usize) -> Result<DayRows> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..num_days).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..num_days).map(f).collect()
    }
}

fn to_set(
    agg: &AggregateSeries,
    cfg: &RecoveryConfig,
    stage: Stage,
    days: &[DayRows],
) -> RecoveredTrajectorySet {
    let n = agg.population();
    let towers = agg.tower_map.towers();
    let mut trajectories: Vec<Trajectory> = (0..n)
        .map(|i| Trajectory::new(i as u64, Vec::with_capacity(agg.grid.total_slots())))
        .collect();
    for rows in days {
        for (i, traj) in trajectories.iter_mut().enumerate() {
            traj.locations.extend(rows.iter().map(|slot| match slot[i] {
                usize::MAX => TowerId::NO_RECORD,
                k => towers[k].id,
            }));
        }
    }
    RecoveredTrajectorySet {
        grid: agg.grid,
        tower_map: agg.tower_map.clone(),
        stage,
        night_window: cfg.night_window,
        trajectories,
    }
}

fn from_set(set: &RecoveredTrajectorySet) -> Result<Vec<DayRows>> {
    let grid = set.grid;
    (0..grid.num_days())
        .map(|d| {
            grid.day_range(d)
                .map(|t| {
                    set.trajectories
                        .iter()
                        .map(|traj| {
                            let id = traj.locations[t];
                            if id.is_record() {
                                set.tower_map.index_of(id).ok_or(Error::UnknownTower(id))
                            } else {
                                Ok(usize::MAX)
                            }
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect()
        })
        .collect()
}

/// Night stage: each day's night window linked slot by slot, starting from
/// the first night slot's records in canonical order.
pub fn recover_night(agg: &AggregateSeries, cfg: &RecoveryConfig) -> Result<RecoveredTrajectorySet> {
    cfg.validate()?;
    let series = DenseSeries::new(agg)?;
    let days = per_day(agg.grid.num_days(), |d| night_of_day(&series, &agg.grid, d, cfg))?;
    Ok(to_set(agg, cfg, Stage::Night, &days))
}

/// Day stage: each day's night rows extended forward to midnight, then
/// backward from the window start to 00:00.
pub fn recover_day(
    agg: &AggregateSeries,
    night: &RecoveredTrajectorySet,
    cfg: &RecoveryConfig,
) -> Result<RecoveredTrajectorySet> {
    cfg.validate()?;
    if night.stage != Stage::Night || night.grid != agg.grid || night.len() != agg.population() {
        return Err(Error::InvalidConfig(
            "day stage needs the night stage of the same series".into(),
        ));
    }
    let series = DenseSeries::new(agg)?;
    let nights = from_set(night)?;
    let days = per_day(agg.grid.num_days(), |d| {
        let mut rows = nights[d].clone();
        expand_day(&series, &agg.grid, d, &mut rows, cfg)?;
        Ok(rows)
    })?;
    Ok(to_set(agg, cfg, Stage::Day, &days))
}

/// Cross-day stage: chains day d+1's rows onto the rows built so far by
/// minimizing total information gain.
pub fn link_days(day: &RecoveredTrajectorySet, cfg: &RecoveryConfig) -> Result<RecoveredTrajectorySet> {
    cfg.validate()?;
    if day.stage != Stage::Day {
        return Err(Error::InvalidConfig(
            "cross-day linking needs day-stage trajectories".into(),
        ));
    }
    let days = from_set(day)?;
    let n = day.len();
    let towers = day.tower_map.len();
    let histogram = |rows: &DayRows, i: usize, into: &mut BTreeMap<usize, u32>| {
        for slot in rows {
            *into.entry(slot[i]).or_insert(0) += 1;
        }
    };

    // order[i][d]: day-d row chained into recovered individual i.
    let mut order: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut left: Vec<BTreeMap<usize, u32>> = (0..n)
        .map(|i| {
            let mut h = BTreeMap::new();
            histogram(&days[0], i, &mut h);
            h
        })
        .collect();
    for d in 1..days.len() {
        let right: Vec<BTreeMap<usize, u32>> = (0..n)
            .map(|j| {
                let mut h = BTreeMap::new();
                histogram(&days[d], j, &mut h);
                h
            })
            .collect();
        let l: Vec<Distribution> = left.iter().map(Distribution::from_counts).collect();
        let r: Vec<Distribution> = right.iter().map(Distribution::from_counts).collect();
        let cost = CostMatrix::new(n, gain_matrix(&l, &r, towers))?;
        let a = solve_lsap(&cost)?;
        drop(cost);
        for (i, &j) in a.perm.iter().enumerate() {
            order[i].push(j);
            if cfg.accumulate {
                for (k, c) in &right[j] {
                    *left[i].entry(*k).or_insert(0) += c;
                }
            } else {
                left[i].clone_from(&right[j]);
            }
        }
    }
    Ok(RecoveredTrajectorySet {
        stage: Stage::Full,
        ..chained_set(day, &days, &order)
    })
}

fn chained_set(day: &RecoveredTrajectorySet, days: &[DayRows], order: &[Vec<usize>]) -> RecoveredTrajectorySet {
    let towers = day.tower_map.towers();
    let trajectories = order
        .iter()
        .enumerate()
        .map(|(i, chain)| {
            let mut locations = Vec::with_capacity(day.grid.total_slots());
            for (d, &src) in chain.iter().enumerate() {
                locations.extend(days[d].iter().map(|slot| towers[slot[src]].id));
            }
            Trajectory::new(i as u64, locations)
        })
        .collect();
    RecoveredTrajectorySet {
        grid: day.grid,
        tower_map: day.tower_map.clone(),
        stage: day.stage,
        night_window: day.night_window,
        trajectories,
    }
}

/// Snapshots after each stage of the attack.
#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    pub night: RecoveredTrajectorySet,
    pub day: RecoveredTrajectorySet,
    pub full: RecoveredTrajectorySet,
}

impl Recovery {
    pub fn stage(&self, stage: Stage) -> &RecoveredTrajectorySet {
        match stage {
            Stage::Night => &self.night,
            Stage::Day => &self.day,
            Stage::Full => &self.full,
        }
    }
}

/// Runs all three stages. Uses nothing but the published series.
pub fn recover(agg: &AggregateSeries, cfg: &RecoveryConfig) -> Result<Recovery> {
    let night = recover_night(agg, cfg)?;
    let day = recover_day(agg, &night, cfg)?;
    let full = link_days(&day, cfg)?;
    Ok(Recovery { night, day, full })
}
