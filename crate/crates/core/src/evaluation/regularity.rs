use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::mobility::{stream_rng, DayWindow, TowerId, TrajectorySet};
use crate::recovery::{info_gain, FrequencyHistogram};

const DOMAIN_REGULARITY: u64 = 32;

/// Population statistics behind the attack's assumptions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegularityReport {
    /// Per user, the fraction of records at the top 1..=5 towers
    /// (cumulative).
    pub top_fractions: Vec<[f64; 5]>,
    /// Per user and day, the number of distinct towers during the night
    /// window.
    pub night_locations: Vec<usize>,
    /// Per user, the fraction of all night slots spent at the most visited
    /// night tower.
    pub night_dwell: Vec<f64>,
    /// Distance (m) between the velocity extrapolation and the true next
    /// location, for every daytime step after the night window.
    pub velocity_errors: Vec<f64>,
    /// Gain between a user's day and the same user's next day.
    pub gain_same: Vec<f64>,
    /// Gain between a user's day and another, randomly chosen, user's next
    /// day.
    pub gain_different: Vec<f64>,
}

impl RegularityReport {
    pub fn mean_top(&self, k: usize) -> f64 {
        mean(self.top_fractions.iter().map(|f| f[k - 1]))
    }

    /// Share of users spending at least `fraction` of the night at one
    /// tower.
    pub fn share_night_anchored(&self, fraction: f64) -> f64 {
        let hits = self.night_dwell.iter().filter(|&&d| d >= fraction).count();
        hits as f64 / self.night_dwell.len().max(1) as f64
    }

    /// Share of user-nights spent at a single tower.
    pub fn share_single_night_location(&self) -> f64 {
        let hits = self.night_locations.iter().filter(|&&c| c == 1).count();
        hits as f64 / self.night_locations.len().max(1) as f64
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Median of the values (mean of the two middle ones for even counts).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

pub fn regularity_stats(set: &TrajectorySet, night_window: DayWindow, seed: u64) -> Result<RegularityReport> {
    if set.is_empty() {
        return Err(Error::ZeroTrajectories);
    }
    if let Some(t) = set.trajectories.iter().find(|t| !t.is_complete()) {
        return Err(Error::SentinelEncountered {
            user_id: t.user_id,
            slot: t.locations.iter().position(|l| !l.is_record()).unwrap_or(0),
        });
    }
    let grid = set.grid;
    let window = grid.window_slots(night_window);
    let pos = |id: TowerId| set.tower_map.position(id).ok_or(Error::UnknownTower(id));
    let mut report = RegularityReport::default();

    for traj in &set.trajectories {
        let mut counts: Vec<usize> = tally(&traj.locations).into_values().collect();
        counts.sort_unstable_by(|a, b| b.cmp(a));
        let total = traj.locations.len() as f64;
        let mut top = [0.0; 5];
        let mut acc = 0;
        for (k, slot) in top.iter_mut().enumerate() {
            acc += counts.get(k).copied().unwrap_or(0);
            *slot = acc as f64 / total;
        }
        report.top_fractions.push(top);

        let mut nights: Vec<TowerId> = Vec::new();
        for d in 0..grid.num_days() {
            let base = d * grid.slots_per_day();
            let night = &traj.locations[base + window.start..base + window.end];
            report.night_locations.push(tally(night).len());
            nights.extend_from_slice(night);
        }
        let dwell = tally(&nights).into_values().max().unwrap_or(0);
        report.night_dwell.push(dwell as f64 / nights.len().max(1) as f64);

        for d in 0..grid.num_days() {
            let base = d * grid.slots_per_day();
            for s in window.end.max(2)..grid.slots_per_day() {
                let t = base + s;
                let est = pos(traj.locations[t - 1])?.extrapolate_from(pos(traj.locations[t - 2])?);
                report.velocity_errors.push(est.distance(pos(traj.locations[t])?));
            }
        }
    }

    let n = set.len();
    let day_hist = |u: usize, d: usize| {
        FrequencyHistogram::from_locations(&set.trajectories[u].locations[grid.day_range(d)])
    };
    for u in 0..n {
        let mut rng = stream_rng(seed, u as u64, DOMAIN_REGULARITY);
        for d in 0..grid.num_days().saturating_sub(1) {
            let today = day_hist(u, d);
            report.gain_same.push(info_gain(&today, &day_hist(u, d + 1))?);
            if n > 1 {
                let other = (u + rng.gen_range(1..n)) % n;
                report.gain_different.push(info_gain(&today, &day_hist(other, d + 1))?);
            }
        }
    }
    Ok(report)
}

fn tally(locations: &[TowerId]) -> BTreeMap<TowerId, usize> {
    let mut out = BTreeMap::new();
    for l in locations {
        *out.entry(*l).or_insert(0) += 1;
    }
    out
}
