use std::collections::{BTreeMap, HashMap};

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::mobility::{stream_rng, TowerId, Trajectory};

/// How the identifying points of a user are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// The K most visited towers.
    TopK,
    /// K slots drawn at random.
    RandK,
    /// K consecutive slots from a random start.
    ContK,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::TopK, Strategy::RandK, Strategy::ContK];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::TopK => "top",
            Strategy::RandK => "rand",
            Strategy::ContK => "cont",
        }
    }
}

const REPEATS: u64 = 10;
const DOMAIN_UNIQUENESS: u64 = 16;

/// Fraction of users singled out by K of their points.
///
/// Top-K compares each user's K most visited towers in rank order (ties to
/// the smaller id, padded when a user has fewer). Rand-K and Cont-K sample
/// (slot, tower) points per user and count the user as unique when no other
/// trajectory passes through all of them; these are averaged over 10
/// draws keyed by `seed`.
pub fn uniqueness(trajectories: &[Trajectory], k: usize, strategy: Strategy, seed: u64) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidConfig("K must be at least 1".into()));
    }
    if trajectories.is_empty() {
        return Err(Error::ZeroTrajectories);
    }
    let n = trajectories.len() as f64;
    match strategy {
        Strategy::TopK => {
            let mut seen: HashMap<Vec<TowerId>, usize> = HashMap::new();
            let keys: Vec<Vec<TowerId>> = trajectories.iter().map(|t| top_k(&t.locations, k)).collect();
            for key in &keys {
                *seen.entry(key.clone()).or_insert(0) += 1;
            }
            Ok(keys.iter().filter(|key| seen[*key] == 1).count() as f64 / n)
        }
        Strategy::RandK | Strategy::ContK => {
            let len = trajectories[0].locations.len();
            let k = k.min(len);
            let mut index: Vec<HashMap<TowerId, Vec<usize>>> = vec![HashMap::new(); len];
            for (u, t) in trajectories.iter().enumerate() {
                for (slot, id) in t.locations.iter().enumerate() {
                    index[slot].entry(*id).or_default().push(u);
                }
            }
            let mut total = 0usize;
            for rep in 0..REPEATS {
                for (u, t) in trajectories.iter().enumerate() {
                    let mut rng = stream_rng(seed, u as u64, DOMAIN_UNIQUENESS + rep);
                    let slots: Vec<usize> = match strategy {
                        Strategy::RandK => sample(&mut rng, len, k).into_vec(),
                        _ => {
                            let start = rng.gen_range(0..=len - k);
                            (start..start + k).collect()
                        }
                    };
                    if consistent_users(&index, &t.locations, &slots) == 1 {
                        total += 1;
                    }
                }
            }
            Ok(total as f64 / (n * REPEATS as f64))
        }
    }
}

/// Number of users whose trajectory passes through every sampled point of
/// `locations` (the owner included).
fn consistent_users(index: &[HashMap<TowerId, Vec<usize>>], locations: &[TowerId], slots: &[usize]) -> usize {
    let mut lists: Vec<&Vec<usize>> = slots.iter().map(|&s| &index[s][&locations[s]]).collect();
    lists.sort_by_key(|l| l.len());
    let mut candidates: Vec<usize> = lists[0].clone();
    for l in &lists[1..] {
        if candidates.len() <= 1 {
            break;
        }
        // Both lists ascend by user index.
        let mut out = Vec::with_capacity(candidates.len());
        let (mut a, mut b) = (0, 0);
        while a < candidates.len() && b < l.len() {
            match candidates[a].cmp(&l[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    out.push(candidates[a]);
                    a += 1;
                    b += 1;
                }
            }
        }
        candidates = out;
    }
    candidates.len()
}

/// The K most visited towers, most visited first, ties to the smaller id,
/// padded with `NO_RECORD`. Keeping the rank order makes the K-key a prefix
/// of the (K+1)-key, so a user unique at K stays unique at K+1.
pub(crate) fn top_k(locations: &[TowerId], k: usize) -> Vec<TowerId> {
    let mut counts: BTreeMap<TowerId, usize> = BTreeMap::new();
    for l in locations.iter().filter(|l| l.is_record()) {
        *counts.entry(*l).or_insert(0) += 1;
    }
    let mut ranked: Vec<(TowerId, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut key: Vec<TowerId> = ranked.iter().take(k).map(|r| r.0).collect();
    key.resize(k, TowerId::NO_RECORD);
    key
}
