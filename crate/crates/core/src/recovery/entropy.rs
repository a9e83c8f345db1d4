use std::collections::BTreeMap;

use crate::assignment::CostMatrix;
use crate::error::{Error, Result};
use crate::mobility::TowerId;

/// Visit counts per tower within one (sub-)trajectory.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FrequencyHistogram {
    counts: BTreeMap<TowerId, u32>,
}

impl FrequencyHistogram {
    /// Counts every recorded location; sentinels are skipped.
    pub fn from_locations(locations: &[TowerId]) -> Self {
        let mut counts = BTreeMap::new();
        for l in locations.iter().filter(|l| l.is_record()) {
            *counts.entry(*l).or_insert(0) += 1;
        }
        FrequencyHistogram { counts }
    }

    pub fn from_counts(pairs: impl IntoIterator<Item = (TowerId, u32)>) -> Self {
        let mut counts = BTreeMap::new();
        for (id, c) in pairs {
            if c > 0 {
                *counts.entry(id).or_insert(0) += c;
            }
        }
        FrequencyHistogram { counts }
    }

    pub fn counts(&self) -> &BTreeMap<TowerId, u32> {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.values().map(|&c| u64::from(c)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Counts added tower by tower.
    pub fn merged(&self, other: &FrequencyHistogram) -> FrequencyHistogram {
        let mut counts = self.counts.clone();
        for (id, c) in &other.counts {
            *counts.entry(*id).or_insert(0) += c;
        }
        FrequencyHistogram { counts }
    }
}

/// Shannon entropy of the visit distribution, in nats.
pub fn entropy(h: &FrequencyHistogram) -> Result<f64> {
    if h.is_empty() {
        return Err(Error::EmptyHistogram);
    }
    let total = h.total() as f64;
    Ok(h.counts
        .values()
        .map(|&c| {
            let p = f64::from(c) / total;
            -p * p.ln()
        })
        .sum())
}

/// Entropy of the merged histogram minus the mean of the two entropies.
/// Exactly zero when both histograms are proportional.
pub fn info_gain(a: &FrequencyHistogram, b: &FrequencyHistogram) -> Result<f64> {
    let ha = entropy(a)?;
    let hb = entropy(b)?;
    if proportional(a, b) {
        return Ok(0.0);
    }
    Ok(entropy(&a.merged(b))? - (ha + hb) / 2.0)
}

fn proportional(a: &FrequencyHistogram, b: &FrequencyHistogram) -> bool {
    let (ta, tb) = (a.total(), b.total());
    a.counts.len() == b.counts.len()
        && a.counts
            .iter()
            .zip(&b.counts)
            .all(|((ia, &ca), (ib, &cb))| ia == ib && u64::from(ca) * tb == u64::from(cb) * ta)
}

/// A normalized histogram over dense tower indices, sorted by tower.
#[derive(Debug, Clone, Default)]
pub(crate) struct Distribution {
    pub(crate) entries: Vec<(usize, f64)>,
}

impl Distribution {
    pub(crate) fn from_counts(counts: &BTreeMap<usize, u32>) -> Self {
        let total: f64 = counts.values().map(|&c| f64::from(c)).sum();
        Distribution {
            entries: counts
                .iter()
                .map(|(&k, &c)| (k, f64::from(c) / total))
                .collect(),
        }
    }
}

/// Gain between every left and right distribution, with both sides weighted
/// equally in the merge. For histograms of equal total this is the same
/// quantity as [`info_gain`]; for unequal totals it stays non-negative.
///
/// Towers present on only one side contribute a fixed `ln 2` in total, so
/// only shared towers need visiting; an inverted index over the right side
/// finds them.
pub(crate) fn gain_matrix(left: &[Distribution], right: &[Distribution], towers: usize) -> Vec<f64> {
    let n = right.len();
    let mut by_tower: Vec<Vec<(usize, f64, f64)>> = vec![Vec::new(); towers];
    for (j, d) in right.iter().enumerate() {
        for &(k, p) in &d.entries {
            by_tower[k].push((j, p, p * p.ln()));
        }
    }
    let ln2 = std::f64::consts::LN_2;
    let mut out = vec![ln2; left.len() * n];
    for (i, d) in left.iter().enumerate() {
        let row = &mut out[i * n..(i + 1) * n];
        for &(k, pa) in &d.entries {
            let a_term = pa * pa.ln();
            for &(j, pb, b_term) in &by_tower[k] {
                let s = pa + pb;
                row[j] += (a_term + b_term) / 2.0 - s / 2.0 * s.ln();
            }
        }
        for v in row.iter_mut() {
            // Identical distributions cancel to rounding noise.
            if *v < 1e-12 {
                *v = 0.0;
            }
        }
    }
    out
}

/// Pairwise gains between two equally sized collections of sub-trajectory
/// histograms (equal-weight merge).
pub fn crossday_cost(left: &[FrequencyHistogram], right: &[FrequencyHistogram]) -> Result<CostMatrix> {
    if left.len() != right.len() {
        return Err(Error::SizeMismatch {
            expected: left.len(),
            found: right.len(),
        });
    }
    if left.iter().chain(right).any(FrequencyHistogram::is_empty) {
        return Err(Error::EmptyHistogram);
    }
    let mut index: BTreeMap<TowerId, usize> = BTreeMap::new();
    for h in left.iter().chain(right) {
        for id in h.counts.keys() {
            let next = index.len();
            index.entry(*id).or_insert(next);
        }
    }
    let dense = |h: &FrequencyHistogram| {
        let counts: BTreeMap<usize, u32> = h.counts.iter().map(|(id, &c)| (index[id], c)).collect();
        Distribution::from_counts(&counts)
    };
    let l: Vec<Distribution> = left.iter().map(dense).collect();
    let r: Vec<Distribution> = right.iter().map(dense).collect();
    CostMatrix::new(left.len(), gain_matrix(&l, &r, index.len()))
}
