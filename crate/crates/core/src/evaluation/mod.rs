//! How much of the ground truth an attack got back, and the population
//! statistics that make the attack feasible in the first place.

mod regularity;
mod report;
mod uniqueness;

pub use regularity::{median, regularity_stats, RegularityReport};
pub use report::{ErrorCdf, MetricRow, MetricsReport, CDF_GRID};
pub use uniqueness::{uniqueness, Strategy};

use crate::error::{Error, Result};
use crate::mobility::{Point, TowerId, TowerMap, Trajectory, TrajectorySet};
use crate::recovery::{RecoveredTrajectorySet, Stage};

/// `truth_of[i]` is the ground-truth index paired with recovered row i.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pairing {
    pub truth_of: Vec<usize>,
}

impl Pairing {
    pub fn identity(n: usize) -> Self {
        Pairing {
            truth_of: (0..n).collect(),
        }
    }

    pub fn is_bijection(&self) -> bool {
        let mut seen = vec![false; self.truth_of.len()];
        self.truth_of
            .iter()
            .all(|&j| j < seen.len() && !std::mem::replace(&mut seen[j], true))
    }
}

/// Greedy pairing over the given slots: recovered rows in ascending order
/// each take the unpaired truth row sharing the most (slot, tower) points,
/// ties to the smaller truth index.
pub fn pair_rows(recovered: &[&[TowerId]], truth: &[&[TowerId]], slots: &[usize]) -> Result<Pairing> {
    if recovered.len() != truth.len() {
        return Err(Error::SizeMismatch {
            expected: truth.len(),
            found: recovered.len(),
        });
    }
    let n = truth.len();
    // Truth users by (slot, tower).
    let mut index: Vec<std::collections::HashMap<TowerId, Vec<usize>>> =
        vec![Default::default(); slots.len()];
    for (u, row) in truth.iter().enumerate() {
        for (k, &t) in slots.iter().enumerate() {
            index[k].entry(row[t]).or_default().push(u);
        }
    }
    let mut paired = vec![false; n];
    let mut score = vec![0u32; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut first_free = 0;
    let mut truth_of = Vec::with_capacity(n);
    for row in recovered {
        for (k, &t) in slots.iter().enumerate() {
            if let Some(users) = index[k].get(&row[t]) {
                for &u in users {
                    if !paired[u] {
                        if score[u] == 0 {
                            touched.push(u);
                        }
                        score[u] += 1;
                    }
                }
            }
        }
        while first_free < n && paired[first_free] {
            first_free += 1;
        }
        let mut best = first_free;
        let mut best_score = 0;
        for &u in &touched {
            if score[u] > best_score || (score[u] == best_score && u < best) {
                best = u;
                best_score = score[u];
            }
        }
        for &u in &touched {
            score[u] = 0;
        }
        touched.clear();
        paired[best] = true;
        truth_of.push(best);
    }
    Ok(Pairing { truth_of })
}

fn check_shapes(recovered: &RecoveredTrajectorySet, truth: &TrajectorySet) -> Result<()> {
    if recovered.len() != truth.len() {
        return Err(Error::SizeMismatch {
            expected: truth.len(),
            found: recovered.len(),
        });
    }
    if recovered.grid != truth.grid {
        return Err(Error::InvalidConfig(
            "recovered and ground-truth trajectories use different time grids".into(),
        ));
    }
    Ok(())
}

fn rows(trajectories: &[Trajectory]) -> Vec<&[TowerId]> {
    trajectories.iter().map(|t| t.locations.as_slice()).collect()
}

/// Greedy pairing over every slot the recovered set covers.
pub fn pair_greedy(recovered: &RecoveredTrajectorySet, truth: &TrajectorySet) -> Result<Pairing> {
    check_shapes(recovered, truth)?;
    pair_rows(
        &rows(&recovered.trajectories),
        &rows(&truth.trajectories),
        &recovered.covered_slots(),
    )
}

/// Mean over rows of the fraction of `slots` where the recovered tower
/// equals the paired truth tower.
pub fn accuracy_over(recovered: &[&[TowerId]], truth: &[&[TowerId]], pairing: &Pairing, slots: &[usize]) -> f64 {
    if recovered.is_empty() || slots.is_empty() {
        return 0.0;
    }
    let per_row: f64 = recovered
        .iter()
        .zip(&pairing.truth_of)
        .map(|(r, &u)| {
            let hits = slots.iter().filter(|&&t| r[t] == truth[u][t]).count();
            hits as f64 / slots.len() as f64
        })
        .sum();
    per_row / recovered.len() as f64
}

/// Accuracy over the slots the recovered set covers.
pub fn accuracy(recovered: &RecoveredTrajectorySet, truth: &TrajectorySet, pairing: &Pairing) -> Result<f64> {
    check_shapes(recovered, truth)?;
    Ok(accuracy_over(
        &rows(&recovered.trajectories),
        &rows(&truth.trajectories),
        pairing,
        &recovered.covered_slots(),
    ))
}

/// Distance in meters between recovered and paired truth location, one
/// value per row and covered slot.
pub fn recovery_error(
    recovered: &RecoveredTrajectorySet,
    truth: &TrajectorySet,
    pairing: &Pairing,
) -> Result<Vec<f64>> {
    check_shapes(recovered, truth)?;
    let slots = recovered.covered_slots();
    errors_over(
        &rows(&recovered.trajectories),
        &rows(&truth.trajectories),
        pairing,
        &slots,
        &recovered.tower_map,
    )
}

fn errors_over(
    recovered: &[&[TowerId]],
    truth: &[&[TowerId]],
    pairing: &Pairing,
    slots: &[usize],
    map: &TowerMap,
) -> Result<Vec<f64>> {
    let pos = |id: TowerId| -> Result<Point> { map.position(id).ok_or(Error::UnknownTower(id)) };
    let mut out = Vec::with_capacity(recovered.len() * slots.len());
    for (r, &u) in recovered.iter().zip(&pairing.truth_of) {
        for &t in slots {
            out.push(pos(r[t])?.distance(pos(truth[u][t])?));
        }
    }
    Ok(out)
}

/// Accuracy and error distribution of one stage snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct StageEvaluation {
    pub stage: Stage,
    pub accuracy: f64,
    pub errors: Vec<f64>,
}

impl StageEvaluation {
    pub fn error_cdf(&self) -> ErrorCdf {
        ErrorCdf::from_values(&self.errors)
    }
}

/// Scores a stage snapshot against ground truth.
///
/// Night and day snapshots are not yet linked across days, so each day is
/// paired on its own and the per-day accuracies are averaged. The full
/// snapshot is paired once over all slots.
pub fn evaluate_stage(recovered: &RecoveredTrajectorySet, truth: &TrajectorySet) -> Result<StageEvaluation> {
    check_shapes(recovered, truth)?;
    let rec = rows(&recovered.trajectories);
    let tru = rows(&truth.trajectories);
    let covered = recovered.covered_slots();
    let groups: Vec<Vec<usize>> = match recovered.stage {
        Stage::Full => vec![covered],
        Stage::Night | Stage::Day => {
            let grid = recovered.grid;
            (0..grid.num_days())
                .map(|d| covered.iter().copied().filter(|&t| grid.day_of(t) == d).collect())
                .collect()
        }
    };
    let mut acc = 0.0;
    let mut errors = Vec::new();
    for slots in &groups {
        let pairing = pair_rows(&rec, &tru, slots)?;
        acc += accuracy_over(&rec, &tru, &pairing, slots);
        errors.extend(errors_over(&rec, &tru, &pairing, slots, &recovered.tower_map)?);
    }
    Ok(StageEvaluation {
        stage: recovered.stage,
        accuracy: acc / groups.len() as f64,
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobility::fixtures::{line_map, set_from};
    use crate::mobility::{DayWindow, TimeGrid};

    fn grid(days: usize) -> TimeGrid {
        TimeGrid::new(0, 6 * 3600, days).unwrap()
    }

    fn as_recovered(set: &TrajectorySet, stage: Stage) -> RecoveredTrajectorySet {
        RecoveredTrajectorySet {
            grid: set.grid,
            tower_map: set.tower_map.clone(),
            stage,
            night_window: DayWindow::NIGHT,
            trajectories: set.trajectories.clone(),
        }
    }

    #[test]
    fn identical_sets_pair_identically() {
        let truth = set_from(line_map(&[0.0, 1.0, 2.0]), grid(1), &[&[0, 1, 2, 2], &[0, 1, 2, 2], &[2, 2, 1, 0]]);
        let rec = as_recovered(&truth, Stage::Full);
        let p = pair_greedy(&rec, &truth).unwrap();
        assert_eq!(p, Pairing::identity(3));
        assert_eq!(accuracy(&rec, &truth, &p).unwrap(), 1.0);
        assert!(recovery_error(&rec, &truth, &p).unwrap().iter().all(|&e| e == 0.0));
    }

    #[test]
    fn greedy_order_decides_contested_rows() {
        // Truth: u0 = [0,0,0,0], u1 = [1,1,1,1].
        // Recovered r0 matches u0 in 2 slots and u1 in 2 slots; r1 matches
        // u1 in 3 slots. r0 goes first and takes u0 (tie, smaller index).
        let map = line_map(&[0.0, 100.0]);
        let truth = set_from(map.clone(), grid(1), &[&[0, 0, 0, 0], &[1, 1, 1, 1]]);
        let rec = as_recovered(&set_from(map.clone(), grid(1), &[&[0, 0, 1, 1], &[1, 1, 1, 0]]), Stage::Full);
        let p = pair_greedy(&rec, &truth).unwrap();
        assert_eq!(p.truth_of, vec![0, 1]);
        assert_eq!(accuracy(&rec, &truth, &p).unwrap(), (0.5 + 0.75) / 2.0);
        // Swapped order: r0 = [1,1,1,0] now takes u1, leaving u0 to r1.
        let rec = as_recovered(&set_from(map, grid(1), &[&[1, 1, 1, 0], &[0, 0, 1, 1]]), Stage::Full);
        assert_eq!(pair_greedy(&rec, &truth).unwrap().truth_of, vec![1, 0]);
    }

    #[test]
    fn greedy_falls_back_to_smallest_unpaired() {
        let map = line_map(&[0.0, 100.0, 200.0]);
        let truth = set_from(map.clone(), grid(1), &[&[0, 0, 0, 0], &[1, 1, 1, 1], &[2, 2, 2, 2]]);
        let rec = as_recovered(
            &set_from(map, grid(1), &[&[2, 2, 2, 2], &[2, 2, 2, 2], &[0, 0, 0, 0]]),
            Stage::Full,
        );
        let p = pair_greedy(&rec, &truth).unwrap();
        assert_eq!(p.truth_of, vec![2, 0, 1]);
        assert!(p.is_bijection());
    }

    #[test]
    fn accuracy_examples() {
        let map = line_map(&[0.0, 500.0]);
        let truth = set_from(map.clone(), grid(1), &[&[1, 1, 1, 1]]);
        let rec = as_recovered(&set_from(map.clone(), grid(1), &[&[0, 0, 0, 0]]), Stage::Full);
        let p = Pairing::identity(1);
        assert_eq!(accuracy(&rec, &truth, &p).unwrap(), 0.0);
        let rec = as_recovered(&set_from(map, grid(1), &[&[1, 0, 1, 1]]), Stage::Full);
        assert_eq!(accuracy(&rec, &truth, &p).unwrap(), 0.75);
        let e = recovery_error(&rec, &truth, &p).unwrap();
        assert_eq!(e, vec![0.0, 500.0, 0.0, 0.0]);
        let cdf = ErrorCdf::from_values(&e);
        assert_eq!(cdf.fraction_within(499.0), 0.75);
        assert_eq!(cdf.fraction_within(500.0), 1.0);
    }

    #[test]
    fn stage_evaluation_pairs_each_day() {
        // Rows swap between days before chaining; per-day pairing still
        // scores the day stage perfectly.
        let map = line_map(&[0.0, 100.0]);
        let truth = set_from(map.clone(), grid(2), &[&[0, 0, 0, 0, 0, 0, 0, 0], &[1, 1, 1, 1, 1, 1, 1, 1]]);
        let day = as_recovered(
            &set_from(map, grid(2), &[&[0, 0, 0, 0, 1, 1, 1, 1], &[1, 1, 1, 1, 0, 0, 0, 0]]),
            Stage::Day,
        );
        let ev = evaluate_stage(&day, &truth).unwrap();
        assert_eq!(ev.accuracy, 1.0);
        assert_eq!(ev.errors.len(), 16);
        let full = RecoveredTrajectorySet { stage: Stage::Full, ..day };
        assert_eq!(evaluate_stage(&full, &truth).unwrap().accuracy, 0.5);
    }

    #[test]
    fn night_stage_scores_only_night_slots() {
        let map = line_map(&[0.0, 100.0]);
        let truth = set_from(map.clone(), grid(1), &[&[0, 1, 1, 1]]);
        let mut night = as_recovered(&truth, Stage::Night);
        for t in 1..4 {
            night.trajectories[0].locations[t] = TowerId::NO_RECORD;
        }
        let ev = evaluate_stage(&night, &truth).unwrap();
        assert_eq!(ev.accuracy, 1.0);
        assert_eq!(ev.errors, vec![0.0]);
    }

    #[test]
    fn accuracy_is_invariant_under_joint_permutation() {
        let map = line_map(&[0.0, 1.0, 2.0]);
        let truth = set_from(map.clone(), grid(1), &[&[0, 1, 2, 2], &[1, 1, 0, 0], &[2, 2, 1, 0]]);
        let rec = set_from(map.clone(), grid(1), &[&[0, 1, 1, 2], &[2, 2, 2, 0], &[1, 0, 0, 0]]);
        let p = Pairing { truth_of: vec![0, 2, 1] };
        let a = accuracy(&as_recovered(&rec, Stage::Full), &truth, &p).unwrap();
        // Reverse both index orders and remap the pairing.
        let rev = |s: &TrajectorySet| {
            let mut t = s.clone();
            t.trajectories.reverse();
            t
        };
        let q = Pairing { truth_of: vec![1, 0, 2] };
        let b = accuracy(&as_recovered(&rev(&rec), Stage::Full), &rev(&truth), &q).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shape_errors() {
        let map = line_map(&[0.0, 1.0]);
        let truth = set_from(map.clone(), grid(1), &[&[0, 1, 1, 1]]);
        let two = as_recovered(&set_from(map, grid(1), &[&[0, 1, 1, 1], &[1, 1, 1, 1]]), Stage::Full);
        assert!(pair_greedy(&two, &truth).is_err());
    }

    proptest::proptest! {
        #[test]
        fn greedy_is_always_a_bijection(
            rows in proptest::collection::vec(proptest::collection::vec(0i64..3, 4), 1..8),
            perm_seed in 0u64..1000,
        ) {
            let map = line_map(&[0.0, 1.0, 2.0]);
            let refs: Vec<&[i64]> = rows.iter().map(|r| r.as_slice()).collect();
            let truth = set_from(map.clone(), grid(1), &refs);
            let mut shuffled = rows.clone();
            shuffled.rotate_left(perm_seed as usize % rows.len());
            let refs: Vec<&[i64]> = shuffled.iter().map(|r| r.as_slice()).collect();
            let rec = as_recovered(&set_from(map, grid(1), &refs), Stage::Full);
            let p = pair_greedy(&rec, &truth).unwrap();
            proptest::prop_assert!(p.is_bijection());
            let a = accuracy(&rec, &truth, &p).unwrap();
            let e = recovery_error(&rec, &truth, &p).unwrap();
            proptest::prop_assert_eq!(a == 1.0, e.iter().all(|&x| x == 0.0));
        }
    }
}
