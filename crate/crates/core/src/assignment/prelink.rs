use std::collections::HashMap;

use crate::aggregation::RecordMultiset;
use crate::error::{Error, Result};
use crate::mobility::{Point, TowerMap};

/// Rows directly linked to record columns, plus what is left for the solver.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Prelink {
    /// `(row, col)` pairs, in ascending row order per tower.
    pub links: Vec<(usize, usize)>,
    /// Unlinked rows, ascending.
    pub rows: Vec<usize>,
    /// Unlinked record columns, ascending.
    pub cols: Vec<usize>,
}

impl Prelink {
    pub fn is_complete(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Links each row to its nearest record tower when that tower lies within
/// `threshold` meters of the row's estimate, as far as the tower's
/// multiplicity allows. Rows compete in ascending order; records are used in
/// canonical order.
pub fn prelink(
    estimates: &[Point],
    records: &RecordMultiset,
    tower_map: &TowerMap,
    threshold: f64,
) -> Result<Prelink> {
    if !(threshold >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "pre-link threshold must be >= 0, got {threshold}"
        )));
    }
    if estimates.len() != records.records.len() {
        return Err(Error::SizeMismatch {
            expected: records.records.len(),
            found: estimates.len(),
        });
    }
    let record_towers = records
        .records
        .iter()
        .map(|id| tower_map.index_of(*id).ok_or(Error::UnknownTower(*id)))
        .collect::<Result<Vec<_>>>()?;
    Ok(prelink_indexed(
        estimates,
        &record_towers,
        &tower_map.positions(),
        threshold,
    ))
}

/// As [`prelink`], with records given as dense tower indices sorted
/// ascending and `positions` indexed the same way.
pub fn prelink_indexed(
    estimates: &[Point],
    record_towers: &[usize],
    positions: &[Point],
    threshold: f64,
) -> Prelink {
    debug_assert!(record_towers.windows(2).all(|w| w[0] <= w[1]));
    // Distinct record towers with the first column holding each.
    let mut distinct: Vec<(usize, usize, usize)> = Vec::new(); // (tower, first col, multiplicity)
    for (col, &g) in record_towers.iter().enumerate() {
        match distinct.last_mut() {
            Some((last, _, mult)) if *last == g => *mult += 1,
            _ => distinct.push((g, col, 1)),
        }
    }

    let nearest: Vec<Option<usize>> = if threshold == 0.0 {
        let mut by_coords: HashMap<(u64, u64), usize> = HashMap::with_capacity(distinct.len());
        for (k, &(g, _, _)) in distinct.iter().enumerate() {
            by_coords.entry(coord_key(positions[g])).or_insert(k);
        }
        estimates
            .iter()
            .map(|p| by_coords.get(&coord_key(*p)).copied())
            .collect()
    } else {
        estimates
            .iter()
            .map(|p| {
                let mut best = None;
                let mut best_d = f64::INFINITY;
                for (k, &(g, _, _)) in distinct.iter().enumerate() {
                    let d = p.distance(positions[g]);
                    if d < best_d {
                        best_d = d;
                        best = Some(k);
                    }
                }
                best.filter(|_| best_d <= threshold)
            })
            .collect()
    };

    let mut used = vec![0usize; distinct.len()];
    let mut col_taken = vec![false; record_towers.len()];
    let mut out = Prelink::default();
    for (row, near) in nearest.iter().enumerate() {
        match *near {
            Some(k) if used[k] < distinct[k].2 => {
                let col = distinct[k].1 + used[k];
                used[k] += 1;
                col_taken[col] = true;
                out.links.push((row, col));
            }
            _ => out.rows.push(row),
        }
    }
    out.cols = (0..record_towers.len()).filter(|&c| !col_taken[c]).collect();
    out
}

fn coord_key(p: Point) -> (u64, u64) {
    // -0.0 and 0.0 are the same place.
    ((p.x + 0.0).to_bits(), (p.y + 0.0).to_bits())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::{solve_lsap, CostMatrix};
    use proptest::prelude::*;

    fn pts(xs: &[f64]) -> Vec<Point> {
        xs.iter().map(|&x| Point::new(x, 0.0)).collect()
    }

    /// Cost of prelinking then solving the remainder, on a row/col distance
    /// matrix.
    fn pipeline_cost(est: &[Point], towers: &[usize], pos: &[Point], threshold: f64) -> f64 {
        let p = prelink_indexed(est, towers, pos, threshold);
        let mut total: f64 = p
            .links
            .iter()
            .map(|&(r, c)| est[r].distance(pos[towers[c]]))
            .sum();
        if !p.rows.is_empty() {
            let m = CostMatrix::from_fn(p.rows.len(), |i, j| {
                est[p.rows[i]].distance(pos[towers[p.cols[j]]])
            })
            .unwrap();
            let a = solve_lsap(&m).unwrap();
            total += a.total_cost;
        }
        total
    }

    fn unreduced_cost(est: &[Point], towers: &[usize], pos: &[Point]) -> f64 {
        let m = CostMatrix::from_fn(est.len(), |i, j| est[i].distance(pos[towers[j]])).unwrap();
        solve_lsap(&m).unwrap().total_cost
    }

    #[test]
    fn separable_case_links_everything() {
        let pos = pts(&[0.0, 10.0, 20.0]);
        let est = vec![pos[2], pos[0], pos[1]];
        let p = prelink_indexed(&est, &[0, 1, 2], &pos, 0.0);
        assert_eq!(p.links, vec![(0, 2), (1, 0), (2, 1)]);
        assert!(p.is_complete());
        assert!(p.cols.is_empty());
    }

    #[test]
    fn competing_rows_lower_index_wins() {
        let pos = pts(&[0.0, 100.0]);
        let est = vec![pos[0], pos[0]];
        let towers = [0, 1];
        let p = prelink_indexed(&est, &towers, &pos, 0.0);
        assert_eq!(p.links, vec![(0, 0)]);
        assert_eq!(p.rows, vec![1]);
        assert_eq!(p.cols, vec![1]);
        assert_eq!(
            pipeline_cost(&est, &towers, &pos, 0.0),
            unreduced_cost(&est, &towers, &pos)
        );
        assert_eq!(pipeline_cost(&est, &towers, &pos, 0.0), 100.0);
    }

    #[test]
    fn no_coincidence_is_identity() {
        let pos = pts(&[0.0, 100.0]);
        let est = pts(&[1.0, 99.0]);
        let p = prelink_indexed(&est, &[0, 1], &pos, 0.0);
        assert!(p.links.is_empty());
        assert_eq!(p.rows, vec![0, 1]);
        assert_eq!(p.cols, vec![0, 1]);
    }

    #[test]
    fn positive_threshold_uses_nearest_record_tower() {
        let pos = pts(&[0.0, 100.0, 200.0]);
        // Row 0 sits at 40: nearest record tower is 0 (40 m).
        // Row 1 sits at 160: nearest is tower 2 (40 m), but tower 2 is absent
        // from the records, so its nearest record tower is 1 (60 m).
        let est = pts(&[40.0, 160.0]);
        let p = prelink_indexed(&est, &[0, 1], &pos, 50.0);
        assert_eq!(p.links, vec![(0, 0)]);
        assert_eq!(p.rows, vec![1]);
        let p = prelink_indexed(&est, &[0, 1], &pos, 60.0);
        assert_eq!(p.links, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn multiplicity_limits_links_and_uses_canonical_order() {
        let pos = pts(&[0.0, 50.0]);
        let est = vec![pos[1], pos[0], pos[1], pos[1]];
        let p = prelink_indexed(&est, &[0, 1, 1, 1], &pos, 0.0);
        assert_eq!(p.links, vec![(0, 1), (1, 0), (2, 2), (3, 3)]);
        let p = prelink_indexed(&est, &[0, 0, 0, 1], &pos, 0.0);
        assert_eq!(p.links, vec![(0, 3), (1, 0)]);
        assert_eq!(p.rows, vec![2, 3]);
        assert_eq!(p.cols, vec![1, 2]);
    }

    #[test]
    fn validates_through_tower_map() {
        let map = crate::mobility::fixtures::line_map(&[0.0, 10.0]);
        let recs = RecordMultiset {
            slot: 0,
            records: vec![crate::mobility::TowerId(0), crate::mobility::TowerId(1)],
        };
        let est = pts(&[10.0, 0.0]);
        let p = prelink(&est, &recs, &map, 0.0).unwrap();
        assert_eq!(p.links, vec![(0, 1), (1, 0)]);
        assert!(prelink(&est, &recs, &map, -1.0).is_err());
        assert!(prelink(&est[..1], &recs, &map, 0.0).is_err());
        let bad = RecordMultiset {
            slot: 0,
            records: vec![crate::mobility::TowerId(0), crate::mobility::TowerId(9)],
        };
        assert!(prelink(&est, &bad, &map, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn reduced_pipeline_never_beats_the_optimum(
            xs in proptest::collection::vec(0u32..20, 1..6),
            est_idx in proptest::collection::vec(0usize..8, 6),
            offsets in proptest::collection::vec(0u32..3, 6),
            threshold in 0u32..3,
        ) {
            let pos: Vec<Point> = (0..8).map(|k| Point::new(f64::from(k as u32 * 10), 0.0)).collect();
            let n = xs.len();
            let mut towers: Vec<usize> = xs.iter().map(|&x| x as usize % 8).collect();
            towers.sort_unstable();
            let est: Vec<Point> = (0..n)
                .map(|i| Point::new(pos[est_idx[i]].x + f64::from(offsets[i]), 0.0))
                .collect();
            let best = unreduced_cost(&est, &towers, &pos);
            let reduced = pipeline_cost(&est, &towers, &pos, f64::from(threshold) * 5.0);
            prop_assert!(reduced >= best - 1e-9);
            // Exact-match pre-links cost nothing and never hurt.
            prop_assert!((pipeline_cost(&est, &towers, &pos, 0.0) - best).abs() <= 1e-9);
        }
    }
}
