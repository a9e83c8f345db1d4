use crate::error::{Error, Result};
use crate::mobility::{TimeGrid, Tower, TowerId, TowerMap, Trajectory, TrajectorySet};

/// Spacing between users' commute lines, meters.
const LINE_GAP: f64 = 10_000.0;
/// Distance covered per commuting slot, meters.
const STEP: f64 = 1_000.0;
const ROUTE: usize = 4;

/// A population on which the attack is exact: every user owns a private
/// line of towers (home, `ROUTE - 1` waypoints, work), the lines lie far
/// apart, and each user commutes along their line at constant speed every
/// day, 30-minute slots.
pub fn separable_population(num_users: usize, num_days: usize) -> Result<TrajectorySet> {
    if num_users == 0 {
        return Err(Error::ZeroTrajectories);
    }
    let grid = TimeGrid::new(0, 1800, num_days)?;
    let per_user = ROUTE + 1;
    let mut towers = Vec::with_capacity(num_users * per_user);
    for u in 0..num_users {
        for k in 0..per_user {
            let id = (u * per_user + k) as i64;
            towers.push(Tower {
                id: TowerId(id),
                x: k as f64 * STEP,
                y: u as f64 * LINE_GAP,
                base_station_id: id,
                district_id: u as i64,
            });
        }
    }
    let map = TowerMap::new(towers)?;
    let spd = grid.slots_per_day();
    let trajectories = (0..num_users)
        .map(|u| {
            let at = |k: usize| TowerId((u * per_user + k) as i64);
            // Leave between 06:00 and 07:30, head back between 17:00 and 18:00.
            let depart = 12 + u % 4;
            let back = 34 + u % 3;
            let day: Vec<TowerId> = (0..spd)
                .map(|s| {
                    if s < depart {
                        at(0)
                    } else if s < depart + ROUTE {
                        at(s - depart + 1)
                    } else if s < back {
                        at(ROUTE)
                    } else if s < back + ROUTE {
                        at(ROUTE - 1 - (s - back))
                    } else {
                        at(0)
                    }
                })
                .collect();
            Trajectory::new(u as u64, day.repeat(num_days))
        })
        .collect();
    TrajectorySet::new(grid, map, trajectories)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape() {
        let set = separable_population(3, 2).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(set.tower_map.len(), 15);
        let l = &set.trajectories[1].locations;
        assert_eq!(l.len(), 96);
        assert_eq!(l[0], TowerId(5));
        assert_eq!(l[13], TowerId(6));
        assert_eq!(l[20], TowerId(9));
        assert_eq!(l[47], TowerId(5));
        assert_eq!(&l[..48], &l[48..]);
        assert!(separable_population(0, 1).is_err());
    }
}
