//! CSV formats.
//!
//! Trajectories: `user_id,slot,tower_id`, one row per (user, slot), sentinel
//! tower id -1. Recovered sets write ids as `r0..r(N-1)`.
//! Towers: `tower_id,x_m,y_m,base_station_id,district_id`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{SlottedRecords, TimeGrid, Tower, TowerId, TowerMap, Trajectory, TrajectorySet};
use crate::error::{Error, Result};

const TRAJECTORY_HEADER: [&str; 3] = ["user_id", "slot", "tower_id"];
const TOWER_HEADER: [&str; 5] = ["tower_id", "x_m", "y_m", "base_station_id", "district_id"];

/// How user ids are rendered in the first column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdStyle {
    Plain,
    /// `r{index}`, used for recovered (unnamed) trajectories.
    Recovered,
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers()?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::Malformed {
            row: 1,
            message: format!("expected header `{}`", expected.join(",")),
        });
    }
    Ok(())
}

fn field<T: std::str::FromStr>(record: &csv::StringRecord, i: usize, name: &str) -> Result<T> {
    let row = record.position().map_or(0, |p| p.line());
    let raw = record.get(i).ok_or_else(|| Error::Malformed {
        row,
        message: format!("missing column {name}"),
    })?;
    raw.parse().map_err(|_| Error::Malformed {
        row,
        message: format!("cannot parse {name} from {raw:?}"),
    })
}

fn user_field(record: &csv::StringRecord) -> Result<u64> {
    let row = record.position().map_or(0, |p| p.line());
    let raw = record.get(0).unwrap_or("");
    raw.strip_prefix('r')
        .unwrap_or(raw)
        .parse()
        .map_err(|_| Error::Malformed {
            row,
            message: format!("cannot parse user_id from {raw:?}"),
        })
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

pub fn read_tower_map<R: Read>(input: R) -> Result<TowerMap> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &TOWER_HEADER)?;
    let mut towers = Vec::new();
    for record in rdr.records() {
        let record = record?;
        if record.len() != TOWER_HEADER.len() {
            return Err(Error::Malformed {
                row: line_of(&record),
                message: format!("expected {} columns", TOWER_HEADER.len()),
            });
        }
        towers.push(Tower {
            id: TowerId(field(&record, 0, "tower_id")?),
            x: field(&record, 1, "x_m")?,
            y: field(&record, 2, "y_m")?,
            base_station_id: field(&record, 3, "base_station_id")?,
            district_id: field(&record, 4, "district_id")?,
        });
    }
    TowerMap::new(towers)
}

pub fn write_tower_map<W: Write>(map: &TowerMap, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "{}", TOWER_HEADER.join(","))?;
    for t in map.towers() {
        writeln!(
            out,
            "{},{},{},{},{}",
            t.id, t.x, t.y, t.base_station_id, t.district_id
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_tower_map(path: impl AsRef<Path>) -> Result<TowerMap> {
    read_tower_map(File::open(path)?)
}

pub fn store_tower_map(map: &TowerMap, path: impl AsRef<Path>) -> Result<()> {
    write_tower_map(map, File::create(path)?)
}

struct Row {
    line: u64,
    user: u64,
    slot: usize,
    tower: TowerId,
}

fn read_rows<R: Read>(input: R, tower_map: &TowerMap) -> Result<Vec<Row>> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &TRAJECTORY_HEADER)?;
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = line_of(&record);
        if record.len() != TRAJECTORY_HEADER.len() {
            return Err(Error::Malformed {
                row: line,
                message: format!("expected {} columns", TRAJECTORY_HEADER.len()),
            });
        }
        let user = user_field(&record)?;
        let slot = field(&record, 1, "slot")?;
        let tower = TowerId(field(&record, 2, "tower_id")?);
        if tower.is_record() && !tower_map.contains(tower) {
            return Err(Error::UnknownTowerAt { row: line, id: tower });
        }
        rows.push(Row {
            line,
            user,
            slot,
            tower,
        });
    }
    if rows.is_empty() {
        return Err(Error::ZeroTrajectories);
    }
    Ok(rows)
}

fn grid_for(rows: &[Row], slot_seconds: u32) -> Result<TimeGrid> {
    let total = rows.iter().map(|r| r.slot).max().unwrap_or(0) + 1;
    let probe = TimeGrid::new(0, slot_seconds, 1)?;
    if total % probe.slots_per_day() != 0 {
        return Err(Error::InvalidConfig(format!(
            "{total} slots is not a whole number of {}-slot days",
            probe.slots_per_day()
        )));
    }
    TimeGrid::new(0, slot_seconds, total / probe.slots_per_day())
}

/// Reads a trajectory CSV with exactly one row per (user, slot). The grid
/// has `slot_seconds` slots and as many days as the largest slot implies.
pub fn read_trajectories<R: Read>(
    input: R,
    tower_map: TowerMap,
    slot_seconds: u32,
) -> Result<TrajectorySet> {
    let rows = read_rows(input, &tower_map)?;
    let grid = grid_for(&rows, slot_seconds)?;
    let total = grid.total_slots();
    let mut users: BTreeMap<u64, (u64, Vec<Option<TowerId>>)> = BTreeMap::new();
    for row in &rows {
        let (_, slots) = users
            .entry(row.user)
            .or_insert_with(|| (row.line, vec![None; total]));
        if slots[row.slot].replace(row.tower).is_some() {
            return Err(Error::Malformed {
                row: row.line,
                message: format!("duplicate row for user {} slot {}", row.user, row.slot),
            });
        }
    }
    let mut trajectories = Vec::with_capacity(users.len());
    for (user, (first_line, slots)) in users {
        let found = slots.iter().filter(|s| s.is_some()).count();
        if found != total {
            return Err(Error::Malformed {
                row: first_line,
                message: format!("user {user} has {found} slots, expected {total}"),
            });
        }
        trajectories.push(Trajectory::new(user, slots.into_iter().flatten().collect()));
    }
    TrajectorySet::new(grid, tower_map, trajectories)
}

/// Reads a trajectory CSV that may hold several rows (records) per
/// (user, slot) and may omit slots.
pub fn read_raw_trajectories<R: Read>(
    input: R,
    tower_map: TowerMap,
    slot_seconds: u32,
) -> Result<SlottedRecords> {
    let rows = read_rows(input, &tower_map)?;
    let grid = grid_for(&rows, slot_seconds)?;
    let mut users: BTreeMap<u64, Vec<Vec<TowerId>>> = BTreeMap::new();
    for row in rows {
        let slots = users
            .entry(row.user)
            .or_insert_with(|| vec![Vec::new(); grid.total_slots()]);
        if row.tower.is_record() {
            slots[row.slot].push(row.tower);
        }
    }
    Ok(SlottedRecords {
        grid,
        tower_map,
        users: users.into_iter().collect(),
    })
}

pub fn write_trajectories<W: Write>(set: &TrajectorySet, style: IdStyle, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "{}", TRAJECTORY_HEADER.join(","))?;
    for (i, t) in set.trajectories.iter().enumerate() {
        for (slot, tower) in t.locations.iter().enumerate() {
            match style {
                IdStyle::Plain => writeln!(out, "{},{},{}", t.user_id, slot, tower)?,
                IdStyle::Recovered => writeln!(out, "r{},{},{}", i, slot, tower)?,
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn load_trajectories(
    path: impl AsRef<Path>,
    tower_map: TowerMap,
    slot_seconds: u32,
) -> Result<TrajectorySet> {
    read_trajectories(File::open(path)?, tower_map, slot_seconds)
}

pub fn load_raw_trajectories(
    path: impl AsRef<Path>,
    tower_map: TowerMap,
    slot_seconds: u32,
) -> Result<SlottedRecords> {
    read_raw_trajectories(File::open(path)?, tower_map, slot_seconds)
}

pub fn store_trajectories(set: &TrajectorySet, style: IdStyle, path: impl AsRef<Path>) -> Result<()> {
    write_trajectories(set, style, File::create(path)?)
}
