//! Aggregate CSV: `slot,tower_id,count`, sorted by (slot, tower_id); absent
//! rows mean zero.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::AggregateSeries;
use crate::error::{Error, Result};
use crate::mobility::{TimeGrid, TowerId, TowerMap};

const HEADER: [&str; 3] = ["slot", "tower_id", "count"];

pub fn write_aggregate<W: Write>(agg: &AggregateSeries, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "{}", HEADER.join(","))?;
    for (slot, counts) in agg.counts.iter().enumerate() {
        for (tower, count) in counts {
            writeln!(out, "{slot},{tower},{count}")?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads an aggregate CSV onto `tower_map`, with `slot_seconds` slots and
/// as many days as the largest slot implies.
pub fn read_aggregate<R: Read>(input: R, tower_map: TowerMap, slot_seconds: u32) -> Result<AggregateSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    if rdr.headers()?.iter().ne(HEADER.iter().copied()) {
        return Err(Error::Malformed {
            row: 1,
            message: format!("expected header `{}`", HEADER.join(",")),
        });
    }
    let mut rows: Vec<(usize, TowerId, u32)> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line());
        let parse_err = |what: &str| Error::Malformed {
            row,
            message: format!("cannot parse {what}"),
        };
        if record.len() != HEADER.len() {
            return Err(parse_err("row: expected 3 columns"));
        }
        let slot: usize = record[0].parse().map_err(|_| parse_err("slot"))?;
        let tower = TowerId(record[1].parse().map_err(|_| parse_err("tower_id"))?);
        let count: u32 = record[2].parse().map_err(|_| parse_err("count"))?;
        if !tower_map.contains(tower) {
            return Err(Error::UnknownTowerAt { row, id: tower });
        }
        rows.push((slot, tower, count));
    }
    if rows.is_empty() {
        return Err(Error::ZeroTrajectories);
    }
    let total = rows.iter().map(|r| r.0).max().unwrap() + 1;
    let per_day = TimeGrid::new(0, slot_seconds, 1)?.slots_per_day();
    if total % per_day != 0 {
        return Err(Error::InvalidConfig(format!(
            "{total} slots is not a whole number of {per_day}-slot days"
        )));
    }
    let grid = TimeGrid::new(0, slot_seconds, total / per_day)?;
    let mut counts = vec![BTreeMap::new(); total];
    for (slot, tower, count) in rows {
        *counts[slot].entry(tower).or_insert(0) += count;
    }
    AggregateSeries::new(grid, tower_map, counts)
}

pub fn load_aggregate(path: impl AsRef<Path>, tower_map: TowerMap, slot_seconds: u32) -> Result<AggregateSeries> {
    read_aggregate(File::open(path)?, tower_map, slot_seconds)
}

pub fn store_aggregate(agg: &AggregateSeries, path: impl AsRef<Path>) -> Result<()> {
    write_aggregate(agg, File::create(path)?)
}
