//! Browser bindings: run the attack on a generated city, inspect one
//! recovered user against the truth, and compare two visit histograms.

use ashen::aggregation::{perturb, PerturbConfig};
use ashen::evaluation::{pair_rows, uniqueness, ErrorCdf, Pairing, StageEvaluation, Strategy};
use ashen::experiment::run_pipeline;
use ashen::mobility::{generate_population, GeneratorConfig, Level, TowerId, TrajectorySet};
use ashen::recovery::{info_gain, FrequencyHistogram, Recovery, RecoveryConfig, Stage};
use wasm_bindgen::prelude::*;

fn js(e: ashen::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn parse_level(name: &str) -> ashen::Result<Level> {
    Level::ALL
        .into_iter()
        .find(|l| l.name() == name)
        .ok_or_else(|| ashen::Error::InvalidConfig(format!("unknown level '{name}'")))
}

/// One attack on one synthetic city.
#[wasm_bindgen]
pub struct Attack {
    truth: TrajectorySet,
    recovery: Recovery,
    evaluations: Vec<StageEvaluation>,
    pairing: Pairing,
}

impl Attack {
    pub fn run(users: usize, days: usize, seed: u64, level: &str, perturb_prob: f64) -> ashen::Result<Attack> {
        let base = generate_population(&GeneratorConfig {
            num_users: users,
            num_days: days,
            seed,
            ..Default::default()
        })?;
        let truth = base.coarsen_spatial(parse_level(level)?);
        let published = perturb(
            &truth,
            &PerturbConfig {
                probability: perturb_prob,
                seed,
            },
        )?;
        let run = run_pipeline(&truth, &published, &RecoveryConfig::default(), 1, seed)?;
        let rec: Vec<&[TowerId]> = run.recovery.full.trajectories.iter().map(|t| &t.locations[..]).collect();
        let tru: Vec<&[TowerId]> = truth.trajectories.iter().map(|t| &t.locations[..]).collect();
        let slots = run.recovery.full.covered_slots();
        let pairing = pair_rows(&rec, &tru, &slots)?;
        Ok(Attack {
            truth,
            recovery: run.recovery,
            evaluations: run.evaluations,
            pairing,
        })
    }

    fn path(&self, locations: &[TowerId]) -> Vec<f64> {
        locations
            .iter()
            .filter_map(|&id| self.truth.tower_map.position(id))
            .flat_map(|p| [p.x, p.y])
            .collect()
    }
}

#[wasm_bindgen]
impl Attack {
    /// `level` is `sector`, `base_station` or `district`.
    #[wasm_bindgen(constructor)]
    pub fn new(users: usize, days: usize, seed: u32, level: &str, perturb_prob: f64) -> Result<Attack, JsError> {
        Attack::run(users, days, u64::from(seed), level, perturb_prob).map_err(js)
    }

    pub fn users(&self) -> usize {
        self.truth.len()
    }

    pub fn slots(&self) -> usize {
        self.truth.grid.total_slots()
    }

    /// Accuracy of stage 1 (night), 2 (day) or 3 (full).
    pub fn accuracy(&self, stage: u8) -> f64 {
        Stage::from_number(stage)
            .and_then(|s| self.evaluations.iter().find(|e| e.stage == s))
            .map_or(f64::NAN, |e| e.accuracy)
    }

    /// Error CDF of a stage as flat `[meters, fraction, ...]` pairs.
    pub fn error_cdf(&self, stage: u8) -> Vec<f64> {
        let Some(e) = Stage::from_number(stage).and_then(|s| self.evaluations.iter().find(|e| e.stage == s)) else {
            return Vec::new();
        };
        ErrorCdf::from_values(&e.errors)
            .points
            .into_iter()
            .flat_map(|(m, f)| [m, f])
            .collect()
    }

    /// Top-K uniqueness of the true trajectories.
    pub fn uniqueness_top(&self, k: usize) -> f64 {
        uniqueness(&self.truth.trajectories, k, Strategy::TopK, 1).unwrap_or(f64::NAN)
    }

    /// Tower positions as flat `[x, y, ...]` in meters.
    pub fn towers(&self) -> Vec<f64> {
        self.truth.tower_map.positions().into_iter().flat_map(|p| [p.x, p.y]).collect()
    }

    /// Recovered row `row` of the full stage, as flat `[x, y, ...]` per slot.
    pub fn recovered_path(&self, row: usize) -> Vec<f64> {
        self.recovery
            .full
            .trajectories
            .get(row)
            .map_or_else(Vec::new, |t| self.path(&t.locations))
    }

    /// The true trajectory paired with recovered row `row`.
    pub fn true_path(&self, row: usize) -> Vec<f64> {
        self.pairing
            .truth_of
            .get(row)
            .map_or_else(Vec::new, |&u| self.path(&self.truth.trajectories[u].locations))
    }
}

fn parse_counts(text: &str) -> ashen::Result<FrequencyHistogram> {
    let mut pairs = Vec::new();
    for (i, field) in text.split(',').map(str::trim).enumerate() {
        if field.is_empty() {
            continue;
        }
        let c: u32 = field
            .parse()
            .map_err(|_| ashen::Error::InvalidConfig(format!("bad count '{field}'")))?;
        if c > 0 {
            pairs.push((TowerId(i as i64), c));
        }
    }
    Ok(FrequencyHistogram::from_counts(pairs))
}

pub fn gain_of(a: &str, b: &str) -> ashen::Result<f64> {
    info_gain(&parse_counts(a)?, &parse_counts(b)?)
}

/// Information gain between two visit histograms given as comma-separated
/// counts per location, e.g. `"5,1,0"` and `"4,2,0"`.
#[wasm_bindgen]
pub fn histogram_gain(a: &str, b: &str) -> Result<f64, JsError> {
    gain_of(a, b).map_err(js)
}
