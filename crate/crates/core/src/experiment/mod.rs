//! Experiment configuration, the end-to-end pipeline and factor sweeps.

mod benchmark;
mod pipeline;
mod plot;

use std::fmt;
use std::path::PathBuf;

pub use benchmark::separable_population;
pub use pipeline::{evaluation_report, run_pipeline, run_sweep, PipelineRun, SweepPoint, SweepResult};
pub use plot::write_plot_data;

use crate::error::{Error, Result};
use crate::mobility::{GeneratorConfig, Level};
use crate::recovery::RecoveryConfig;

/// The factor varied by a sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    None,
    Users(Vec<usize>),
    Spatial(Vec<Level>),
    /// Slot lengths in minutes.
    Temporal(Vec<u32>),
    /// Displacement probabilities.
    Perturb(Vec<f64>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::None => "none",
            SweepAxis::Users(_) => "users",
            SweepAxis::Spatial(_) => "spatial",
            SweepAxis::Temporal(_) => "temporal",
            SweepAxis::Perturb(_) => "perturb",
        }
    }

    /// The axis with its usual values.
    pub fn with_defaults(name: &str) -> Result<SweepAxis> {
        Ok(match name.trim() {
            "none" => SweepAxis::None,
            "users" => SweepAxis::Users(vec![100, 500, 2000]),
            "spatial" => SweepAxis::Spatial(Level::ALL.to_vec()),
            "temporal" => SweepAxis::Temporal(vec![30, 90, 180]),
            "perturb" => SweepAxis::Perturb(vec![0.0, 0.1, 0.3, 0.5]),
            other => return Err(Error::InvalidConfig(format!("unknown sweep axis {other:?}"))),
        })
    }

    /// Replaces the values, keeping the axis.
    pub fn with_values(&self, values: &str) -> Result<SweepAxis> {
        let parts: Vec<&str> = values.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        fn all<T: std::str::FromStr>(parts: &[&str], what: &str) -> Result<Vec<T>> {
            parts
                .iter()
                .map(|p| p.parse().map_err(|_| Error::InvalidConfig(format!("bad {what} value {p:?}"))))
                .collect()
        }
        Ok(match self {
            SweepAxis::None if parts.is_empty() => SweepAxis::None,
            SweepAxis::None => return Err(Error::InvalidConfig("sweep values given without an axis".into())),
            SweepAxis::Users(_) => SweepAxis::Users(all(&parts, "user count")?),
            SweepAxis::Spatial(_) => SweepAxis::Spatial(all(&parts, "level")?),
            SweepAxis::Temporal(_) => SweepAxis::Temporal(all(&parts, "slot length")?),
            SweepAxis::Perturb(_) => SweepAxis::Perturb(all(&parts, "probability")?),
        })
    }

    /// Labels of the sweep points, in order.
    pub fn labels(&self) -> Vec<String> {
        match self {
            SweepAxis::None => vec!["base".into()],
            SweepAxis::Users(v) => v.iter().map(ToString::to_string).collect(),
            SweepAxis::Spatial(v) => v.iter().map(ToString::to_string).collect(),
            SweepAxis::Temporal(v) => v.iter().map(ToString::to_string).collect(),
            SweepAxis::Perturb(v) => v.iter().map(ToString::to_string).collect(),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())?;
        if !matches!(self, SweepAxis::None) {
            write!(f, "={}", self.labels().join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub generator: GeneratorConfig,
    pub recovery: RecoveryConfig,
    pub sweep: SweepAxis,
    pub output: PathBuf,
    /// Largest K reported for uniqueness.
    pub max_k: usize,
    /// Seed of the random uniqueness strategies and the perturbation.
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            generator: GeneratorConfig::default(),
            recovery: RecoveryConfig::default(),
            sweep: SweepAxis::None,
            output: PathBuf::from("out"),
            max_k: 5,
            seed: 1,
        }
    }
}

/// Keys accepted by [`ExperimentConfig::set`], with a short description.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("users", "number of generated users"),
    ("towers", "number of sectors"),
    ("world_size", "side of the square world, meters"),
    ("night_home_prob", "probability a night is spent at home"),
    ("work_attachment", "share of working hours spent at work"),
    ("exploration_prob", "chance per free slot of leaving the anchor"),
    ("excursion_slots", "mean excursion length, slots"),
    ("commute_speed", "meters travelled per slot while commuting"),
    ("commute_scale", "home-to-work distance scale, meters"),
    ("sectors_per_station", "sectors grouped into one base station"),
    ("districts_per_side", "districts along each side of the world"),
    ("days", "number of days"),
    ("slot_minutes", "slot length, minutes"),
    ("seed", "seed of the generator and all random draws"),
    ("night_start", "night window start, hours after midnight"),
    ("night_end", "night window end, hours after midnight"),
    ("night_prelink", "night pre-link distance, meters"),
    ("day_prelink", "day pre-link distance, meters"),
    ("accumulate", "compare against all chained days (true) or the last day"),
    ("sweep", "none | users | spatial | temporal | perturb"),
    ("sweep_values", "comma separated values of the sweep axis"),
    ("max_k", "largest K for uniqueness"),
    ("output", "output directory"),
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("cannot parse {key} from {value:?}")))
}

fn hours(key: &str, value: &str) -> Result<u32> {
    let h: f64 = parse(key, value)?;
    if !(0.0..=24.0).contains(&h) {
        return Err(Error::InvalidConfig(format!("{key} must be within [0, 24] hours")));
    }
    Ok((h * 3600.0).round() as u32)
}

impl ExperimentConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let g = &mut self.generator;
        let r = &mut self.recovery;
        match key.trim() {
            "users" => g.num_users = parse(key, value)?,
            "towers" => g.num_towers = parse(key, value)?,
            "world_size" => g.world_size = parse(key, value)?,
            "night_home_prob" => g.night_home_prob = parse(key, value)?,
            "work_attachment" => g.work_attachment = parse(key, value)?,
            "exploration_prob" => g.exploration_prob = parse(key, value)?,
            "excursion_slots" => g.excursion_slots = parse(key, value)?,
            "commute_speed" => g.commute_speed = parse(key, value)?,
            "commute_scale" => g.commute_scale = parse(key, value)?,
            "sectors_per_station" => g.sectors_per_station = parse(key, value)?,
            "districts_per_side" => g.districts_per_side = parse(key, value)?,
            "days" => g.num_days = parse(key, value)?,
            "slot_minutes" => {
                let m: u32 = parse(key, value)?;
                g.slot_seconds = m
                    .checked_mul(60)
                    .ok_or_else(|| Error::InvalidConfig("slot_minutes too large".into()))?;
            }
            "seed" => {
                g.seed = parse(key, value)?;
                self.seed = g.seed;
            }
            "night_start" => r.night_window.start = hours(key, value)?,
            "night_end" => r.night_window.end = hours(key, value)?,
            "night_prelink" => r.night_prelink = parse(key, value)?,
            "day_prelink" => r.day_prelink = parse(key, value)?,
            "accumulate" => r.accumulate = parse(key, value)?,
            "sweep" => self.sweep = SweepAxis::with_defaults(value)?,
            "sweep_values" => self.sweep = self.sweep.with_values(value)?,
            "max_k" => self.max_k = parse(key, value)?,
            "output" => self.output = PathBuf::from(value.trim()),
            other => return Err(Error::InvalidConfig(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Parses flat `key = value` text. `#` starts a comment; later lines
    /// override earlier ones, and `sweep` must precede `sweep_values`.
    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Malformed {
                row: n as u64 + 1,
                message: format!("expected `key = value`, found {line:?}"),
            })?;
            cfg.set(key, value).map_err(|e| Error::Malformed {
                row: n as u64 + 1,
                message: e.to_string(),
            })?;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.recovery.validate()?;
        if self.max_k == 0 {
            return Err(Error::InvalidConfig("max_k must be at least 1".into()));
        }
        match &self.sweep {
            SweepAxis::Users(v) if v.is_empty() || v.contains(&0) => {
                Err(Error::InvalidConfig("user sweep needs positive counts".into()))
            }
            SweepAxis::Temporal(v) => {
                let base = self.generator.slot_seconds;
                for &m in v {
                    let s = m * 60;
                    if s == 0 || s % base != 0 {
                        return Err(Error::InvalidConfig(format!(
                            "slot length {m} min is not a multiple of the base slot ({base} s)"
                        )));
                    }
                    self.generator.grid()?.coarsen((s / base) as usize)?;
                }
                Ok(())
            }
            SweepAxis::Perturb(v) => match v.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                Some(&p) => Err(Error::InvalidProbability(p)),
                None => Ok(()),
            },
            SweepAxis::Spatial(v) if v.is_empty() => Err(Error::InvalidConfig("empty spatial sweep".into())),
            _ => Ok(()),
        }
    }

    /// The configuration as parseable text.
    pub fn to_text(&self) -> String {
        let g = &self.generator;
        let r = &self.recovery;
        let mut out = String::new();
        let mut line = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        line("users", g.num_users.to_string());
        line("towers", g.num_towers.to_string());
        line("world_size", g.world_size.to_string());
        line("night_home_prob", g.night_home_prob.to_string());
        line("work_attachment", g.work_attachment.to_string());
        line("exploration_prob", g.exploration_prob.to_string());
        line("excursion_slots", g.excursion_slots.to_string());
        line("commute_speed", g.commute_speed.to_string());
        line("commute_scale", g.commute_scale.to_string());
        line("sectors_per_station", g.sectors_per_station.to_string());
        line("districts_per_side", g.districts_per_side.to_string());
        line("days", g.num_days.to_string());
        line("slot_minutes", (g.slot_seconds / 60).to_string());
        line("seed", g.seed.to_string());
        line("night_start", (r.night_window.start as f64 / 3600.0).to_string());
        line("night_end", (r.night_window.end as f64 / 3600.0).to_string());
        line("night_prelink", r.night_prelink.to_string());
        line("day_prelink", r.day_prelink.to_string());
        line("accumulate", r.accumulate.to_string());
        line("sweep", self.sweep.name().to_string());
        if !matches!(self.sweep, SweepAxis::None) {
            line("sweep_values", self.sweep.labels().join(","));
        }
        line("max_k", self.max_k.to_string());
        line("output", self.output.display().to_string());
        out
    }
}
