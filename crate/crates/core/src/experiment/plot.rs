use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::evaluation::{regularity_stats, uniqueness, ErrorCdf, StageEvaluation, Strategy};
use crate::mobility::{DayWindow, TrajectorySet};

const GAIN_BIN: f64 = 0.05;

fn create(dir: &Path, name: &str) -> Result<(PathBuf, std::io::BufWriter<std::fs::File>)> {
    let path = dir.join(name);
    let file = std::fs::File::create(&path)?;
    Ok((path, std::io::BufWriter::new(file)))
}

fn write_cdf(dir: &Path, name: &str, header: &str, values: &[f64]) -> Result<PathBuf> {
    let (path, mut out) = create(dir, name)?;
    writeln!(out, "{header},cum_fraction")?;
    for (v, f) in ErrorCdf::from_values(values).points {
        writeln!(out, "{v},{f}")?;
    }
    out.flush()?;
    Ok(path)
}

/// Writes figure-ready CSVs about `truth` and the stage evaluations of an
/// attack on it into `dir`, and returns their paths.
///
/// Files: per-user top-k visit fractions, uniqueness per strategy and K,
/// distinct night locations, night dwell, velocity-extrapolation error,
/// same/different-user information gain densities, accuracy per stage and
/// the error CDF of every stage.
pub fn write_plot_data(
    dir: &Path,
    truth: &TrajectorySet,
    evaluations: &[StageEvaluation],
    night_window: DayWindow,
    max_k: usize,
    seed: u64,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let stats = regularity_stats(truth, night_window, seed)?;
    let mut written = Vec::new();

    let (path, mut out) = create(dir, "top_locations.csv")?;
    writeln!(out, "k,fraction,cum_fraction")?;
    for k in 0..5 {
        let values: Vec<f64> = stats.top_fractions.iter().map(|f| f[k]).collect();
        for (v, f) in ErrorCdf::from_values(&values).points {
            writeln!(out, "{},{v},{f}", k + 1)?;
        }
    }
    out.flush()?;
    written.push(path);

    let (path, mut out) = create(dir, "uniqueness.csv")?;
    writeln!(out, "strategy,k,fraction")?;
    for s in Strategy::ALL {
        for k in 1..=max_k {
            writeln!(out, "{},{k},{}", s.name(), uniqueness(&truth.trajectories, k, s, seed)?)?;
        }
    }
    out.flush()?;
    written.push(path);

    let (path, mut out) = create(dir, "night_locations.csv")?;
    writeln!(out, "locations,share")?;
    let most = stats.night_locations.iter().copied().max().unwrap_or(0);
    let total = stats.night_locations.len().max(1) as f64;
    for c in 1..=most {
        let n = stats.night_locations.iter().filter(|&&x| x == c).count();
        writeln!(out, "{c},{}", n as f64 / total)?;
    }
    out.flush()?;
    written.push(path);

    written.push(write_cdf(dir, "night_dwell.csv", "fraction", &stats.night_dwell)?);
    written.push(write_cdf(dir, "velocity_error.csv", "meters", &stats.velocity_errors)?);

    let (path, mut out) = create(dir, "info_gain.csv")?;
    writeln!(out, "gain,same_density,different_density")?;
    let top = stats
        .gain_same
        .iter()
        .chain(&stats.gain_different)
        .fold(0.0f64, |a, &b| a.max(b));
    let bins = (top / GAIN_BIN).floor() as usize + 1;
    let density = |values: &[f64]| {
        let mut h = vec![0.0; bins];
        for &v in values {
            h[((v / GAIN_BIN).floor() as usize).min(bins - 1)] += 1.0;
        }
        let n = values.len().max(1) as f64;
        h.into_iter().map(|c| c / (n * GAIN_BIN)).collect::<Vec<f64>>()
    };
    let (same, diff) = (density(&stats.gain_same), density(&stats.gain_different));
    for b in 0..bins {
        writeln!(out, "{},{},{}", b as f64 * GAIN_BIN, same[b], diff[b])?;
    }
    out.flush()?;
    written.push(path);

    let (path, mut out) = create(dir, "accuracy.csv")?;
    writeln!(out, "stage,accuracy")?;
    for e in evaluations {
        writeln!(out, "{},{}", e.stage.name(), e.accuracy)?;
    }
    out.flush()?;
    written.push(path);

    for e in evaluations {
        let path = dir.join(format!("error_cdf_{}.csv", e.stage.name()));
        e.error_cdf().store(&path)?;
        written.push(path);
    }
    Ok(written)
}
