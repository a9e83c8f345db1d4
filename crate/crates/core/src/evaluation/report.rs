use std::io::Write;
use std::path::Path;

use crate::error::Result;

/// Distances (meters) at which the error CDF is always reported.
pub const CDF_GRID: [f64; 7] = [0.0, 100.0, 200.0, 500.0, 1000.0, 2000.0, 5000.0];

/// Empirical CDF of recovery errors: `(meters, fraction of errors <= meters)`
/// at every distinct observed value.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorCdf {
    pub points: Vec<(f64, f64)>,
}

impl ErrorCdf {
    pub fn from_values(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mut points: Vec<(f64, f64)> = Vec::new();
        for (k, &v) in sorted.iter().enumerate() {
            let frac = (k + 1) as f64 / n;
            match points.last_mut() {
                Some(last) if last.0 == v => last.1 = frac,
                _ => points.push((v, frac)),
            }
        }
        ErrorCdf { points }
    }

    /// Fraction of errors no larger than `meters`.
    pub fn fraction_within(&self, meters: f64) -> f64 {
        let k = self.points.partition_point(|&(v, _)| v <= meters);
        if k == 0 {
            0.0
        } else {
            self.points[k - 1].1
        }
    }

    /// Observed values merged with [`CDF_GRID`].
    pub fn with_grid(&self) -> Vec<(f64, f64)> {
        let mut xs: Vec<f64> = self.points.iter().map(|p| p.0).chain(CDF_GRID).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs.into_iter().map(|x| (x, self.fraction_within(x))).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "meters,cum_fraction")?;
        for (m, f) in self.with_grid() {
            writeln!(out, "{m},{f}")?;
        }
        Ok(())
    }

    pub fn store(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut out)?;
        out.flush()?;
        Ok(())
    }
}

/// One `metric,stage,param,value` line.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub metric: String,
    pub stage: String,
    pub param: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub rows: Vec<MetricRow>,
}

impl MetricsReport {
    pub fn push(&mut self, metric: &str, stage: &str, param: impl ToString, value: f64) {
        self.rows.push(MetricRow {
            metric: metric.to_string(),
            stage: stage.to_string(),
            param: param.to_string(),
            value,
        });
    }

    pub fn get(&self, metric: &str, stage: &str, param: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.metric == metric && r.stage == stage && r.param == param)
            .map(|r| r.value)
    }

    pub fn extend(&mut self, other: MetricsReport) {
        self.rows.extend(other.rows);
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "metric,stage,param,value")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{}", r.metric, r.stage, r.param, r.value)?;
        }
        Ok(())
    }

    pub fn store(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut out)?;
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unit_step_at_zero() {
        let cdf = ErrorCdf::from_values(&[0.0; 5]);
        assert_eq!(cdf.points, vec![(0.0, 1.0)]);
        assert!(cdf.with_grid().iter().all(|&(_, f)| f == 1.0));
    }

    #[test]
    fn jump_at_single_offset() {
        let cdf = ErrorCdf::from_values(&[0.0, 0.0, 0.0, 500.0]);
        assert_eq!(cdf.fraction_within(0.0), 0.75);
        assert_eq!(cdf.fraction_within(499.9), 0.75);
        assert_eq!(cdf.fraction_within(500.0), 1.0);
        assert_eq!(cdf.fraction_within(-1.0), 0.0);
        let mut buf = Vec::new();
        cdf.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("meters,cum_fraction\n0,0.75\n100,0.75\n"));
        assert!(text.contains("\n500,1\n"));
    }

    #[test]
    fn report_csv() {
        let mut r = MetricsReport::default();
        r.push("accuracy", "full", "", 0.5);
        r.push("uniqueness_top", "truth", 2, 1.0);
        assert_eq!(r.get("uniqueness_top", "truth", "2"), Some(1.0));
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "metric,stage,param,value\naccuracy,full,,0.5\nuniqueness_top,truth,2,1\n"
        );
    }

    proptest! {
        #[test]
        fn cdf_is_monotone_and_ends_at_one(values in proptest::collection::vec(0.0f64..1e4, 1..50)) {
            let cdf = ErrorCdf::from_values(&values);
            let pts = cdf.with_grid();
            prop_assert!(pts.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1));
            prop_assert_eq!(cdf.points.last().unwrap().1, 1.0);
            for &(m, f) in &pts {
                let direct = values.iter().filter(|&&v| v <= m).count() as f64 / values.len() as f64;
                prop_assert!((f - direct).abs() < 1e-12);
            }
        }
    }
}
