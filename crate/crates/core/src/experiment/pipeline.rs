use crate::aggregation::{aggregate, perturb, rediscretize, AggregateSeries, PerturbConfig};
use crate::error::Result;
use crate::evaluation::{evaluate_stage, median, uniqueness, MetricsReport, StageEvaluation, Strategy, CDF_GRID};
use crate::mobility::{generate_population, TrajectorySet};
use crate::recovery::{recover, Recovery, RecoveryConfig, Stage};

use super::{ExperimentConfig, SweepAxis};

/// Everything produced by one attack on one published series.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    /// Ground truth the recovery is scored against.
    pub truth: TrajectorySet,
    pub aggregate: AggregateSeries,
    pub recovery: Recovery,
    /// One entry per stage, night first.
    pub evaluations: Vec<StageEvaluation>,
    pub report: MetricsReport,
}

/// Recovers `published` and scores every stage against `truth`.
///
/// `truth` and `published` share grid and tower map; they differ only when
/// records were perturbed before publication.
pub fn run_pipeline(
    truth: &TrajectorySet,
    published: &TrajectorySet,
    cfg: &RecoveryConfig,
    max_k: usize,
    seed: u64,
) -> Result<PipelineRun> {
    let agg = aggregate(published)?;
    let recovery = recover(&agg, cfg)?;
    let evaluations = Stage::ALL
        .iter()
        .map(|&s| evaluate_stage(recovery.stage(s), truth))
        .collect::<Result<Vec<_>>>()?;
    let mut report = evaluation_report(truth, &evaluations, max_k, seed)?;
    for stage in Stage::ALL {
        let ok = recovery.stage(stage).is_repartition_of(&agg);
        report.push("repartition", stage.name(), "", f64::from(u8::from(ok)));
    }
    for k in 1..=max_k {
        let top = uniqueness(&recovery.full.trajectories, k, Strategy::TopK, seed)?;
        report.push("uniqueness_top", Stage::Full.name(), k, top);
    }
    Ok(PipelineRun {
        truth: truth.clone(),
        aggregate: agg,
        recovery,
        evaluations,
        report,
    })
}

/// Accuracy and error quantiles of every evaluated stage, plus the
/// uniqueness of `truth` for K up to `max_k` under every strategy.
pub fn evaluation_report(
    truth: &TrajectorySet,
    evaluations: &[StageEvaluation],
    max_k: usize,
    seed: u64,
) -> Result<MetricsReport> {
    let mut report = MetricsReport::default();
    report.push("users", "", "", truth.len() as f64);
    for eval in evaluations {
        let name = eval.stage.name();
        report.push("accuracy", name, "", eval.accuracy);
        let cdf = eval.error_cdf();
        for m in CDF_GRID {
            report.push("error_within", name, m, cdf.fraction_within(m));
        }
        report.push("error_median", name, "", median(&eval.errors).unwrap_or(0.0));
    }
    for k in 1..=max_k {
        for s in Strategy::ALL {
            let metric = format!("uniqueness_{}", s.name());
            report.push(&metric, "truth", k, uniqueness(&truth.trajectories, k, s, seed)?);
        }
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub label: String,
    pub report: MetricsReport,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub axis: String,
    pub points: Vec<SweepPoint>,
    /// `accuracy` per stage and `uniqueness_top` at K=2, one row per point,
    /// `param` holding the point label.
    pub summary: MetricsReport,
}

impl SweepResult {
    pub fn accuracy(&self, stage: Stage) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| p.report.get("accuracy", stage.name(), "").unwrap_or(f64::NAN))
            .collect()
    }
}

const DOMAIN_PERTURB_SEED: u64 = 0x9e37_79b9;

/// Runs the pipeline at every point of the configured axis.
///
/// One base population is generated (with the largest user count for a user
/// sweep, whose smaller points are prefixes of it) and every point derives
/// its input from that population. Points run in parallel.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let mut gen = cfg.generator.clone();
    if let SweepAxis::Users(v) = &cfg.sweep {
        gen.num_users = v.iter().copied().max().unwrap_or(gen.num_users);
    }
    let base = generate_population(&gen)?;
    let labels = cfg.sweep.labels();
    let point = |i: usize| -> Result<SweepPoint> {
        let (truth, published) = match &cfg.sweep {
            SweepAxis::None => (base.clone(), base.clone()),
            SweepAxis::Users(v) => {
                let t = base.take_users(v[i]);
                (t.clone(), t)
            }
            SweepAxis::Spatial(v) => {
                let t = base.coarsen_spatial(v[i]);
                (t.clone(), t)
            }
            SweepAxis::Temporal(v) => {
                let factor = (v[i] * 60 / base.grid.slot_seconds()) as usize;
                let t = rediscretize(&base, factor)?;
                (t.clone(), t)
            }
            SweepAxis::Perturb(v) => {
                let p = PerturbConfig {
                    probability: v[i],
                    seed: cfg.seed ^ DOMAIN_PERTURB_SEED,
                };
                (base.clone(), perturb(&base, &p)?)
            }
        };
        let run = run_pipeline(&truth, &published, &cfg.recovery, cfg.max_k, cfg.seed)?;
        Ok(SweepPoint {
            label: labels[i].clone(),
            report: run.report,
        })
    };
    #[cfg(feature = "parallel")]
    let points: Vec<SweepPoint> = {
        use rayon::prelude::*;
        (0..labels.len()).into_par_iter().map(point).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let points: Vec<SweepPoint> = (0..labels.len()).map(point).collect::<Result<_>>()?;

    let mut summary = MetricsReport::default();
    for p in &points {
        for stage in Stage::ALL {
            if let Some(a) = p.report.get("accuracy", stage.name(), "") {
                summary.push("accuracy", stage.name(), &p.label, a);
            }
        }
        if let Some(u) = p.report.get("uniqueness_top", "truth", "2") {
            summary.push("uniqueness_top2", "truth", &p.label, u);
        }
    }
    Ok(SweepResult {
        axis: cfg.sweep.name().to_string(),
        points,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::separable_population;
    use crate::mobility::GeneratorConfig;

    fn small(sweep: SweepAxis) -> ExperimentConfig {
        ExperimentConfig {
            generator: GeneratorConfig {
                num_users: 30,
                num_days: 2,
                ..Default::default()
            },
            sweep,
            max_k: 2,
            ..Default::default()
        }
    }

    #[test]
    fn separable_run_is_perfect() {
        let truth = separable_population(20, 2).unwrap();
        let run = run_pipeline(&truth, &truth, &RecoveryConfig::default(), 2, 1).unwrap();
        for stage in Stage::ALL {
            assert_eq!(run.report.get("accuracy", stage.name(), ""), Some(1.0));
            assert_eq!(run.report.get("error_within", stage.name(), "0"), Some(1.0));
            assert_eq!(run.report.get("repartition", stage.name(), ""), Some(1.0));
        }
    }

    #[test]
    fn sweep_points_follow_the_axis() {
        let r = run_sweep(&small(SweepAxis::Users(vec![10, 30]))).unwrap();
        assert_eq!(r.points.len(), 2);
        assert_eq!(r.points[0].report.get("users", "", ""), Some(10.0));
        assert_eq!(r.summary.rows.len(), 2 * 4);

        let r = run_sweep(&small(SweepAxis::Temporal(vec![30, 120]))).unwrap();
        assert_eq!(r.points[1].label, "120");
        for p in &r.points {
            assert_eq!(p.report.get("repartition", "full", ""), Some(1.0));
        }
    }

    #[test]
    fn zero_perturbation_matches_the_plain_run() {
        let r = run_sweep(&small(SweepAxis::Perturb(vec![0.0]))).unwrap();
        let plain = run_sweep(&small(SweepAxis::None)).unwrap();
        assert_eq!(r.points[0].report, plain.points[0].report);
    }

    #[test]
    fn sweeps_are_deterministic() {
        let cfg = small(SweepAxis::Spatial(crate::mobility::Level::ALL.to_vec()));
        let a = run_sweep(&cfg).unwrap();
        let b = run_sweep(&cfg).unwrap();
        assert_eq!(a.summary, b.summary);
    }
}
