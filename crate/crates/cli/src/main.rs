use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use ashen::aggregation::{
    aggregate, discretize, interpolate_set, perturb, rediscretize, store_aggregate, load_aggregate, PerturbConfig,
};
use ashen::evaluation::{evaluate_stage, MetricsReport};
use ashen::experiment::{evaluation_report, run_sweep, write_plot_data, ExperimentConfig, CONFIG_KEYS};
use ashen::mobility::{
    generate_population, load_raw_trajectories, load_tower_map, load_trajectories, store_tower_map,
    store_trajectories, IdStyle, Level,
};
use ashen::recovery::{recover, RecoveredTrajectorySet, Stage};

/// Bad flags or configuration values; exits with status 1.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Parser)]
#[command(name = "ashen", version, about = "Recover individual trajectories from aggregated mobility data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic population and its tower map
    Generate(GenerateArgs),
    /// Turn trajectories into a per-slot aggregate
    Aggregate(AggregateArgs),
    /// Run the attack on an aggregate
    Recover(RecoverArgs),
    /// Score recovered trajectories against ground truth
    Evaluate(EvaluateArgs),
    /// Run the whole pipeline over one factor
    Sweep(SweepArgs),
}

/// Experiment settings: a `key = value` file, then `--set` overrides.
#[derive(Args)]
struct ConfigArgs {
    /// Flat `key = value` configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key (repeatable), e.g. `--set night_end=5`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// List the configuration keys and exit
    #[arg(long)]
    list_keys: bool,
}

impl ConfigArgs {
    fn load(&self, extra: &[(&str, Option<String>)]) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                ExperimentConfig::parse(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
            }
            None => ExperimentConfig::default(),
        };
        for o in &self.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| usage(format!("--set expects KEY=VALUE, got {o:?}")))?;
            cfg.set(k, v).map_err(|e| usage(e.to_string()))?;
        }
        for (k, v) in extra {
            if let Some(v) = v {
                cfg.set(k, v).map_err(|e| usage(e.to_string()))?;
            }
        }
        cfg.validate().map_err(|e| usage(e.to_string()))?;
        Ok(cfg)
    }
}

fn list_keys() {
    for (k, doc) in CONFIG_KEYS {
        println!("{k:<20} {doc}");
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    days: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    towers: Option<usize>,
    /// Trajectory CSV to write
    #[arg(long, default_value = "trajectories.csv")]
    out: PathBuf,
    /// Tower map CSV to write
    #[arg(long, default_value = "towers.csv")]
    towers_out: PathBuf,
}

#[derive(Args)]
struct AggregateArgs {
    /// Trajectory or raw record CSV (`user_id,slot,tower_id`)
    #[arg(long)]
    trajectories: PathBuf,
    /// Tower map CSV
    #[arg(long)]
    towers: PathBuf,
    #[arg(long, default_value_t = 30)]
    slot_minutes: u32,
    /// Publish at a coarser level: sector, base_station or district
    #[arg(long)]
    spatial: Option<String>,
    /// Publish with longer slots, minutes
    #[arg(long)]
    temporal: Option<u32>,
    /// Move each record to a random tower with this probability first
    #[arg(long)]
    perturb: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Aggregate CSV to write; the matching tower map and ground truth go
    /// next to it as `<stem>.towers.csv` and `<stem>.truth.csv`
    #[arg(long, default_value = "aggregate.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct RecoverArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    aggregate: PathBuf,
    #[arg(long)]
    towers: PathBuf,
    #[arg(long, default_value_t = 30)]
    slot_minutes: u32,
    /// Recovered CSV; stage snapshots are written to `<out>.stage1..3`
    #[arg(long, default_value = "recovered.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    recovered: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    towers: PathBuf,
    #[arg(long, default_value_t = 30)]
    slot_minutes: u32,
    /// night, day or full; guessed from a `.stageN` suffix, else full
    #[arg(long)]
    stage: Option<String>,
    /// Directory for metrics.csv and error_cdf.csv
    #[arg(long, default_value = "eval")]
    out: PathBuf,
    /// Also write figure-ready CSVs into `<out>/plots`
    #[arg(long)]
    plot_data: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// none, users, spatial, temporal or perturb
    #[arg(long)]
    axis: Option<String>,
    /// Comma separated values along the axis
    #[arg(long)]
    values: Option<String>,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `output`)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write figure-ready CSVs of the base population
    #[arg(long)]
    plot_data: bool,
}

fn opt<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(ToString::to_string)
}

fn reading(path: &Path) -> String {
    format!("reading {}", path.display())
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn sibling(path: &Path, tail: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{tail}"))
}

fn slot_seconds(minutes: u32) -> Result<u32> {
    match minutes.checked_mul(60) {
        Some(s) if s > 0 && 86_400 % s == 0 => Ok(s),
        _ => Err(usage(format!("--slot-minutes {minutes} does not divide a day"))),
    }
}

fn generate(args: &GenerateArgs) -> Result<()> {
    let cfg = args.config.load(&[
        ("users", opt(&args.users)),
        ("days", opt(&args.days)),
        ("seed", opt(&args.seed)),
        ("towers", opt(&args.towers)),
    ])?;
    let set = generate_population(&cfg.generator)?;
    create_parent(&args.out)?;
    create_parent(&args.towers_out)?;
    store_trajectories(&set, IdStyle::Plain, &args.out)?;
    store_tower_map(&set.tower_map, &args.towers_out)?;
    println!(
        "users {} slots {} towers {}",
        set.len(),
        set.grid.total_slots(),
        set.tower_map.len()
    );
    Ok(())
}

fn aggregate_cmd(args: &AggregateArgs) -> Result<()> {
    let level: Option<Level> = match &args.spatial {
        Some(s) => Some(s.parse().map_err(|e: ashen::Error| usage(e.to_string()))?),
        None => None,
    };
    if let Some(p) = args.perturb {
        if !(0.0..=1.0).contains(&p) {
            return Err(usage(format!("--perturb {p} is not a probability")));
        }
    }
    let slot = slot_seconds(args.slot_minutes)?;
    let map = load_tower_map(&args.towers).with_context(|| reading(&args.towers))?;
    let raw = load_raw_trajectories(&args.trajectories, map, slot).with_context(|| reading(&args.trajectories))?;
    let mut truth = interpolate_set(&discretize(&raw))?;
    let mut published = match args.perturb {
        Some(p) if p > 0.0 => perturb(&truth, &PerturbConfig { probability: p, seed: args.seed })?,
        _ => truth.clone(),
    };
    if let Some(minutes) = args.temporal {
        let target = slot_seconds(minutes)?;
        if target % slot != 0 {
            return Err(usage(format!("--temporal {minutes} is not a multiple of the slot length")));
        }
        let factor = (target / slot) as usize;
        truth = rediscretize(&truth, factor).map_err(|e| usage(e.to_string()))?;
        published = rediscretize(&published, factor)?;
    }
    if let Some(level) = level {
        truth = truth.coarsen_spatial(level);
        published = published.coarsen_spatial(level);
    }
    let agg = aggregate(&published)?;
    create_parent(&args.out)?;
    store_aggregate(&agg, &args.out)?;
    store_tower_map(&truth.tower_map, sibling(&args.out, ".towers.csv"))?;
    store_trajectories(&truth, IdStyle::Plain, sibling(&args.out, ".truth.csv"))?;
    println!(
        "users {} slots {} slot_minutes {} locations {}",
        agg.population(),
        agg.grid.total_slots(),
        agg.grid.slot_seconds() / 60,
        agg.tower_map.len()
    );
    Ok(())
}

fn recover_cmd(args: &RecoverArgs) -> Result<()> {
    let cfg = args.config.load(&[])?;
    let slot = slot_seconds(args.slot_minutes)?;
    let map = load_tower_map(&args.towers).with_context(|| reading(&args.towers))?;
    let agg = load_aggregate(&args.aggregate, map, slot).with_context(|| reading(&args.aggregate))?;
    let rec = recover(&agg, &cfg.recovery)?;
    create_parent(&args.out)?;
    for stage in Stage::ALL {
        let snapshot = rec.stage(stage);
        let path = with_suffix(&args.out, &format!(".stage{}", stage.number()));
        store_trajectories(&as_set(snapshot)?, IdStyle::Recovered, &path)?;
    }
    store_trajectories(&as_set(&rec.full)?, IdStyle::Recovered, &args.out)?;
    println!("recovered {} trajectories over {} slots", rec.full.len(), agg.grid.total_slots());
    Ok(())
}

fn as_set(rec: &RecoveredTrajectorySet) -> Result<ashen::mobility::TrajectorySet> {
    Ok(ashen::mobility::TrajectorySet::new(
        rec.grid,
        rec.tower_map.clone(),
        rec.trajectories.clone(),
    )?)
}

fn stage_of(path: &Path, flag: &Option<String>) -> Result<Stage> {
    if let Some(s) = flag {
        return s.parse().map_err(|_| usage(format!("unknown stage {s:?}")));
    }
    let name = path.to_string_lossy();
    Ok(Stage::ALL
        .into_iter()
        .find(|s| name.ends_with(&format!(".stage{}", s.number())))
        .unwrap_or(Stage::Full))
}

fn evaluate_cmd(args: &EvaluateArgs) -> Result<()> {
    let cfg = args.config.load(&[])?;
    let stage = stage_of(&args.recovered, &args.stage)?;
    let slot = slot_seconds(args.slot_minutes)?;
    let map = load_tower_map(&args.towers).with_context(|| reading(&args.towers))?;
    let truth = load_trajectories(&args.truth, map.clone(), slot).with_context(|| reading(&args.truth))?;
    let recovered = load_trajectories(&args.recovered, map, slot).with_context(|| reading(&args.recovered))?;
    let rec = RecoveredTrajectorySet {
        grid: recovered.grid,
        tower_map: recovered.tower_map,
        stage,
        night_window: cfg.recovery.night_window,
        trajectories: recovered.trajectories,
    };
    let eval = evaluate_stage(&rec, &truth)?;
    let report: MetricsReport = evaluation_report(&truth, std::slice::from_ref(&eval), cfg.max_k, cfg.seed)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    report.store(args.out.join("metrics.csv"))?;
    eval.error_cdf().store(args.out.join("error_cdf.csv"))?;
    if args.plot_data {
        write_plot_data(
            &args.out.join("plots"),
            &truth,
            std::slice::from_ref(&eval),
            cfg.recovery.night_window,
            cfg.max_k,
            cfg.seed,
        )?;
    }
    println!("stage {} accuracy {:.4}", stage, eval.accuracy);
    Ok(())
}

fn sweep_cmd(args: &SweepArgs) -> Result<()> {
    let mut cfg = args.config.load(&[("users", opt(&args.users)), ("seed", opt(&args.seed))])?;
    if let Some(axis) = &args.axis {
        cfg.set("sweep", axis).map_err(|e| usage(e.to_string()))?;
    }
    if let Some(values) = &args.values {
        cfg.set("sweep_values", values).map_err(|e| usage(e.to_string()))?;
    }
    if let Some(out) = &args.out {
        cfg.output = out.clone();
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let result = run_sweep(&cfg)?;
    let dir = &cfg.output;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    std::fs::write(dir.join("config.txt"), cfg.to_text())?;
    for p in &result.points {
        let name = format!("{}_{}", result.axis, p.label);
        let point_dir = dir.join(name);
        std::fs::create_dir_all(&point_dir)?;
        p.report.store(point_dir.join("metrics.csv"))?;
    }
    result.summary.store(dir.join("summary.csv"))?;
    if args.plot_data {
        let truth = generate_population(&cfg.generator)?;
        let run = ashen::experiment::run_pipeline(&truth, &truth, &cfg.recovery, cfg.max_k, cfg.seed)?;
        write_plot_data(
            &dir.join("plots"),
            &truth,
            &run.evaluations,
            cfg.recovery.night_window,
            cfg.max_k,
            cfg.seed,
        )?;
    }
    for r in &result.summary.rows {
        if r.metric == "accuracy" && r.stage == Stage::Full.name() {
            println!("{} {} accuracy {:.4}", result.axis, r.param, r.value);
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.command {
        Command::Generate(a) => &a.config,
        Command::Recover(a) => &a.config,
        Command::Evaluate(a) => &a.config,
        Command::Sweep(a) => &a.config,
        Command::Aggregate(a) => return aggregate_cmd(a),
    };
    if config.list_keys {
        list_keys();
        return Ok(());
    }
    match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Recover(a) => recover_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Aggregate(_) => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
