use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ashen-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn ashen(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ashen"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = ashen(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn generate(dir: &Path, users: &str, days: &str) {
    ok(dir, &["generate", "--users", users, "--days", days, "--seed", "1", "--out", "t.csv", "--towers-out", "m.csv"]);
}

#[test]
fn generate_writes_one_row_per_user_and_slot() {
    let dir = scratch("generate");
    let stdout = ok(&dir, &["generate", "--users", "100", "--days", "7", "--seed", "1"]);
    assert!(stdout.contains("users 100 slots 336"), "{stdout}");
    let rows = read(&dir, "trajectories.csv").lines().count();
    assert_eq!(rows, 1 + 100 * 336);
    let first = read(&dir, "trajectories.csv");
    ok(&dir, &["generate", "--users", "100", "--days", "7", "--seed", "1"]);
    assert_eq!(first, read(&dir, "trajectories.csv"));
    assert!(read(&dir, "towers.csv").starts_with("tower_id,x_m,y_m,base_station_id,district_id\n"));
}

#[test]
fn usage_and_data_errors_have_distinct_codes() {
    let dir = scratch("codes");
    assert_eq!(ashen(&dir, &["generate", "--users", "0"]).status.code(), Some(1));
    assert_eq!(ashen(&dir, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(ashen(&dir, &["sweep", "--axis", "sideways"]).status.code(), Some(1));
    assert_eq!(ashen(&dir, &["generate", "--set", "colour=red"]).status.code(), Some(1));
    let missing = ashen(&dir, &["recover", "--aggregate", "none.csv", "--towers", "none.csv"]);
    assert_eq!(missing.status.code(), Some(2));
    std::fs::write(dir.join("bad.csv"), "tower_id,x_m\n1,2\n").unwrap();
    let bad = ashen(&dir, &["recover", "--aggregate", "none.csv", "--towers", "bad.csv"]);
    assert_eq!(bad.status.code(), Some(2));
    assert_eq!(ashen(&dir, &["--help"]).status.code(), Some(0));
}

fn slot_sums(text: &str) -> BTreeMap<usize, u32> {
    let mut sums = BTreeMap::new();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        *sums.entry(f[0].parse().unwrap()).or_insert(0) += f[2].parse::<u32>().unwrap();
    }
    sums
}

#[test]
fn aggregate_conserves_users_and_honours_flags() {
    let dir = scratch("aggregate");
    generate(&dir, "30", "1");
    ok(&dir, &["aggregate", "--trajectories", "t.csv", "--towers", "m.csv", "--out", "a.csv"]);
    let sums = slot_sums(&read(&dir, "a.csv"));
    assert_eq!(sums.len(), 48);
    assert!(sums.values().all(|&s| s == 30));

    ok(&dir, &["aggregate", "--trajectories", "t.csv", "--towers", "m.csv", "--perturb", "0.0", "--out", "p.csv"]);
    assert_eq!(read(&dir, "a.csv"), read(&dir, "p.csv"));

    ok(&dir, &["aggregate", "--trajectories", "t.csv", "--towers", "m.csv", "--spatial", "district", "--out", "d.csv"]);
    let districts: Vec<String> = read(&dir, "d.towers.csv")
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().to_string())
        .collect();
    assert!(districts.len() <= 16);
    for line in read(&dir, "d.csv").lines().skip(1) {
        let id = line.split(',').nth(1).unwrap();
        assert!(districts.iter().any(|d| d == id), "{id}");
    }

    ok(&dir, &["aggregate", "--trajectories", "t.csv", "--towers", "m.csv", "--temporal", "120", "--out", "h.csv"]);
    assert_eq!(slot_sums(&read(&dir, "h.csv")).len(), 12);
    assert_eq!(ashen(&dir, &["aggregate", "--trajectories", "t.csv", "--towers", "m.csv", "--spatial", "county"]).status.code(), Some(1));
}

#[test]
fn single_user_round_trip() {
    let dir = scratch("single");
    generate(&dir, "1", "2");
    ok(&dir, &["aggregate", "--trajectories", "t.csv", "--towers", "m.csv", "--out", "a.csv"]);
    ok(&dir, &["recover", "--aggregate", "a.csv", "--towers", "a.towers.csv", "--out", "r.csv"]);
    for n in 1..=3 {
        assert!(dir.join(format!("r.csv.stage{n}")).exists());
    }
    let truth: Vec<String> = read(&dir, "a.truth.csv").lines().skip(1).map(|l| format!("r{l}")).collect();
    let rec: Vec<String> = read(&dir, "r.csv").lines().skip(1).map(String::from).collect();
    assert_eq!(rec, truth);
    let out = ok(&dir, &["evaluate", "--recovered", "r.csv", "--truth", "a.truth.csv", "--towers", "a.towers.csv", "--out", "ev"]);
    assert!(out.contains("accuracy 1.0000"), "{out}");
    assert!(read(&dir, "ev/metrics.csv").contains("accuracy,full,,1\n"));
    assert!(read(&dir, "ev/error_cdf.csv").starts_with("meters,cum_fraction\n0,1\n"));
}

#[test]
fn recovery_is_repeatable_and_stages_evaluate() {
    let dir = scratch("repeat");
    generate(&dir, "40", "2");
    ok(&dir, &["aggregate", "--trajectories", "t.csv", "--towers", "m.csv", "--out", "a.csv"]);
    ok(&dir, &["recover", "--aggregate", "a.csv", "--towers", "m.csv", "--out", "r1.csv"]);
    ok(&dir, &["recover", "--aggregate", "a.csv", "--towers", "m.csv", "--out", "r2.csv"]);
    for suffix in ["", ".stage1", ".stage2", ".stage3"] {
        assert_eq!(read(&dir, &format!("r1.csv{suffix}")), read(&dir, &format!("r2.csv{suffix}")));
    }
    let out = ok(
        &dir,
        &["evaluate", "--recovered", "r1.csv.stage1", "--truth", "a.truth.csv", "--towers", "m.csv", "--out", "ev", "--plot-data"],
    );
    assert!(out.starts_with("stage night accuracy 1.0000"), "{out}");
    for f in ["accuracy.csv", "uniqueness.csv", "velocity_error.csv", "info_gain.csv"] {
        assert!(dir.join("ev/plots").join(f).exists(), "{f}");
    }
}

#[test]
fn sweep_writes_summary_and_points() {
    let dir = scratch("sweep");
    std::fs::write(dir.join("exp.cfg"), "users = 30\ndays = 2\nmax_k = 2\n").unwrap();
    let out = ok(&dir, &["sweep", "--config", "exp.cfg", "--axis", "users", "--values", "10,30", "--out", "sw"]);
    assert_eq!(out.lines().count(), 2, "{out}");
    let summary = read(&dir, "sw/summary.csv");
    assert!(summary.starts_with("metric,stage,param,value\n"));
    assert!(summary.contains("accuracy,full,10,"));
    assert!(dir.join("sw/users_30/metrics.csv").exists());
    assert!(read(&dir, "sw/config.txt").contains("sweep_values = 10,30"));
}
