//! End-to-end tests of the `edgesplit` binary: exit codes, output formats,
//! determinism, and the documented behavior of each subcommand.

use serde_json::Value;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_edgesplit")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("utf-8 stdout")
}

fn stderr(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).expect("utf-8 stderr")
}

struct TempDir(PathBuf);

impl TempDir {
    fn new(name: &str) -> Self {
        let dir = std::env::temp_dir().join(format!("edgesplit-cli-{name}-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        TempDir(dir)
    }

    fn path(&self, file: &str) -> PathBuf {
        self.0.join(file)
    }
}

impl Drop for TempDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn gen_fleet(dir: &TempDir, name: &str, extra: &[&str]) -> PathBuf {
    let path = dir.path(name);
    let path_str = path.to_str().unwrap().to_string();
    let mut args = vec!["gen-profiles", "--out", &path_str];
    args.extend_from_slice(extra);
    let out = run(&args);
    assert!(out.status.success(), "gen-profiles failed: {}", stderr(&out));
    path
}

fn json_run(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "command failed: {}", stderr(&out));
    serde_json::from_str(&stdout(&out)).expect("valid json output")
}

#[test]
fn gen_profiles_is_deterministic_per_seed() {
    let dir = TempDir::new("gen-det");
    let a = gen_fleet(&dir, "a.json", &["--devices", "4", "--seed", "7"]);
    let b = gen_fleet(&dir, "b.json", &["--devices", "4", "--seed", "7"]);
    let c = gen_fleet(&dir, "c.json", &["--devices", "4", "--seed", "8"]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn gen_profiles_prints_summary() {
    let dir = TempDir::new("gen-summary");
    let path = dir.path("fleet.json");
    let out = run(&[
        "gen-profiles",
        "--devices",
        "8",
        "--classes",
        "1,3,5,12",
        "--seed",
        "7",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("M=8 devices"), "{text}");
    assert!(text.contains("N=8 cuts"), "{text}");
}

#[test]
fn gen_profiles_rejects_zero_devices() {
    let dir = TempDir::new("gen-zero");
    let path = dir.path("fleet.json");
    let out = run(&["gen-profiles", "--devices", "0", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn optimize_single_device_takes_full_budget_with_zero_gap() {
    let dir = TempDir::new("opt-single");
    let fleet = gen_fleet(&dir, "one.json", &["--devices", "1", "--classes", "1", "--cuts", "5"]);
    let report = json_run(&["optimize", "--fleet", fleet.to_str().unwrap(), "--oracle", "--format", "json"]);
    let budget = 30_000_000.0;
    let share = report["schedule"]["bandwidth_bps"][0].as_f64().unwrap();
    assert!((share - budget).abs() <= 1e-6 * budget, "share {share}");
    let gap = report["oracle"]["relative_gap"].as_f64().unwrap();
    assert!(gap.abs() <= 1e-9, "gap {gap}");
    assert_eq!(report["schedule"]["cuts"], report["oracle"]["cuts"]);
}

#[test]
fn optimize_homogeneous_fleet_is_symmetric() {
    let dir = TempDir::new("opt-homog");
    let fleet = gen_fleet(&dir, "homog.json", &["--devices", "4", "--classes", "2", "--cuts", "4"]);
    let report = json_run(&["optimize", "--fleet", fleet.to_str().unwrap(), "--format", "json"]);
    let cuts = report["schedule"]["cuts"].as_array().unwrap();
    assert!(cuts.iter().all(|c| c == &cuts[0]));
    let shares = report["schedule"]["bandwidth_bps"].as_array().unwrap();
    let first = shares[0].as_f64().unwrap();
    for s in shares {
        assert!((s.as_f64().unwrap() - first).abs() <= 1e-6 * first);
    }
}

#[test]
fn optimize_reports_oracle_cap_on_large_instances() {
    let dir = TempDir::new("opt-cap");
    let fleet = gen_fleet(&dir, "big.json", &["--devices", "8", "--cuts", "8"]);
    let out = run(&["optimize", "--fleet", fleet.to_str().unwrap(), "--oracle"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("cap 1000000"), "{}", stderr(&out));
}

#[test]
fn optimize_prints_trace_and_devices_in_table_format() {
    let dir = TempDir::new("opt-table");
    let fleet = gen_fleet(&dir, "fleet.json", &["--devices", "4"]);
    let out = run(&["optimize", "--fleet", fleet.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("objective_s:"), "{text}");
    assert!(text.contains("trace:"), "{text}");
    assert!(text.contains("dev0"), "{text}");
}

#[test]
fn simulate_fedavg_finishes_simultaneously_on_homogeneous_fleet() {
    let dir = TempDir::new("sim-homog");
    let fleet = gen_fleet(&dir, "homog.json", &["--devices", "4", "--classes", "3"]);
    let timeline = json_run(&[
        "simulate",
        "--fleet",
        fleet.to_str().unwrap(),
        "--strategy",
        "fedavg",
        "--format",
        "json",
    ]);
    let devices = timeline["devices"].as_array().unwrap();
    let first = devices[0]["completion_s"].as_f64().unwrap();
    for dev in devices {
        let completion = dev["completion_s"].as_f64().unwrap();
        assert!((completion - first).abs() <= 1e-9 * first);
    }
}

#[test]
fn simulate_edgesplit_beats_fedavg() {
    let dir = TempDir::new("sim-dominance");
    let fleet = gen_fleet(&dir, "fleet.json", &["--devices", "8"]);
    let fleet_path = fleet.to_str().unwrap();
    let edgesplit = json_run(&["simulate", "--fleet", fleet_path, "--strategy", "edgesplit", "--format", "json"]);
    let fedavg = json_run(&["simulate", "--fleet", fleet_path, "--strategy", "fedavg", "--format", "json"]);
    let es = edgesplit["makespan_s"].as_f64().unwrap();
    let fa = fedavg["makespan_s"].as_f64().unwrap();
    assert!(es <= fa, "edgesplit {es} vs fedavg {fa}");
}

#[test]
fn simulate_events_follow_round_protocol_order() {
    let dir = TempDir::new("sim-events");
    let fleet = gen_fleet(&dir, "fleet.json", &["--devices", "2", "--batches", "2"]);
    let timeline = json_run(&[
        "simulate",
        "--fleet",
        fleet.to_str().unwrap(),
        "--strategy",
        "splitfed",
        "--format",
        "json",
    ]);
    let batch_cycle = [
        "local-forward",
        "activation-upload",
        "server-compute",
        "gradient-download",
        "local-backward",
    ];
    for dev in timeline["devices"].as_array().unwrap() {
        let events = dev["events"].as_array().unwrap();
        // Two batch cycles then the weight sync.
        assert_eq!(events.len(), 2 * batch_cycle.len() + 2);
        for (i, ev) in events.iter().enumerate() {
            let kind = ev["kind"].as_str().unwrap();
            let expected = if i < 2 * batch_cycle.len() {
                batch_cycle[i % batch_cycle.len()]
            } else if i == 2 * batch_cycle.len() {
                "weight-upload"
            } else {
                "weight-download"
            };
            assert_eq!(kind, expected, "event {i}");
            assert!(ev["start_s"].as_f64().unwrap() <= ev["end_s"].as_f64().unwrap());
        }
        for pair in events.windows(2) {
            assert!(pair[0]["end_s"].as_f64().unwrap() <= pair[1]["start_s"].as_f64().unwrap() + 1e-12);
        }
    }

    // The human-readable event log is also available.
    let out = run(&[
        "simulate",
        "--fleet",
        fleet.to_str().unwrap(),
        "--strategy",
        "splitfed",
        "--events",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("local-forward"));
}

#[test]
fn compare_table_mirrors_expected_ordering() {
    let dir = TempDir::new("cmp-table");
    let fleet = gen_fleet(&dir, "fleet.json", &["--devices", "8", "--classes", "1,3,5,12", "--seed", "3"]);
    let report = json_run(&["compare", "--fleet", fleet.to_str().unwrap(), "--format", "json"]);
    let runs = report["runs"].as_array().unwrap();
    let makespan = |name: &str| -> f64 {
        runs.iter()
            .find(|r| r["strategy"] == name)
            .unwrap()["mean_makespan_s"]
            .as_f64()
            .unwrap()
    };
    assert!(makespan("edgesplit") <= makespan("splitfed"));
    assert!(makespan("adaptive-fl") <= makespan("fedavg"));
    let accel = runs
        .iter()
        .find(|r| r["strategy"] == "fedavg")
        .unwrap()["acceleration_vs_fedavg"]
        .as_f64()
        .unwrap();
    assert!((accel - 1.0).abs() <= 1e-12);
}

#[test]
fn compare_csv_round_trips_against_json() {
    let dir = TempDir::new("cmp-csv");
    let fleet = gen_fleet(&dir, "fleet.json", &["--devices", "4", "--seed", "9"]);
    let fleet_path = fleet.to_str().unwrap();
    let json = json_run(&["compare", "--fleet", fleet_path, "--rounds", "2", "--format", "json"]);
    let out = run(&["compare", "--fleet", fleet_path, "--rounds", "2", "--format", "csv"]);
    assert!(out.status.success());
    let csv = stdout(&out);
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "strategy,round,makespan_s,acceleration_vs_fedavg,cuts,bandwidth_bps"
    );
    let runs = json["runs"].as_array().unwrap();
    let mut rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), runs.len() * 2);
    rows.reverse();
    for run in runs {
        for round in 1..=2u64 {
            let row = rows.pop().unwrap();
            let fields: Vec<&str> = row.split(',').collect();
            assert_eq!(fields[0], run["strategy"].as_str().unwrap());
            assert_eq!(fields[1].parse::<u64>().unwrap(), round);
            // Numeric fields parse back to the exact serialized values.
            let makespan: f64 = fields[2].parse().unwrap();
            assert_eq!(
                makespan,
                run["round_makespans_s"][(round - 1) as usize].as_f64().unwrap()
            );
            let accel: f64 = fields[3].parse().unwrap();
            assert_eq!(accel, run["acceleration_vs_fedavg"].as_f64().unwrap());
            let cuts: Vec<u64> = fields[4].split(';').map(|v| v.parse().unwrap()).collect();
            let json_cuts: Vec<u64> = run["cuts"]
                .as_array()
                .unwrap()
                .iter()
                .map(|v| v.as_u64().unwrap())
                .collect();
            assert_eq!(cuts, json_cuts);
            let shares: Vec<f64> = fields[5].split(';').map(|v| v.parse().unwrap()).collect();
            let json_shares: Vec<f64> = run["bandwidth_bps"]
                .as_array()
                .unwrap()
                .iter()
                .map(|v| v.as_f64().unwrap())
                .collect();
            assert_eq!(shares, json_shares);
        }
    }
}

#[test]
fn reports_are_deterministic() {
    let dir = TempDir::new("cmp-det");
    let fleet = gen_fleet(&dir, "fleet.json", &["--devices", "4", "--seed", "5"]);
    let fleet_path = fleet.to_str().unwrap();
    let a = run(&["compare", "--fleet", fleet_path, "--format", "csv"]);
    let b = run(&["compare", "--fleet", fleet_path, "--format", "csv"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn out_flag_writes_file(){
    let dir = TempDir::new("out-flag");
    let fleet = gen_fleet(&dir, "fleet.json", &["--devices", "2"]);
    let report_path = dir.path("report.csv");
    let out = run(&[
        "compare",
        "--fleet",
        fleet.to_str().unwrap(),
        "--format",
        "csv",
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&report_path).unwrap();
    assert!(text.starts_with("strategy,round,"));
}

#[test]
fn invalid_input_exits_with_code_3() {
    let dir = TempDir::new("bad-input");
    let garbled = dir.path("garbled.json");
    std::fs::write(&garbled, "{ not json").unwrap();
    let out = run(&["optimize", "--fleet", garbled.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));

    let missing = dir.path("missing.json");
    let out = run(&["optimize", "--fleet", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));

    // Structurally valid JSON that violates an invariant.
    let invalid = dir.path("invalid.json");
    let fleet = gen_fleet(&dir, "ok.json", &["--devices", "2"]);
    let mut value: Value = serde_json::from_str(&std::fs::read_to_string(&fleet).unwrap()).unwrap();
    value["model"]["cum_param_bits"] = serde_json::json!([5, 3, 2, 1, 1, 1, 1, 1]);
    std::fs::write(&invalid, serde_json::to_string(&value).unwrap()).unwrap();
    let out = run(&["simulate", "--fleet", invalid.to_str().unwrap(), "--strategy", "fedavg"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("cum_param_bits"), "{}", stderr(&out));
}

#[test]
fn bad_overrides_exit_with_code_2() {
    let dir = TempDir::new("bad-override");
    let fleet = gen_fleet(&dir, "fleet.json", &["--devices", "2"]);
    let out = run(&["optimize", "--fleet", fleet.to_str().unwrap(), "--bandwidth-bps", "-5"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    let out = run(&["compare", "--fleet", fleet.to_str().unwrap(), "--rounds", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_subcommand_is_a_usage_error() {
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gen_profiles_accepts_spec_file() {
    let dir = TempDir::new("gen-spec");
    let spec_path = dir.path("spec.json");
    std::fs::write(
        &spec_path,
        serde_json::json!({
            "name": "from-file",
            "num_cuts": 3,
            "slowdowns": [1.0, 2.0],
            "base_fwd_unit_s": 0.01,
            "base_bwd_unit_s": 0.02,
            "server_speedup": 5.0,
            "activation_bits_range": [1000, 2000],
            "layer_param_bits_range": [1000, 2000],
            "total_bandwidth_bps": 1e6,
            "batches_per_round": 2,
        })
        .to_string(),
    )
    .unwrap();
    let fleet_path = dir.path("fleet.json");
    let out = run(&[
        "gen-profiles",
        "--spec",
        spec_path.to_str().unwrap(),
        "--seed",
        "4",
        "--out",
        fleet_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("M=2 devices"));
    let fleet: Value = serde_json::from_str(&std::fs::read_to_string(&fleet_path).unwrap()).unwrap();
    assert_eq!(fleet["model"]["name"], "from-file");
    assert_eq!(fleet["model"]["num_cuts"], 3);
}
