use std::fs;
use std::process::{Command, Output};

use qudistill_cli::Table;

fn qudistill(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qudistill"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn table(args: &[&str]) -> Table {
    let out = qudistill(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    Table::parse(&String::from_utf8(out.stdout).unwrap()).unwrap()
}

#[test]
fn totient_verify_passes() {
    let t = table(&["totient", "--nmax", "3", "--dmax", "12", "--verify"]);
    assert_eq!(t.rows.len(), 33);
    let status = t.column("status").unwrap();
    assert!(t.rows.iter().all(|r| r[status] == "PASS"));
    assert_eq!(t.get_meta("command").unwrap(), "totient");
}

#[test]
fn group_order_and_enumeration_agree() {
    let t = table(&["group", "verify", "--D", "3", "--n", "2", "--format", "json"]);
    assert_eq!(t.rows[0][t.column("enumerated").unwrap()], 51840);
    assert_eq!(t.rows[0][t.column("status").unwrap()], "PASS");
    let e = table(&["group", "enumerate", "--D", "2", "--n", "1", "--limit", "100"]);
    assert_eq!(e.rows.len(), 6);
}

#[test]
fn outputs_carry_metadata() {
    let t = table(&["eta", "--dmax", "3", "--seed", "9"]);
    for key in ["tool", "command", "seed", "criteria", "dmax", "wall_time_s"] {
        assert!(t.get_meta(key).is_some(), "missing {key}");
    }
    assert_eq!(t.get_meta("seed").unwrap(), 9);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    fs::write(&config, r#"{"D": 3, "protocol": "n2", "F0": 0.7, "target": 0.95}"#).unwrap();
    let c = config.to_str().unwrap();
    let from_file = table(&["sweep", "--config", c]);
    assert_eq!(from_file.get_meta("D").unwrap(), 3);
    assert_eq!(from_file.get_meta("protocol").unwrap(), "n2");
    let overridden = table(&["sweep", "--config", c, "--D", "5"]);
    assert_eq!(overridden.get_meta("D").unwrap(), 5);
    assert_eq!(overridden.get_meta("target").unwrap(), 0.95);
}

#[test]
fn written_files_pass_check() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 6] = [
        &["totient", "--nmax", "2", "--dmax", "6"],
        &["group", "order", "--D", "4", "--n", "2"],
        &["eta", "--dmax", "5", "--format", "json"],
        &["sweep", "--D", "3", "--protocol", "greedy", "--F0", "0.5"],
        &["yield", "--D", "2", "--protocol", "n4m2", "--grid", "0.7:0.9:0.1"],
        &["volume", "nppt", "--D", "3", "--grid", "0.4:0.6:0.1", "--samples", "100", "--seed", "3"],
    ];
    for (i, args) in cases.iter().enumerate() {
        let path = dir.path().join(format!("out{i}"));
        let mut full = args.to_vec();
        full.extend(["--out", path.to_str().unwrap()]);
        assert!(qudistill(&full).status.success(), "{args:?}");
        let report = table(&["check", path.to_str().unwrap()]);
        assert_eq!(report.get_meta("all_pass").unwrap(), true, "{args:?}");
        assert!(!report.rows.is_empty());
    }
}

#[test]
fn check_catches_a_tampered_value() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("phi.csv");
    let p = path.to_str().unwrap();
    assert!(qudistill(&["totient", "--nmax", "1", "--dmax", "5", "--out", p]).status.success());
    let text = fs::read_to_string(&path).unwrap().replace("\n1,5,4\n", "\n1,5,3\n");
    fs::write(&path, text).unwrap();
    let out = qudistill(&["check", p]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn volume_is_reproducible_per_seed() {
    let args = ["volume", "distill", "--D", "2", "--grid", "0.5:0.7:0.1", "--samples", "64", "--seed", "11"];
    let a = table(&args);
    let b = table(&[&args[..], &["--jobs", "1"]].concat());
    let fraction = a.column("fraction").unwrap();
    let fa: Vec<_> = a.rows.iter().map(|r| r[fraction].clone()).collect();
    let fb: Vec<_> = b.rows.iter().map(|r| r[fraction].clone()).collect();
    assert_eq!(fa, fb);
}

#[test]
fn search_finds_the_two_pair_protocol() {
    let t = table(&["search", "--D", "3", "--n", "2", "--m", "1", "--chi", "1,0,2"]);
    assert_eq!(t.get_meta("found").unwrap(), true);
    assert_eq!(t.rows.len(), 1);
}

#[test]
fn exit_codes_follow_error_kinds() {
    assert_eq!(qudistill(&["totient", "--dmax", "1"]).status.code(), Some(2));
    assert_eq!(qudistill(&["sweep", "--protocol", "nope"]).status.code(), Some(2));
    assert_eq!(qudistill(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(qudistill(&["eta", "--config", "/nonexistent/x.json"]).status.code(), Some(2));
    // n3-odd needs odd D
    assert_eq!(qudistill(&["sweep", "--D", "4", "--protocol", "n3-odd"]).status.code(), Some(2));
    assert_eq!(qudistill(&["group", "enumerate", "--D", "7", "--n", "3"]).status.code(), Some(3));
    assert!(qudistill(&["--help"]).status.success());
}

#[test]
fn totient_defaults_reproduce_the_small_table() {
    let t = table(&["totient"]);
    assert_eq!(t.columns, ["n", "D", "phi"]);
    let phi: Vec<u64> = t.rows.iter().map(|r| r[2].as_u64().unwrap()).collect();
    assert_eq!(phi, [1, 2, 2, 4, 2, 3, 8, 12, 24, 24, 7, 26, 56, 124, 182]);
}

#[test]
fn large_group_order_prints_as_an_exact_integer() {
    let out = qudistill(&["group", "order", "--D", "6", "--n", "3"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let order: u64 = text.lines().last().unwrap().rsplit(',').next().unwrap().parse().unwrap();
    // Z_6 = F_2 x F_3, so the order is |Sp(6, F_2)| * |Sp(6, F_3)|
    assert_eq!(order, 1_451_520 * 9_170_703_360);
}

#[test]
fn qpa_sweep_first_step_and_echoed_params() {
    let t = table(&["sweep", "--D", "2", "--protocol", "qpa", "--F0", "0.7"]);
    let f = t.column("F").unwrap();
    assert!((t.rows[1][f].as_f64().unwrap() - 25.0 / 34.0).abs() < 1e-14);
    let params = t.get_meta("params").unwrap();
    assert_eq!(params["D"], 2);
    assert_eq!(params["protocol"], "qpa");
}

#[test]
fn n4m2_threshold_bisection() {
    let t = table(&["sweep", "--bisect", "--D", "2", "--protocol", "n4m2", "--tolerance", "1e-5"]);
    let threshold = t.rows[0][t.column("threshold").unwrap()].as_f64().unwrap();
    assert!((0.62..=0.66).contains(&threshold), "{threshold}");
}

#[test]
fn yields_at_and_below_target() {
    let t = table(&["yield", "--D", "3", "--protocol", "qpa", "--grid", "0.5:1:0.05"]);
    let (y, s) = (t.column("yield").unwrap(), t.column("success").unwrap());
    let yields: Vec<f64> = t.rows.iter().map(|r| r[y].as_f64().unwrap()).collect();
    assert_eq!(*yields.last().unwrap(), 1.0);
    assert!(t.rows.iter().all(|r| r[s] == true));
    assert!(yields.windows(2).all(|w| w[0] <= w[1]), "{yields:?}");
}

fn fractions(t: &Table) -> Vec<f64> {
    let c = t.column("fraction").unwrap();
    t.rows.iter().map(|r| r[c].as_f64().unwrap()).collect()
}

#[test]
fn qubit_distilled_volume_steps_at_one_half() {
    let t = table(&["volume", "distill", "--D", "2", "--protocol", "qpa", "--grid", "0.3:0.7:0.1", "--samples", "100"]);
    assert_eq!(fractions(&t), [0.0, 0.0, 0.0, 1.0, 1.0]);
}

#[test]
fn nppt_volume_bounds_greedy_volume() {
    let common = ["--D", "3", "--grid", "0.4:0.6:0.1", "--samples", "64", "--seed", "5"];
    let distill = table(&[&["volume", "distill", "--protocol", "greedy"][..], &common].concat());
    let nppt = table(&[&["volume", "nppt"][..], &common].concat());
    for (d, p) in fractions(&distill).iter().zip(fractions(&nppt)) {
        assert!(*d <= p, "{d} > {p}");
    }
}
