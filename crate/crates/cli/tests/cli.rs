use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_delaylab"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn sample_embed_scan_dim_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(run(&["sample", "--system", "corner_cantor:0.3333333333333333", "--n", "30000", "--seed", "3", "-o", "c.csv"], d)
        .status
        .success());
    let cloud = fs::read_to_string(d.join("c.csv")).unwrap();
    assert!(cloud.starts_with("# system,corner_cantor:0.3333333333333333,seed,3\n"));
    assert_eq!(cloud.lines().count(), 30001);

    let dim = stdout_json(&run(&["dim", "-i", "c.csv", "--method", "correlation"], d));
    assert_eq!(dim["method"], "correlation");
    let v = dim["value"].as_f64().unwrap();
    assert!((v - 4f64.ln() / 3f64.ln()).abs() < 0.15, "dimension {v}");

    assert!(run(&["embed", "-i", "c.csv", "--k", "1", "--alpha-seed", "11", "-o", "p.csv"], d).status.success());
    let pairs = fs::read_to_string(d.join("p.csv")).unwrap();
    assert!(pairs.starts_with("# pairs,corner_cantor:0.3333333333333333,k,1,phase_dim,2,seed,3\n"));
    // u, v, two phase coordinates, weight.
    assert_eq!(pairs.lines().nth(1).unwrap().split(',').count(), 5);

    let scan = stdout_json(&run(&["sigma-scan", "-i", "p.csv", "--max-queries", "2000", "--curves", "curves"], d));
    let curves = scan["curves"].as_array().unwrap();
    assert_eq!(curves.len(), scan["verdicts"].as_array().unwrap().len());
    assert_eq!(fs::read_dir(d.join("curves")).unwrap().count(), curves.len());
    let csv = fs::read_to_string(d.join("curves/curve_d0.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "epsilon,fraction,empty_ball_fraction,delta");

    let slice = stdout_json(&run(&["slice", "-i", "p.csv", "--center", "0", "--delta", "0.02", "-o", "s.csv"], d));
    assert!(slice["members"].as_u64().unwrap() > 0);
    assert!(d.join("s.csv").exists());
}

#[test]
fn numeric_output_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(run(&["sample", "--system", "solenoid", "--n", "50", "--seed", "1", "-o", "a.csv"], d).status.success());
    let body = fs::read_to_string(d.join("a.csv")).unwrap();
    for field in body.lines().nth(1).unwrap().split(',') {
        let mantissa = field.split('e').next().unwrap().trim_start_matches('-');
        assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17, "{field}");
    }
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for name in ["a.csv", "b.csv"] {
        assert!(run(&["sample", "--system", "union_chain:0.4:0.05", "--n", "2000", "--seed", "9", "-o", name], d)
            .status
            .success());
    }
    assert_eq!(fs::read(d.join("a.csv")).unwrap(), fs::read(d.join("b.csv")).unwrap());
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["sample", "--n", "10"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["dim", "-i", "x.csv", "--method", "nope"], dir.path()).status.code(), Some(2));
}

#[test]
fn malformed_input_exits_3_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.csv"), "# system,tent,seed,0\n0.1,0.5\n0.2,abc\n").unwrap();
    let out = run(&["dim", "-i", "bad.csv"], d);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");

    let out = run(&["sample", "--system", "corner_cantor:0.7", "--n", "10"], d);
    assert_eq!(out.status.code(), Some(3));
    let out = run(&["dim", "-i", "missing.csv"], d);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn failing_scenario_exits_4_and_report_reads_it() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // A bounded-below claim checked at k = 2 on the four-corner shift, where
    // the prediction error collapses instead.
    let cfg = run(&["verify", "--scenario", "V2", "--print-config"], d);
    assert!(cfg.status.success());
    let mut cfg: serde_json::Value = serde_json::from_slice(&cfg.stdout).unwrap();
    cfg["k"] = serde_json::json!([2]);
    cfg["n_pairs"] = serde_json::json!(200_000);
    cfg["observable"]["alpha"]["count"] = serde_json::json!(2);
    fs::write(d.join("cfg.json"), cfg.to_string()).unwrap();

    let out = run(&["verify", "--config", "cfg.json", "--out", "res"], d);
    assert_eq!(out.status.code(), Some(4), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
    for f in ["result.json", "summary.txt", "meta.json"] {
        assert!(d.join("res/V2").join(f).exists(), "{f}");
    }

    let out = run(&["report", "-r", "res", "-o", "rep"], d);
    assert!(out.status.success());
    let table = String::from_utf8(out.stdout).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(table.starts_with("scenario\tk\talpha\tverdict\tslope\tpassed\n"));
    assert!(d.join("rep/summary.tsv").exists());
    assert!(fs::read_dir(d.join("rep/plot")).unwrap().count() > 0);
}

#[test]
fn empty_alpha_set_gives_header_only_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = run(&["verify", "--scenario", "V6", "--print-config"], d);
    let mut cfg: serde_json::Value = serde_json::from_slice(&cfg.stdout).unwrap();
    cfg["observable"]["alpha"]["count"] = serde_json::json!(0);
    cfg["n_pairs"] = serde_json::json!(1000);
    fs::write(d.join("cfg.json"), cfg.to_string()).unwrap();
    // No runs means nothing was verified.
    assert_eq!(run(&["verify", "--config", "cfg.json", "--out", "res"], d).status.code(), Some(4));
    let out = run(&["report", "-r", "res"], d);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "scenario\tk\talpha\tverdict\tslope\tpassed\n");
}
