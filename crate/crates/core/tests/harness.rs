use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use delaylab::harness::*;

fn small(id: ScenarioId) -> ScenarioConfig {
    let mut c = default_config(id);
    c.n_pairs = 40_000;
    c.n_points = 20_000;
    c.max_queries = 1000;
    c.observable.alpha = AlphaPolicy::Sampled { count: 2, radius: 1.0, seed: 5 };
    c
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for name in ["result.json", "summary.txt"] {
        out.push((name.to_string(), fs::read(dir.join(name)).unwrap()));
    }
    let mut curves: Vec<_> = fs::read_dir(dir.join("curves")).unwrap().map(|e| e.unwrap().path()).collect();
    curves.sort();
    for p in curves {
        out.push((p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()));
    }
    out
}

#[test]
fn registry_covers_every_claim_once() {
    let anchors: BTreeSet<&str> = REGISTRY.iter().map(|e| e.anchor).collect();
    assert_eq!(anchors, ANCHORS.iter().copied().collect());
    assert_eq!(REGISTRY.len(), ANCHORS.len());
    for id in ScenarioId::ALL {
        assert_eq!(entry(id).id, id);
        let c = default_config(id);
        assert_eq!(c.id, id);
        c.validate().unwrap();
        assert_eq!(id.to_string().parse::<ScenarioId>().unwrap(), id);
    }
    assert!("V9".parse::<ScenarioId>().is_err());
}

#[test]
fn config_json_round_trip_and_validation() {
    for id in ScenarioId::ALL {
        let c = default_config(id);
        assert_eq!(ScenarioConfig::from_json(&c.to_json()).unwrap(), c);
    }
    let base = default_config(ScenarioId::V2);
    let mut bad = base.clone();
    bad.k = vec![];
    assert!(bad.validate().is_err());
    let mut bad = base.clone();
    bad.epsilons = Some(vec![0.1, 0.1]);
    assert!(bad.validate().is_err());
    let mut bad = base.clone();
    bad.deltas = Some(vec![0.1, -0.01]);
    assert!(bad.validate().is_err());
    let mut bad = base.clone();
    bad.observable.alpha = AlphaPolicy::Sampled { count: 3, radius: 0.0, seed: 1 };
    assert!(ScenarioConfig::from_json(&bad.to_json()).is_err());
    assert!(ScenarioConfig::from_json("{\"id\": \"V2\"}").is_err());
}

#[test]
fn scenario_artifacts_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(ScenarioId::V2);
    let a = run_scenario(&cfg).unwrap();
    write_artifacts(&a, &dir.path().join("a"), 1.0).unwrap();
    let b = run_scenario(&cfg).unwrap();
    write_artifacts(&b, &dir.path().join("b"), 2.0).unwrap();
    assert_eq!(a, b);
    assert_eq!(files(&dir.path().join("a")), files(&dir.path().join("b")));
    assert_eq!(a.runs.len(), 2);
    assert!(!a.runs[0].curves.is_empty());
    assert!(dir.path().join("a/meta.json").exists());
}

#[test]
fn echoed_config_reproduces_the_result() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_scenario(&small(ScenarioId::V8)).unwrap();
    write_artifacts(&a, dir.path(), 0.0).unwrap();
    let stored: ScenarioResult = serde_json::from_slice(&fs::read(dir.path().join("result.json")).unwrap()).unwrap();
    assert_eq!(stored, a);
    let again = run_scenario(&stored.config).unwrap();
    assert_eq!(again, a);
}

#[test]
fn required_runs_follow_the_majority_rules() {
    let mut cfg = small(ScenarioId::V6);
    cfg.observable.alpha = AlphaPolicy::Sampled { count: 0, radius: 1.0, seed: 1 };
    let r = run_scenario(&cfg).unwrap();
    assert!(r.runs.is_empty() && !r.passed);

    cfg.observable.alpha = AlphaPolicy::Sampled { count: 3, radius: 1.0, seed: 1 };
    let r = run_scenario(&cfg).unwrap();
    assert_eq!(r.runs.len(), 3);
    assert_eq!(r.required, 3);
    assert_eq!(r.passed, r.passed_runs >= r.required);
}

#[test]
fn report_lists_every_run() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_scenario(&small(ScenarioId::V2)).unwrap();
    write_artifacts(&r, &dir.path().join("V2"), 0.0).unwrap();
    let rep = report(dir.path(), &dir.path().join("out")).unwrap();
    let table = rep.table();
    assert!(table.starts_with(TABLE_HEADER));
    assert_eq!(table.lines().count(), 1 + r.runs.len());
    assert_eq!(fs::read_to_string(dir.path().join("out/summary.tsv")).unwrap(), table);
    assert!(!rep.plot_files.is_empty());
}
