//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints exactly one line; exits nonzero if any criterion fails.

use std::fs;
use std::path::Path;
use std::time::Instant;

use delaylab::dimension::*;
use delaylab::harness::*;
use delaylab::observables::matrix::ball_fraction_check;
use delaylab::observables::*;
use delaylab::prediction::{chi, sigma, EmbeddedCloud};
use delaylab::rng::rng;
use delaylab::slices::disintegration_check;
use delaylab::systems::{build_union_chain, Provenance, SampleOptions, SampledMeasure, SystemSpec};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn fc() -> SystemSpec {
    SystemSpec::corner_cantor(1.0 / 3.0).unwrap()
}

fn fc_dimension() -> f64 {
    4f64.ln() / 3f64.ln()
}

fn solenoid_dimension() -> Outcome {
    let start = Instant::now();
    let cloud = SystemSpec::solenoid().build().unwrap().sample(100_000, 1, SampleOptions::default()).unwrap();
    let d = correlation_dimension(&cloud, None).unwrap().value;
    let p = hausdorff_proxies(&cloud, None, 200, 0.05, 0.95, 2).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let inside = |x: f64| (1.35..=1.65).contains(&x);
    outcome(
        (d - 1.5).abs() <= 0.1 && inside(p.lower) && inside(p.upper) && secs <= 60.0,
        format!("correlation {d:.3}, proxies {:.3}/{:.3}, {secs:.1}s", p.lower, p.upper),
    )
}

fn corner_dimension() -> Outcome {
    let start = Instant::now();
    let cloud = fc().build().unwrap().sample(100_000, 1, SampleOptions::default()).unwrap();
    let c = correlation_dimension(&cloud, None).unwrap().value;
    let b = box_counting_dimension(&cloud, None).unwrap().value;
    let secs = start.elapsed().as_secs_f64();
    let d = fc_dimension();
    outcome(
        (c - d).abs() <= 0.08 && (b - d).abs() <= 0.1 && secs <= 30.0,
        format!("correlation {c:.4}, box {b:.4} vs {d:.4}, {secs:.1}s"),
    )
}

fn verdict_counts(r: &ScenarioResult) -> String {
    format!("{} {}/{} (need {})", r.id, r.passed_runs, r.runs.len(), r.required)
}

fn predictability_threshold() -> Outcome {
    let start = Instant::now();
    let above = run_scenario(&default_config(ScenarioId::V1)).unwrap();
    let below = run_scenario(&default_config(ScenarioId::V2)).unwrap();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        above.passed && below.passed && secs <= 600.0,
        format!("{}, {}, {secs:.1}s", verdict_counts(&above), verdict_counts(&below)),
    )
}

fn counterexample() -> Outcome {
    let r = run_scenario(&default_config(ScenarioId::V4)).unwrap();
    let err = r.diagnostics.get("identity_max_error").copied().unwrap_or(f64::INFINITY);
    let sep_ok = r.runs.iter().all(|run| {
        matches!((run.metrics.get("min_collision_separation"), run.metrics.get("probe_sep_x")), (Some(m), Some(s)) if m >= s)
    });
    let zeros: Vec<String> = r
        .runs
        .iter()
        .map(|run| format!("k={} zero scales {}", run.k, run.metrics.get("zero_scales").copied().unwrap_or(0.0)))
        .collect();
    outcome(r.passed && sep_ok && err <= 1e-10, format!("{}, {}, identity error {err:.1e}", verdict_counts(&r), zeros.join(", ")))
}

fn upper_rate() -> Outcome {
    let r = run_scenario(&default_config(ScenarioId::V3)).unwrap();
    let slopes: Vec<String> = r.runs.iter().filter_map(|run| run.metrics.get("slope")).map(|s| format!("{s:.2}")).collect();
    outcome(r.passed, format!("{}, slopes [{}]", verdict_counts(&r), slopes.join(" ")))
}

/// Slab extraction by a direct scan over the phase cloud, independent of the
/// neighbor index and the slice module.
fn solenoid_slab_dimensions() -> Vec<f64> {
    let cloud = SystemSpec::solenoid().build().unwrap().sample(2_000_000, 31, SampleOptions::default()).unwrap();
    [1.0f64, 2.0]
        .iter()
        .map(|t0| {
            let y = t0.cos();
            let coords: Vec<f64> = cloud.points().filter(|p| (p[0].cos() - y).abs() <= 1e-3).flatten().copied().collect();
            let slab = SampledMeasure::uniform(3, coords, 0, Provenance::Iid, "solenoid-slab", cloud.metric).unwrap();
            correlation_dimension(&slab, None).unwrap().value
        })
        .collect()
}

fn slice_dimensions() -> Outcome {
    let r = run_scenario(&default_config(ScenarioId::V5)).unwrap();
    let p10: Vec<String> =
        r.runs.iter().filter_map(|run| run.metrics.get("slice_dim_p10")).map(|s| format!("{s:.2}")).collect();
    let fiber = solenoid_slab_dimensions();
    let fiber_ok = fiber.iter().all(|d| (d - 0.5).abs() <= 0.15);
    outcome(
        r.passed && fiber_ok,
        format!("{}, p10 [{}], solenoid slabs {:.3} {:.3}", verdict_counts(&r), p10.join(" "), fiber[0], fiber[1]),
    )
}

/// Mean reconstruction-space local dimension over all α for one k.
fn pooled_mean(r: &ScenarioResult, k: usize) -> f64 {
    let (mut sum, mut n) = (0.0, 0.0);
    for run in r.runs.iter().filter(|run| run.k == k) {
        if let (Some(m), Some(p)) = (run.metrics.get("mean_reconstruction"), run.metrics.get("points")) {
            sum += m * p;
            n += p;
        }
    }
    sum / n
}

fn local_dimension_law() -> Outcome {
    let sol = run_scenario(&default_config(ScenarioId::V7)).unwrap();
    let mut cfg = default_config(ScenarioId::V7);
    cfg.system = fc();
    cfg.observable.base = BaseObservable::Zero;
    cfg.k = vec![2];
    let corner = run_scenario(&cfg).unwrap();
    let (m1, m2, mc) = (pooled_mean(&sol, 1), pooled_mean(&sol, 2), pooled_mean(&corner, 2));
    outcome(
        (0.85..=1.15).contains(&m1) && (1.35..=1.65).contains(&m2) && (1.11..=1.41).contains(&mc),
        format!("solenoid k=1 {m1:.3}, k=2 {m2:.3}, four-corner k=2 {mc:.3}"),
    )
}

fn iterate_example() -> Outcome {
    let r = run_scenario(&default_config(ScenarioId::V8)).unwrap();
    let d = r.diagnostics.get("phase_dimension").copied().unwrap_or(f64::NAN);
    outcome(r.passed && d >= 2.1, format!("{}, phase dimension {d:.3}", verdict_counts(&r)))
}

fn neighbor_check() -> bool {
    let specs = [SystemSpec::solenoid(), fc(), build_union_chain(0.4, 0.05).unwrap(), SystemSpec::tent()];
    specs.into_iter().all(|spec| {
        let cloud = spec.build().unwrap().sample(2000, 3, SampleOptions::default()).unwrap();
        let idx = NeighborIndex::new(cloud.coords(), cloud.dim(), cloud.metric);
        (0..cloud.len()).step_by(53).all(|q| {
            [0.0, 0.003, 0.03, 0.3, 10.0].iter().all(|&r| {
                let want: Vec<usize> =
                    (0..cloud.len()).filter(|&j| cloud.metric.dist(cloud.point(q), cloud.point(j)) <= r).collect();
                idx.within(cloud.point(q), r) == want
            })
        })
    })
}

fn corner_embedding(k: usize, n: usize) -> EmbeddedCloud {
    let system = fc().build().unwrap();
    let pts = system.sample(n, 9, SampleOptions::default()).unwrap();
    let probes = Probes::for_system(probe_basis(2, k, None).unwrap(), &system).unwrap();
    let h = Observable::new(BaseObservable::Zero, probes.clone()).perturb(&sample_alpha(probes.len(), 1.0, 4).unwrap()).unwrap();
    EmbeddedCloud::embed(&pts, &DelayMap::new(h, k, system).unwrap()).unwrap()
}

fn parallel_axis_error() -> f64 {
    let c = corner_embedding(2, 50_000);
    let mut worst: f64 = 0.0;
    for q in (0..c.len()).step_by(997) {
        for eps in [0.003, 0.03, 0.3] {
            let y = c.u(q).to_vec();
            let s = sigma(&c, &y, eps).unwrap();
            let m = chi(&c, &y, eps).unwrap();
            let members = c.ball(&y, eps);
            let w: f64 = members.iter().map(|&i| c.weights()[i]).sum();
            let second: f64 = members.iter().map(|&i| c.weights()[i] * c.v(i).iter().map(|x| x * x).sum::<f64>()).sum::<f64>() / w;
            let lhs = s * s + m.iter().map(|x| x * x).sum::<f64>();
            worst = worst.max((lhs - second).abs() / second.abs().max(1e-300));
        }
    }
    worst
}

fn matrix_identity_error() -> f64 {
    let mut worst: f64 = 0.0;
    for (spec, base, seed) in [
        (SystemSpec::solenoid(), BaseObservable::CosAngle, 1u64),
        (fc(), BaseObservable::Zero, 2),
        (build_union_chain(0.4, 0.05).unwrap(), BaseObservable::Coord(1), 3),
    ] {
        let system = spec.build().unwrap();
        let cloud = system.sample(2000, seed, SampleOptions::default()).unwrap();
        let k = 2;
        let probes = Probes::for_system(probe_basis(system.dim(), k, None).unwrap(), &system).unwrap();
        let h = Observable::new(base, probes.clone());
        let plain = DelayMap::new(h.clone(), k, system.clone()).unwrap();
        let mut r = rng(seed);
        for t in 0..334 {
            let x = cloud.point(r.random_range(0..cloud.len()));
            let y = cloud.point(r.random_range(0..cloud.len()));
            let alpha = sample_alpha(probes.len(), 1.0, 100 * seed + t).unwrap();
            let pert = DelayMap::new(h.perturb(&alpha).unwrap(), k, system.clone()).unwrap();
            let d = observation_matrix(&system, &probes, x, y, k).unwrap() * DVector::from_column_slice(&alpha);
            let (px, py, qx, qy) = (plain.apply(x).unwrap(), plain.apply(y).unwrap(), pert.apply(x).unwrap(), pert.apply(y).unwrap());
            for i in 0..k {
                worst = worst.max(((qx[i] - qy[i]) - (px[i] - py[i] + d[i])).abs());
            }
        }
    }
    worst
}

fn ball_fraction_ok() -> bool {
    let mut r = rng(17);
    [(1usize, 4usize), (2, 5)].into_iter().all(|(p, m)| {
        let psi = DMatrix::from_fn(p, m, |_, _| r.random_range(-1.0..1.0));
        let z: Vec<f64> = (0..p).map(|_| r.random_range(-0.1..0.1)).collect();
        let top = singular_values(&psi)[p - 1];
        let eps: Vec<f64> = (0..6).map(|i| 0.3 * top * 0.6f64.powi(i)).collect();
        ball_fraction_check(&psi, &z, 1.0, p, &eps, 500_000, 3).unwrap().slope >= p as f64 - 0.2
    })
}

fn interpolation_ok() -> bool {
    let mut r = rng(23);
    (0..100).all(|inst| {
        let (n, k) = (1 + inst % 3, 1 + inst % 2);
        let basis = probe_basis(n, k, None).unwrap();
        let pts: Vec<Vec<f64>> = (0..2 * k).map(|_| (0..n).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let targets: Vec<f64> = (0..2 * k).map(|_| r.random_range(-1.0..1.0)).collect();
        let it = interpolate_on_orbit(&pts, &targets, &basis).unwrap();
        it.residual <= 1e-8 && it.within_bound
    })
}

fn transversality_ok() -> bool {
    let system = fc().build().unwrap();
    let cloud = system.sample(5000, 31, SampleOptions::default()).unwrap();
    let probes = Probes::for_system(probe_basis(2, 2, None).unwrap(), &system).unwrap();
    let rep = transversality_report(&system, &probes, &cloud, 2, 1000, 41).unwrap();
    rep.all_positive && rep.rank_ratios.len() + rep.skipped == 1000
}

fn disintegration_z() -> f64 {
    let c = corner_embedding(1, 50_000);
    disintegration_check(&c, |x| x[1] < 0.4, 0.01, 400, 7).unwrap().z
}

fn artifact_bytes(dir: &Path) -> Vec<Vec<u8>> {
    let mut paths = vec![dir.join("result.json"), dir.join("summary.txt")];
    let mut curves: Vec<_> = fs::read_dir(dir.join("curves")).unwrap().map(|e| e.unwrap().path()).collect();
    curves.sort();
    paths.extend(curves);
    paths.iter().map(|p| fs::read(p).unwrap()).collect()
}

fn pipeline_deterministic() -> bool {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = default_config(ScenarioId::V2);
    cfg.n_pairs = 50_000;
    cfg.max_queries = 2000;
    cfg.observable.alpha = AlphaPolicy::Sampled { count: 2, radius: 1.0, seed: 3 };
    for name in ["a", "b"] {
        let r = run_scenario(&cfg).unwrap();
        write_artifacts(&r, &dir.path().join(name), 0.0).unwrap();
    }
    artifact_bytes(&dir.path().join("a")) == artifact_bytes(&dir.path().join("b"))
}

fn property_suites() -> Outcome {
    let neighbors = neighbor_check();
    let pa = parallel_axis_error();
    let mi = matrix_identity_error();
    let bf = ball_fraction_ok();
    let interp = interpolation_ok();
    let tr = transversality_ok();
    let z = disintegration_z();
    let det = pipeline_deterministic();
    outcome(
        neighbors && pa <= 1e-9 && mi <= 1e-10 && bf && interp && tr && z <= 3.0 && det,
        format!(
            "neighbors {neighbors}, parallel-axis {pa:.1e}, matrix identity {mi:.1e}, ball fraction {bf}, \
             interpolation {interp}, transversality {tr}, disintegration z {z:.2}, deterministic {det}"
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("solenoid dimension", solenoid_dimension),
        ("four-corner dimension", corner_dimension),
        ("predictability threshold", predictability_threshold),
        ("solenoid counterexample", counterexample),
        ("exceedance upper rate", upper_rate),
        ("slice dimensions", slice_dimensions),
        ("local dimension law", local_dimension_law),
        ("iterate example", iterate_example),
        ("property suites", property_suites),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("criterion {} {name}: {tag} ({}) [{:.1}s]", i + 1, o.detail, start.elapsed().as_secs_f64());
        if !o.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
