use delaylab::dimension::*;
use delaylab::metric::Metric;
use delaylab::rng::rng;
use delaylab::systems::{Provenance, SampleOptions, SampledMeasure, Similarity, SystemKind, SystemSpec};
use rand::Rng;

fn uniform_cloud(dim: usize, coords: Vec<f64>) -> SampledMeasure {
    SampledMeasure::uniform(dim, coords, 0, Provenance::Iid, "test", Metric::Euclidean).unwrap()
}

fn fc_cloud(n: usize, seed: u64) -> SampledMeasure {
    let system = SystemSpec::corner_cantor(1.0 / 3.0).unwrap().build().unwrap();
    system.sample(n, seed, SampleOptions::default()).unwrap()
}

#[test]
fn segment_and_square_exponents() {
    let seg = SystemSpec::identity(1).unwrap().build().unwrap().sample(100_000, 1, SampleOptions::default()).unwrap();
    let d = correlation_dimension(&seg, None).unwrap();
    assert!((d.value - 1.0).abs() < 0.05, "segment {}", d.value);
    let local = local_dimension(&seg, &[0.5], None).unwrap();
    assert!((local.value - 1.0).abs() < 0.1, "segment local {}", local.value);

    let sq = SystemSpec::identity(2).unwrap().build().unwrap().sample(100_000, 2, SampleOptions::default()).unwrap();
    let b = box_counting_dimension(&sq, None).unwrap();
    assert!((b.value - 2.0).abs() < 0.1, "square box {}", b.value);
}

// Points near the edge of a square see half-balls at scales above their
// distance to the edge, so the proxies need scales well below the side length
// and enough points to fill the smallest balls.
fn proxy_ladder() -> ScaleLadder {
    ScaleLadder::geometric(0.03, 0.002, 12).unwrap()
}

#[test]
fn square_proxies_agree() {
    let sq = SystemSpec::identity(2).unwrap().build().unwrap().sample(4_000_000, 2, SampleOptions::default()).unwrap();
    let p = hausdorff_proxies(&sq, Some(&proxy_ladder()), 400, 0.05, 0.95, 3).unwrap();
    assert!((p.lower - 2.0).abs() < 0.15 && (p.upper - 2.0).abs() < 0.15, "{} {}", p.lower, p.upper);
}

#[test]
fn single_point_box_dimension_is_zero() {
    let c = uniform_cloud(2, vec![0.3, 0.7]);
    let l = ScaleLadder::geometric(1.0, 0.001, 8).unwrap();
    assert_eq!(box_counting_dimension(&c, Some(&l)).unwrap().value, 0.0);
}

#[test]
fn correlation_sum_values_and_monotonicity() {
    let two = uniform_cloud(1, vec![0.0, 1.0]);
    assert_eq!(correlation_sum(&two, 0.5).unwrap(), 0.0);
    assert_eq!(correlation_sum(&two, 1.0).unwrap(), 1.0);
    assert!(correlation_sum(&two, 0.0).is_err());

    let c = fc_cloud(3000, 4);
    let mut last = 0.0;
    for i in 0..30 {
        let r = 1e-4 * 1.5f64.powi(i);
        let v = correlation_sum(&c, r).unwrap();
        assert!(v >= last);
        last = v;
    }
    assert!((correlation_sum(&c, 2.0).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn energy_of_segment_is_stable() {
    let two = uniform_cloud(1, vec![0.0, 1.0]);
    assert!((energy(&two, 0.7).unwrap().value - 0.5).abs() < 1e-15);
    let seg = SystemSpec::identity(1).unwrap().build().unwrap().sample(4000, 5, SampleOptions::default()).unwrap();
    let e = energy(&seg, 0.5).unwrap();
    assert!(!e.divergent, "{e:?}");
    // ∫∫ |x − y|^{−1/2} dx dy over the unit square = 8/3.
    assert!((e.value - 8.0 / 3.0).abs() < 0.1, "{}", e.value);
}

#[test]
fn mixture_proxies_separate_components() {
    let mut r = rng(6);
    let mut coords = Vec::new();
    for _ in 0..2_000_000 {
        coords.extend([2.0 + r.random::<f64>(), 0.0]);
        coords.extend([r.random::<f64>(), r.random::<f64>()]);
    }
    let c = uniform_cloud(2, coords);
    let p = hausdorff_proxies(&c, Some(&proxy_ladder()), 400, 0.05, 0.95, 7).unwrap();
    assert!((p.lower - 1.0).abs() < 0.2, "lower {}", p.lower);
    assert!((p.upper - 2.0).abs() < 0.2, "upper {}", p.upper);
}

#[test]
fn correlation_dimension_below_lower_proxy() {
    let solenoid = SystemSpec::solenoid().build().unwrap().sample(100_000, 8, SampleOptions::default()).unwrap();
    for c in [fc_cloud(100_000, 9), solenoid] {
        let d = correlation_dimension(&c, None).unwrap().value;
        let p = hausdorff_proxies(&c, None, 200, 0.05, 0.95, 10).unwrap();
        assert!(d <= p.lower + 0.2, "{}: {d} vs {}", c.system, p.lower);
    }
}

#[test]
fn estimates_invariant_under_rigid_motion() {
    let c = fc_cloud(50_000, 11);
    let (s, co) = 0.37f64.sin_cos();
    let moved: Vec<f64> = c
        .points()
        .flat_map(|p| [co * p[0] - s * p[1] + 3.25, s * p[0] + co * p[1] - 1.5])
        .collect();
    let m = uniform_cloud(2, moved);
    let a = correlation_dimension(&c, None).unwrap().value;
    let b = correlation_dimension(&m, None).unwrap().value;
    assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    let la = local_dimension(&c, c.point(17), None).unwrap().value;
    let lb = local_dimension(&m, m.point(17), None).unwrap().value;
    assert!((la - lb).abs() < 1e-6, "{la} vs {lb}");
}

#[test]
fn local_potential_converges_below_dimension_and_grows_above() {
    // Middle-half Cantor set: two maps of ratio 1/4, dimension 1/2.
    let maps = vec![
        Similarity { ratio: 0.25, translation: vec![0.0] },
        Similarity { ratio: 0.25, translation: vec![0.75] },
    ];
    let system = SystemSpec::new(SystemKind::SelfSimilarIfs { maps }).unwrap().build().unwrap();
    // Deep codings keep the sample free of repeated atoms.
    let opts = SampleOptions { depth: Some(26), ..SampleOptions::default() };
    let full = system.sample(400_000, 12, opts).unwrap();
    let half = full.restrict(&(0..full.len() / 2).collect::<Vec<_>>()).unwrap();
    let centers = system.sample(200, 13, opts).unwrap();
    let d = 0.5;
    // The sums are heavy tailed above the dimension, so compare geometric means
    // over centers. Centers that land on a sample atom are skipped.
    let ratio = |s: f64| {
        let logs: Vec<f64> = centers
            .points()
            .map(|x| (local_potential(&full, x, s, None) / local_potential(&half, x, s, None)).ln())
            .filter(|v| v.is_finite())
            .collect();
        assert!(logs.len() >= 190);
        (logs.iter().sum::<f64>() / logs.len() as f64).exp()
    };
    let below = ratio(d - 0.3);
    assert!((below - 1.0).abs() < 0.1, "below: {below}");
    let above = ratio(d + 0.45);
    assert!(above > 1.5, "above: {above}");
}
