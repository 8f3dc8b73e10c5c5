use delaylab::observables::matrix::{ball_fraction_check, energy_integral_check};
use delaylab::observables::*;
use delaylab::rng::rng;
use delaylab::systems::{SampleOptions, SystemSpec};
use nalgebra::DMatrix;
use rand::Rng;

/// `φ_{h+Σα_j h_j}(x) − φ_{h+Σα_j h_j}(y) = φ_h(x) − φ_h(y) + D_{x,y} α`.
fn check_perturbation_identity(spec: SystemSpec, base: BaseObservable, k: usize, triples: usize, seed: u64) {
    let system = spec.build().unwrap();
    let cloud = system.sample(2000, seed, SampleOptions::default()).unwrap();
    let probes = Probes::for_system(probe_basis(system.dim(), k, None).unwrap(), &system).unwrap();
    let h = Observable::new(base, probes.clone());
    let plain = DelayMap::new(h.clone(), k, system.clone()).unwrap();
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for t in 0..triples {
        let x = cloud.point(r.random_range(0..cloud.len()));
        let y = cloud.point(r.random_range(0..cloud.len()));
        let alpha = sample_alpha(probes.len(), 1.0, seed * 10_000 + t as u64).unwrap();
        let perturbed = DelayMap::new(h.perturb(&alpha).unwrap(), k, system.clone()).unwrap();
        let lhs: Vec<f64> = perturbed
            .apply(x)
            .unwrap()
            .iter()
            .zip(perturbed.apply(y).unwrap())
            .map(|(a, b)| a - b)
            .collect();
        let d = observation_matrix(&system, &probes, x, y, k).unwrap();
        let da = &d * nalgebra::DVector::from_column_slice(&alpha);
        let px = plain.apply(x).unwrap();
        let py = plain.apply(y).unwrap();
        for i in 0..k {
            let rhs = px[i] - py[i] + da[i];
            worst = worst.max((lhs[i] - rhs).abs());
        }
    }
    assert!(worst <= 1e-10, "worst deviation {worst:e}");
}

#[test]
fn perturbation_is_linear_through_observation_matrix() {
    check_perturbation_identity(SystemSpec::solenoid(), BaseObservable::CosAngle, 2, 400, 1);
    check_perturbation_identity(SystemSpec::corner_cantor(1.0 / 3.0).unwrap(), BaseObservable::Zero, 2, 300, 2);
    check_perturbation_identity(delaylab::systems::build_union_chain(0.4, 0.05).unwrap(), BaseObservable::Coord(1), 2, 300, 3);
}

#[test]
fn ball_fraction_scales_with_rank() {
    // For ψ of rank p the fraction of α with ‖ψα + z‖ ≤ ε scales like ε^p.
    let mut r = rng(17);
    for (k, m) in [(1usize, 4usize), (2, 5), (3, 6)] {
        let psi = DMatrix::from_fn(k, m, |_, _| r.random_range(-1.0..1.0));
        let z: Vec<f64> = (0..k).map(|_| r.random_range(-0.1..0.1)).collect();
        let top = singular_values(&psi)[k - 1];
        let eps: Vec<f64> = (0..6).map(|i| 0.3 * top * 0.6f64.powi(i)).collect();
        let rep = ball_fraction_check(&psi, &z, 1.0, k, &eps, 1_000_000, 5 + k as u64).unwrap();
        assert!(rep.slope >= k as f64 - 0.2, "k={k}: slope {}", rep.slope);
        assert!(rep.bound_holds, "k={k}: {:?} C={}", rep.fractions, rep.constant);
    }
}

#[test]
fn interpolation_on_random_orbits() {
    let mut r = rng(23);
    let mut checked = 0;
    for inst in 0..100 {
        let n = 1 + inst % 3;
        let k = 1 + inst % 2;
        let basis = probe_basis(n, k, None).unwrap();
        let points: Vec<Vec<f64>> = (0..2 * k).map(|_| (0..n).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let targets: Vec<f64> = (0..2 * k).map(|_| r.random_range(-1.0..1.0)).collect();
        let it = interpolate_on_orbit(&points, &targets, &basis).unwrap();
        assert!(it.residual <= 1e-8, "instance {inst}: residual {}", it.residual);
        assert!(it.within_bound, "instance {inst}: bound {}", it.bound);
        checked += 1;
    }
    assert_eq!(checked, 100);
}

#[test]
fn interpolation_rejects_repeated_points() {
    let basis = probe_basis(1, 1, None).unwrap();
    let p = vec![vec![0.3], vec![0.3]];
    assert!(interpolate_on_orbit(&p, &[0.0, 1.0], &basis).is_err());
    assert!(interpolate_on_orbit(&p[..1], &[0.0], &basis).is_err());
}

#[test]
fn transversality_ratios_are_positive() {
    for (spec, k) in [
        (SystemSpec::solenoid(), 2),
        (SystemSpec::corner_cantor(1.0 / 3.0).unwrap(), 2),
        (SystemSpec::corner_cantor(1.0 / 3.0).unwrap(), 1),
    ] {
        let system = spec.build().unwrap();
        let cloud = system.sample(5000, 31, SampleOptions::default()).unwrap();
        let probes = Probes::for_system(probe_basis(system.dim(), k, None).unwrap(), &system).unwrap();
        let rep = transversality_report(&system, &probes, &cloud, k, 1000, 41).unwrap();
        assert!(rep.all_positive, "{}: min ratios {} {}", system.tag(), rep.min_rank_ratio, rep.min_kernel_ratio);
        assert!(rep.rank_ratios.len() + rep.skipped == 1000);
        assert!(rep.skipped < 50, "skipped {}", rep.skipped);
    }
}

#[test]
fn energy_integral_below_bound() {
    let mut r = rng(3);
    let a = DMatrix::from_fn(2, 4, |_, _| r.random_range(-1.0..1.0));
    let check = energy_integral_check(&a, &[0.05, -0.02], 2, 1.2, 200_000, 9).unwrap();
    assert!(check.holds, "{} > {}", check.integral, check.bound);
}

#[test]
fn alpha_draws_are_reproducible() {
    assert_eq!(sample_alpha(12, 1.0, 5).unwrap(), sample_alpha(12, 1.0, 5).unwrap());
    assert_ne!(sample_alpha(12, 1.0, 5).unwrap(), sample_alpha(12, 1.0, 6).unwrap());
}
