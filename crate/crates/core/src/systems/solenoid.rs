//! The solenoid map `T̃(t, z) = (2t mod 2π, z/4 + e^{it}/2)` on the solid torus,
//! in coordinates `(t, Re z, Im z)`.

use std::f64::consts::TAU;

use rand::Rng;

use crate::error::{LabError, Result};

/// Slack allowed on `|z| ≤ 1`.
pub const DISK_TOL: f64 = 1e-9;

#[inline]
fn reduce_angle(t: f64) -> f64 {
    // For t ∈ [0, 2π) doubling lands in [0, 4π) and one exact subtraction suffices.
    let mut t = t;
    if !(0.0..TAU).contains(&t) {
        t = t.rem_euclid(TAU);
    }
    t
}

fn check(p: &[f64]) -> Result<()> {
    if p.len() != 3 {
        return Err(LabError::DimensionMismatch { expected: 3, got: p.len() });
    }
    if !p.iter().all(|c| c.is_finite()) {
        return Err(LabError::OutOfDomain(format!("non-finite solenoid point {p:?}")));
    }
    let r = p[1].hypot(p[2]);
    if r > 1.0 + DISK_TOL {
        return Err(LabError::OutOfDomain(format!("|z| = {r} exceeds 1")));
    }
    Ok(())
}

#[inline]
fn raw_step(p: &[f64], out: &mut [f64]) {
    let (s, c) = p[0].sin_cos();
    let t2 = reduce_angle(2.0 * p[0]);
    out[0] = t2;
    out[1] = 0.25 * p[1] + 0.5 * c;
    out[2] = 0.25 * p[2] + 0.5 * s;
}

/// One application of `T̃` (or `T̃²` when `squared`).
pub fn solenoid_step_into(p: &[f64], squared: bool, out: &mut [f64]) -> Result<()> {
    check(p)?;
    let mut q = [0.0; 3];
    raw_step(p, &mut q);
    if squared {
        raw_step(&q.clone(), &mut q);
    }
    out[..3].copy_from_slice(&q);
    Ok(())
}

pub fn solenoid_step(p: &[f64], squared: bool) -> Result<Vec<f64>> {
    let mut out = vec![0.0; 3];
    solenoid_step_into(p, squared, &mut out)?;
    Ok(out)
}

/// Uniform point of the solid torus `[0, 2π) × D`.
pub fn uniform_in_torus<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    let t = rng.random::<f64>() * TAU;
    loop {
        let a = 2.0 * rng.random::<f64>() - 1.0;
        let b = 2.0 * rng.random::<f64>() - 1.0;
        if a * a + b * b <= 1.0 {
            return [t, a, b];
        }
    }
}

/// Birkhoff orbit of `T̃²` from a random start, `burn_in` iterates dropped.
/// Returns flat coordinates of `n` consecutive points.
pub fn srb_orbit<R: Rng + ?Sized>(n: usize, burn_in: usize, rng: &mut R) -> Vec<f64> {
    let mut p = uniform_in_torus(rng);
    let mut q = [0.0; 3];
    for _ in 0..burn_in {
        raw_step(&p, &mut q);
        raw_step(&q, &mut p);
    }
    let mut coords = Vec::with_capacity(3 * n);
    for _ in 0..n {
        coords.extend_from_slice(&p);
        raw_step(&p, &mut q);
        raw_step(&q, &mut p);
    }
    coords
}

/// Embedding of the solid torus in R³ used as the probe chart:
/// `((2 + Re z) cos t, (2 + Re z) sin t, Im z)`. Continuous across the angle cut.
#[inline]
pub fn torus_chart(p: &[f64]) -> [f64; 3] {
    let (s, c) = p[0].sin_cos();
    let r = 2.0 + p[1];
    [r * c, r * s, p[2]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn hand_values() {
        let p = solenoid_step(&[0.0, 0.0, 0.0], false).unwrap();
        assert_eq!(p, vec![0.0, 0.5, 0.0]);
        let p = solenoid_step(&[PI, 1.0, 0.0], false).unwrap();
        assert!(p[0].abs() < 1e-15 || (p[0] - TAU).abs() < 1e-15);
        assert!((p[1] + 0.25).abs() < 1e-15 && p[2].abs() < 1e-15);
        let p = solenoid_step(&[PI / 3.0, 0.0, 0.0], true).unwrap();
        assert!((p[0] - 4.0 * PI / 3.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_points_outside_disk() {
        assert!(solenoid_step(&[0.0, 1.0 + 1e-6, 0.0], false).is_err());
        assert!(solenoid_step(&[0.0, 1.0 + 1e-10, 0.0], false).is_ok());
    }

    #[test]
    fn fiber_contracts_by_quarter() {
        let a = solenoid_step(&[1.3, 0.2, -0.4], false).unwrap();
        let b = solenoid_step(&[1.3, -0.5, 0.1], false).unwrap();
        let d0 = (0.7f64).hypot(0.5);
        let d1 = (a[1] - b[1]).hypot(a[2] - b[2]);
        assert!((d1 - d0 / 4.0).abs() < 1e-15);
    }
}
