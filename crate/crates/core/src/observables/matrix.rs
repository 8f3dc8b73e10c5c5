//! Observation matrices `D_{x,y}` and the linear-algebra diagnostics built on
//! them: singular values, kernel-restricted norms, orbit interpolation, and
//! Monte Carlo checks of the ball-measure and energy-integral inequalities.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::basis::MonomialBasis;
use super::observable::{sample_alpha_with, Probes};
use crate::error::{LabError, Result};
use crate::rng::{rng, substream};
use crate::systems::{SampledMeasure, System};

/// Relative size below which a singular value counts as zero.
pub const RANK_TOL: f64 = 1e-12;

/// `k × m` matrix with entry `(i, j) = h_j(T^i x) − h_j(T^i y)`.
pub fn observation_matrix(system: &System, probes: &Probes, x: &[f64], y: &[f64], k: usize) -> Result<DMatrix<f64>> {
    let m = probes.len();
    let n = system.dim();
    let ox = system.orbit(x, k)?;
    let oy = system.orbit(y, k)?;
    let mut d = DMatrix::zeros(k, m);
    for i in 0..k {
        let hx = probes.eval(&ox[i * n..(i + 1) * n]);
        let hy = probes.eval(&oy[i * n..(i + 1) * n]);
        for j in 0..m {
            d[(i, j)] = hx[j] - hy[j];
        }
    }
    Ok(d)
}

/// Singular values in non-increasing order (`min(rows, cols)` of them).
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values above `RANK_TOL · σ₁ · max(rows, cols)`.
pub fn numerical_rank(a: &DMatrix<f64>) -> usize {
    let s = singular_values(a);
    let Some(&top) = s.first() else { return 0 };
    if top == 0.0 {
        return 0;
    }
    let tol = RANK_TOL * top * a.nrows().max(a.ncols()) as f64;
    s.iter().filter(|&&v| v > tol).count()
}

/// Operator norm of `b` restricted to the kernel of `a` (same column count).
pub fn kernel_restricted_norm(b: &DMatrix<f64>, a: &DMatrix<f64>) -> f64 {
    let m = a.ncols();
    // Projector onto Ker a: I − V_r V_rᵀ with V_r the leading right singular vectors.
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.expect("requested");
    let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let tol = RANK_TOL * top * a.nrows().max(m) as f64;
    let mut proj = DMatrix::<f64>::identity(m, m);
    for (r, &s) in svd.singular_values.iter().enumerate() {
        if s > tol {
            let v = vt.row(r).transpose();
            proj -= &v * v.transpose();
        }
    }
    singular_values(&(b * proj)).first().copied().unwrap_or(0.0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Interpolation {
    pub alpha: Vec<f64>,
    /// `max_i |Σ_j α_j h_j(y_i) − z_i|`.
    pub residual: f64,
    /// `min_i ‖y_{i+k} − y_i‖`.
    pub sigma: f64,
    /// Minimum distance over the remaining pairs.
    pub eps: f64,
    /// Right-hand side `2k·max{1, ‖y_i‖}^{2m−1}·‖z‖_∞ / (ε^{2k−2} σ)`.
    pub bound: f64,
    pub within_bound: bool,
}

/// Minimum-norm `α` with `Σ_j α_j h_j(y_i) = z_i` for `2k` points `y_i`, with the
/// a-priori norm bound evaluated from the points' separations.
pub fn interpolate_on_orbit(points: &[Vec<f64>], targets: &[f64], basis: &MonomialBasis) -> Result<Interpolation> {
    let n2 = points.len();
    if n2 == 0 || n2 % 2 != 0 || targets.len() != n2 {
        return Err(LabError::InvalidParameter(format!(
            "need an even number of points and matching targets, got {n2} and {}",
            targets.len()
        )));
    }
    let k = n2 / 2;
    let m = basis.len();
    let mut a = DMatrix::zeros(n2, m);
    for (i, p) in points.iter().enumerate() {
        if p.len() != basis.vars() {
            return Err(LabError::DimensionMismatch { expected: basis.vars(), got: p.len() });
        }
        for (j, v) in basis.eval(p).into_iter().enumerate() {
            a[(i, j)] = v;
        }
    }
    let dist = |i: usize, j: usize| -> f64 {
        points[i].iter().zip(&points[j]).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
    };
    let sigma = (0..k).map(|i| dist(i, i + k)).fold(f64::INFINITY, f64::min);
    let mut eps = f64::INFINITY;
    for i in 0..n2 {
        for j in i + 1..n2 {
            if j - i != k {
                eps = eps.min(dist(i, j));
            }
        }
    }
    let svd = a.clone().svd(true, true);
    let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let low = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    let rank_tol = RANK_TOL * top * n2.max(m) as f64;
    if !(low > rank_tol) {
        return Err(LabError::RankDeficient(format!(
            "interpolation matrix has singular value {low:.3e} against {top:.3e}"
        )));
    }
    let z = DVector::from_column_slice(targets);
    let alpha = svd
        .solve(&z, rank_tol)
        .map_err(|e| LabError::RankDeficient(e.to_string()))?;
    let residual = (&a * &alpha - &z).amax();
    let radius = points
        .iter()
        .map(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(1.0, f64::max);
    let zinf = z.amax();
    let bound = 2.0 * k as f64 * radius.powi(2 * m as i32 - 1) * zinf / (eps.powi(2 * k as i32 - 2) * sigma);
    let alpha: Vec<f64> = alpha.iter().copied().collect();
    let ainf = alpha.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    Ok(Interpolation { alpha, residual, sigma, eps, bound, within_bound: ainf <= bound })
}

/// Ratios of singular values of observation matrices to their lower bounds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransversalityReport {
    pub k: usize,
    pub m: usize,
    pub pairs_requested: usize,
    /// Pairs skipped because a separation or the terminal distance vanished.
    pub skipped: usize,
    /// `σ_k(D_{x,y}) / (ε^{2k−2}‖T^{k−1}x − T^{k−1}y‖)` per retained pair.
    pub rank_ratios: Vec<f64>,
    /// `σ₁(D_{Tx,Ty}|Ker D_{x,y}) / (ε^{2k}‖T^k x − T^k y‖)` per retained pair.
    pub kernel_ratios: Vec<f64>,
    pub min_rank_ratio: f64,
    pub min_kernel_ratio: f64,
    pub all_positive: bool,
}

/// Minimum separation between distinct orbit points `T^i ξ₁`, `T^j ξ₂`, `i ≠ j`,
/// `ξ ∈ {x, y}`, among the first `len` iterates.
fn orbit_separation(ox: &[Vec<f64>], oy: &[Vec<f64>], len: usize) -> f64 {
    let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
    let mut eps = f64::INFINITY;
    for i in 0..len {
        for j in 0..len {
            if i == j {
                continue;
            }
            for a in [ox, oy] {
                for b in [ox, oy] {
                    eps = eps.min(d(&a[i], &b[j]));
                }
            }
        }
    }
    eps
}

/// Sample point pairs from a cloud and measure how far the observation
/// matrices are from degenerate. Distances are taken in the probe chart after
/// rescaling, the coordinates in which the monomials are evaluated.
pub fn transversality_report(
    system: &System,
    probes: &Probes,
    cloud: &SampledMeasure,
    k: usize,
    pair_count: usize,
    seed: u64,
) -> Result<TransversalityReport> {
    if cloud.len() < 2 {
        return Err(LabError::TooFewSamples { needed: 2, have: cloud.len() });
    }
    let n = system.dim();
    let mut r = rng(seed);
    let pairs: Vec<(usize, usize)> = (0..pair_count)
        .map(|_| (r.random_range(0..cloud.len()), r.random_range(0..cloud.len())))
        .collect();
    let results: Vec<Result<Option<(f64, f64)>>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let x = cloud.point(i);
            let y = cloud.point(j);
            let ox = system.orbit(x, k + 1)?;
            let oy = system.orbit(y, k + 1)?;
            let chart = |o: &[f64]| -> Vec<Vec<f64>> {
                o.chunks_exact(n)
                    .map(|p| {
                        let mut c = vec![0.0; n];
                        probes.chart_point(p, &mut c);
                        probes.rescale(&mut c);
                        c
                    })
                    .collect()
            };
            let cx = chart(&ox);
            let cy = chart(&oy);
            let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
            let eps_k = orbit_separation(&cx, &cy, k);
            let eps_k1 = orbit_separation(&cx, &cy, k + 1);
            let tail = dist(&cx[k - 1], &cy[k - 1]);
            let tail1 = dist(&cx[k], &cy[k]);
            let ek = if k == 1 { 1.0 } else { eps_k };
            if !(ek > 0.0 && eps_k1 > 0.0 && tail > 0.0 && tail1 > 0.0) {
                return Ok(None);
            }
            let d0 = observation_matrix(system, probes, x, y, k)?;
            let tx = &ox[n..2 * n];
            let ty = &oy[n..2 * n];
            let d1 = observation_matrix(system, probes, tx, ty, k)?;
            let sk = singular_values(&d0)[k - 1];
            let rank_ratio = sk / (ek.powi(2 * k as i32 - 2) * tail);
            let kern = kernel_restricted_norm(&d1, &d0);
            let kernel_ratio = kern / (eps_k1.powi(2 * k as i32) * tail1);
            Ok(Some((rank_ratio, kernel_ratio)))
        })
        .collect();
    let mut rank_ratios = Vec::new();
    let mut kernel_ratios = Vec::new();
    let mut skipped = 0;
    for res in results {
        match res? {
            Some((a, b)) => {
                rank_ratios.push(a);
                kernel_ratios.push(b);
            }
            None => skipped += 1,
        }
    }
    let min_rank_ratio = rank_ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let min_kernel_ratio = kernel_ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let all_positive = !rank_ratios.is_empty() && min_rank_ratio > 0.0 && min_kernel_ratio > 0.0;
    Ok(TransversalityReport {
        k,
        m: probes.len(),
        pairs_requested: pair_count,
        skipped,
        rank_ratios,
        kernel_ratios,
        min_rank_ratio,
        min_kernel_ratio,
        all_positive,
    })
}

/// Monte Carlo estimate of `Leb{α ∈ B_m(0,ρ) : ‖ψα + z‖ ≤ ε} / Leb(B_m(0,ρ))`
/// for every `ε` in the ladder, from one shared sample.
pub fn ball_fraction(psi: &DMatrix<f64>, z: &[f64], rho: f64, eps: &[f64], samples: usize, seed: u64) -> Vec<f64> {
    let m = psi.ncols();
    let zv = DVector::from_column_slice(z);
    const CHUNK: usize = 1 << 14;
    let chunks = samples.div_ceil(CHUNK);
    let mut norms: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut r = substream(seed, c as u64);
            let len = CHUNK.min(samples - c * CHUNK);
            (0..len)
                .map(|_| {
                    let a = DVector::from_vec(sample_alpha_with(m, rho, &mut r));
                    (psi * a + &zv).norm()
                })
                .collect::<Vec<_>>()
        })
        .collect();
    norms.sort_by(f64::total_cmp);
    eps.iter()
        .map(|&e| norms.partition_point(|&v| v <= e) as f64 / samples as f64)
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BallFractionReport {
    pub p: usize,
    pub sigma_p: f64,
    pub eps: Vec<f64>,
    pub fractions: Vec<f64>,
    /// Log-log slope of fraction against `ε` over scales with nonzero counts.
    pub slope: f64,
    /// `C = V_p V_{m−p} / V_m`: the set lies in a cylinder whose cross
    /// section along the top `p` right singular vectors has radius `ε/σ_p`.
    pub constant: f64,
    /// Whether `fraction(ε) ≤ C (ε/(σ_p ρ))^p` at every scale, allowing three
    /// binomial standard errors.
    pub bound_holds: bool,
}

pub fn ball_fraction_check(
    psi: &DMatrix<f64>,
    z: &[f64],
    rho: f64,
    p: usize,
    eps: &[f64],
    samples: usize,
    seed: u64,
) -> Result<BallFractionReport> {
    let sv = singular_values(psi);
    if p == 0 || p > sv.len() || sv[p - 1] <= 0.0 {
        return Err(LabError::InvalidParameter(format!("σ_{p} is not positive")));
    }
    let sp = sv[p - 1];
    let fractions = ball_fraction(psi, z, rho, eps, samples, seed);
    if eps.is_empty() {
        return Err(LabError::InvalidParameter("empty ε ladder".into()));
    }
    let m = psi.ncols();
    let scaled = |e: f64| (e / (sp * rho)).powi(p as i32);
    let constant = unit_ball_volume(p) * unit_ball_volume(m - p) / unit_ball_volume(m);
    let bound_holds = eps.iter().zip(&fractions).all(|(&e, &f)| {
        let se = (f * (1.0 - f) / samples as f64).sqrt();
        f <= constant * scaled(e) + 3.0 * se + 1e-15
    });
    let (xs, ys): (Vec<f64>, Vec<f64>) = eps
        .iter()
        .zip(&fractions)
        .filter(|(_, &f)| f > 0.0)
        .map(|(e, f)| (e.ln(), f.ln()))
        .unzip();
    let slope = crate::dimension::fit::least_squares(&xs, &ys).map(|f| f.slope).unwrap_or(f64::NAN);
    Ok(BallFractionReport { p, sigma_p: sp, eps: eps.to_vec(), fractions, slope, constant, bound_holds })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnergyIntegralCheck {
    /// Monte Carlo value of `∫_{B_m(0,1)} ‖Aα + b‖^{−s} dα`.
    pub integral: f64,
    /// `c·3^{m−s}/σ_p^s` with `c = ∫_{B_m(0,1)} (Σ_{j≤p} α_j²)^{−s/2} dα`.
    pub bound: f64,
    pub holds: bool,
}

/// Volume of the unit ball in R^m.
pub fn unit_ball_volume(m: usize) -> f64 {
    // V_m = 2π/m · V_{m−2}, V_0 = 1, V_1 = 2.
    let mut v = if m % 2 == 0 { 1.0 } else { 2.0 };
    let mut d = if m % 2 == 0 { 2 } else { 3 };
    while d <= m {
        v *= 2.0 * std::f64::consts::PI / d as f64;
        d += 2;
    }
    v
}

/// Monte Carlo spot check of the energy-integral inequality for a matrix `A`.
pub fn energy_integral_check(a: &DMatrix<f64>, b: &[f64], p: usize, s: f64, samples: usize, seed: u64) -> Result<EnergyIntegralCheck> {
    let m = a.ncols();
    let sv = singular_values(a);
    if p == 0 || p > sv.len() || sv[p - 1] <= 0.0 || !(s > 0.0 && s < p as f64) {
        return Err(LabError::InvalidParameter(format!("need σ_{p} > 0 and 0 < s < p, got s = {s}")));
    }
    let bv = DVector::from_column_slice(b);
    let mut r = rng(seed);
    let (mut lhs, mut c) = (0.0, 0.0);
    for _ in 0..samples {
        let al = DVector::from_vec(sample_alpha_with(m, 1.0, &mut r));
        lhs += (a * &al + &bv).norm().powf(-s);
        c += al.rows(0, p).norm().powf(-s);
    }
    let vol = unit_ball_volume(m);
    let integral = vol * lhs / samples as f64;
    let c = vol * c / samples as f64;
    let bound = c * 3f64.powf(m as f64 - s) / sv[p - 1].powf(s);
    Ok(EnergyIntegralCheck { integral, bound, holds: integral <= bound })
}
