use std::collections::HashSet;
use std::ops::Range;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::least_squares;
use super::index::NeighborIndex;
use super::ladder::{default_ladder, strided, LadderOptions, ScaleLadder};
use crate::error::{LabError, Result};
use crate::rng::rng;
use crate::systems::SampledMeasure;

/// Reference points used by pair-counting on large clouds.
pub const DEFAULT_MAX_REFS: usize = 4000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Correlation,
    BoxCounting,
    Local,
    Information,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub method: Method,
    pub value: f64,
    /// `(r_min, r_max)` of the scales actually fitted.
    pub slope_window: (f64, f64),
    pub residual: f64,
    pub n_scales: usize,
    /// Some scales in the requested window had empty counts and were dropped.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub window_shrunk: bool,
}

/// Fit `log value` against `sign · log scale` over `window`, dropping scales
/// whose value is not positive.
fn fit_scaling(method: Method, scales: &[f64], values: &[f64], window: Range<usize>, sign: f64) -> Result<DimensionEstimate> {
    let requested = window.len();
    let (mut xs, mut ys, mut rs) = (Vec::new(), Vec::new(), Vec::new());
    for i in window {
        if values[i] > 0.0 {
            xs.push(sign * scales[i].ln());
            ys.push(values[i].ln());
            rs.push(scales[i]);
        }
    }
    if xs.len() < 4 {
        return Err(LabError::Undefined(format!(
            "{method:?} fit has {} usable scales of {requested}",
            xs.len()
        )));
    }
    let f = least_squares(&xs, &ys)?;
    let lo = rs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = rs.iter().copied().fold(0.0, f64::max);
    Ok(DimensionEstimate {
        method,
        value: f.slope,
        slope_window: (lo, hi),
        residual: f.residual,
        n_scales: xs.len(),
        window_shrunk: xs.len() < requested,
    })
}

/// Index over a cloud's points with its own metric.
pub fn index_cloud(cloud: &SampledMeasure) -> NeighborIndex {
    NeighborIndex::new(cloud.coords(), cloud.dim(), cloud.metric)
}

fn ladder_or_default(cloud: &SampledMeasure, index: &NeighborIndex, ladder: Option<&ScaleLadder>) -> Result<ScaleLadder> {
    match ladder {
        Some(l) => Ok(l.clone()),
        None => default_ladder(cloud, index, LadderOptions::default()),
    }
}

/// Position of `d2` among ascending squared scales: the first `j` with `sq[j] ≥ d2`.
#[inline]
fn bin_of(sq_asc: &[f64], d2: f64) -> usize {
    sq_asc.partition_point(|&s| s < d2)
}

/// Weighted mass of closed balls around `q` at each scale (scales decreasing),
/// skipping the point `exclude`.
pub fn ball_masses(cloud: &SampledMeasure, index: &NeighborIndex, q: &[f64], scales: &[f64], exclude: Option<usize>) -> Vec<f64> {
    let n = scales.len();
    let sq_asc: Vec<f64> = scales.iter().rev().map(|s| s * s).collect();
    let mut hist = vec![0.0; n + 1];
    let w = cloud.weights();
    index.for_each_within(q, scales[0], |j, d2| {
        if Some(j) != exclude {
            hist[bin_of(&sq_asc, d2)] += w[j];
        }
    });
    // hist[b] holds mass with distance in (scale_{b−1}, scale_b] (ascending order).
    let mut out = vec![0.0; n];
    let mut acc = 0.0;
    for b in 0..n {
        acc += hist[b];
        out[n - 1 - b] = acc;
    }
    out
}

/// Correlation sums at every scale from reference points `refs`:
/// `Σ_{i∈R} w_i Σ_{j≠i, d≤r} w_j / Σ_{i∈R} w_i (1 − w_i)`. Exact when `R` is
/// the whole cloud.
pub fn correlation_profile(cloud: &SampledMeasure, index: &NeighborIndex, scales: &[f64], refs: &[usize]) -> Vec<f64> {
    let w = cloud.weights();
    let per_ref: Vec<Vec<f64>> = refs
        .par_iter()
        .map(|&i| ball_masses(cloud, index, cloud.point(i), scales, Some(i)))
        .collect();
    let mut num = vec![0.0; scales.len()];
    let mut den = 0.0;
    for (&i, m) in refs.iter().zip(&per_ref) {
        for (a, b) in num.iter_mut().zip(m) {
            *a += w[i] * b;
        }
        den += w[i] * (1.0 - w[i]);
    }
    if den > 0.0 {
        num.iter_mut().for_each(|v| *v = (*v / den).min(1.0));
    }
    num
}

/// Weighted fraction of ordered distinct pairs within distance `r`.
pub fn correlation_sum(cloud: &SampledMeasure, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(LabError::InvalidParameter(format!("radius {r} must be positive")));
    }
    let index = index_cloud(cloud);
    let refs: Vec<usize> = (0..cloud.len()).collect();
    Ok(correlation_profile(cloud, &index, &[r], &refs)[0])
}

pub fn correlation_dimension(cloud: &SampledMeasure, ladder: Option<&ScaleLadder>) -> Result<DimensionEstimate> {
    let index = index_cloud(cloud);
    correlation_dimension_with(cloud, &index, ladder, DEFAULT_MAX_REFS)
}

pub fn correlation_dimension_with(
    cloud: &SampledMeasure,
    index: &NeighborIndex,
    ladder: Option<&ScaleLadder>,
    max_refs: usize,
) -> Result<DimensionEstimate> {
    let ladder = ladder_or_default(cloud, index, ladder)?;
    let refs = strided(cloud.len(), max_refs);
    let c = correlation_profile(cloud, index, ladder.scales(), &refs);
    fit_scaling(Method::Correlation, ladder.scales(), &c, ladder.fit_window(), 1.0)
}

/// Number of occupied cells of an axis-aligned grid of side `delta` anchored at
/// the bounding-box minimum.
pub fn occupied_cells(cloud: &SampledMeasure, lo: &[f64], delta: f64) -> usize {
    let mut cells: HashSet<Vec<i64>> = HashSet::new();
    for p in cloud.points() {
        cells.insert(p.iter().zip(lo).map(|(x, l)| ((x - l) / delta).floor() as i64).collect());
    }
    cells.len()
}

pub fn box_counting_dimension(cloud: &SampledMeasure, ladder: Option<&ScaleLadder>) -> Result<DimensionEstimate> {
    let ladder = match ladder {
        Some(l) => l.clone(),
        None => ladder_or_default(cloud, &index_cloud(cloud), None)?,
    };
    let (lo, _) = cloud.bbox();
    let counts: Vec<f64> = ladder
        .scales()
        .par_iter()
        .map(|&d| occupied_cells(cloud, &lo, d) as f64)
        .collect();
    fit_scaling(Method::BoxCounting, ladder.scales(), &counts, ladder.fit_window(), -1.0)
}

/// Scaling of `μ(B(x, δ))` in `δ`, with the point `exclude` left out of the
/// ball masses.
pub fn local_dimension_with(
    cloud: &SampledMeasure,
    index: &NeighborIndex,
    x: &[f64],
    exclude: Option<usize>,
    ladder: &ScaleLadder,
) -> Result<DimensionEstimate> {
    let m = ball_masses(cloud, index, x, ladder.scales(), exclude);
    if m.iter().all(|&v| v <= 0.0) {
        return Err(LabError::Undefined("every ball around the point is empty".into()));
    }
    fit_scaling(Method::Local, ladder.scales(), &m, ladder.fit_window(), 1.0)
}

pub fn local_dimension(cloud: &SampledMeasure, x: &[f64], ladder: Option<&ScaleLadder>) -> Result<DimensionEstimate> {
    let index = index_cloud(cloud);
    let ladder = ladder_or_default(cloud, &index, ladder)?;
    local_dimension_with(cloud, &index, x, None, &ladder)
}

/// Sample quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let i = h.floor() as usize;
    let j = (i + 1).min(n - 1);
    sorted[i] + (h - i as f64) * (sorted[j] - sorted[i])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HausdorffProxies {
    pub lower: f64,
    pub upper: f64,
    pub q_lo: f64,
    pub q_hi: f64,
    /// Local dimension at each sampled cloud point.
    pub local: Vec<f64>,
}

/// Quantiles of local dimensions over randomly chosen cloud points, standing in
/// for the essential infimum and supremum.
pub fn hausdorff_proxies(
    cloud: &SampledMeasure,
    ladder: Option<&ScaleLadder>,
    sample_count: usize,
    q_lo: f64,
    q_hi: f64,
    seed: u64,
) -> Result<HausdorffProxies> {
    if sample_count < 50 {
        return Err(LabError::TooFewSamples { needed: 50, have: sample_count });
    }
    let index = index_cloud(cloud);
    let ladder = ladder_or_default(cloud, &index, ladder)?;
    let picks = sample(&mut rng(seed), cloud.len(), sample_count.min(cloud.len())).into_vec();
    let dims: Result<Vec<f64>> = picks
        .par_iter()
        .map(|&i| local_dimension_with(cloud, &index, cloud.point(i), Some(i), &ladder).map(|e| e.value))
        .collect();
    let local = dims?;
    let mut sorted = local.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(HausdorffProxies { lower: quantile(&sorted, q_lo), upper: quantile(&sorted, q_hi), q_lo, q_hi, local })
}

/// Slope of the mean log ball mass against `log δ` over sampled centers.
/// Not validated against a reference value.
pub fn information_dimension(
    cloud: &SampledMeasure,
    ladder: Option<&ScaleLadder>,
    sample_count: usize,
    seed: u64,
) -> Result<DimensionEstimate> {
    let index = index_cloud(cloud);
    let ladder = ladder_or_default(cloud, &index, ladder)?;
    let picks = sample(&mut rng(seed), cloud.len(), sample_count.min(cloud.len())).into_vec();
    let masses: Vec<Vec<f64>> = picks
        .par_iter()
        .map(|&i| ball_masses(cloud, &index, cloud.point(i), ladder.scales(), Some(i)))
        .collect();
    let n = ladder.len();
    let mut mean_log = vec![0.0; n];
    for s in 0..n {
        let logs: Vec<f64> = masses.iter().filter(|m| m[s] > 0.0).map(|m| m[s].ln()).collect();
        mean_log[s] = if logs.len() == masses.len() {
            (logs.iter().sum::<f64>() / logs.len() as f64).exp()
        } else {
            0.0
        };
    }
    fit_scaling(Method::Information, ladder.scales(), &mean_log, ladder.fit_window(), 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    /// `Σ_{i≠j} w_i w_j ‖x_i − x_j‖^{−s}`.
    pub value: f64,
    /// The same sum on the first and second halves, weights renormalized.
    pub half_values: [f64; 2],
    /// Zero distances, or more than 10% change between halves and full cloud.
    pub divergent: bool,
}

/// Relative change between the half-cloud mean and the full cloud above which
/// the energy is flagged divergent.
pub const ENERGY_DOUBLING_TOL: f64 = 0.10;
/// Below this size the doubling test is skipped.
pub const ENERGY_MIN_POINTS: usize = 64;

fn pair_energy(cloud: &SampledMeasure, idx: Range<usize>, s: f64) -> f64 {
    let w = cloud.weights();
    let total: f64 = w[idx.clone()].iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let m = cloud.metric;
    let idx_v: Vec<usize> = idx.collect();
    let rows: Vec<f64> = idx_v
        .par_iter()
        .map(|&i| {
            let p = cloud.point(i);
            let mut acc = 0.0;
            for &j in &idx_v {
                if j != i {
                    let d = m.dist(p, cloud.point(j));
                    acc += w[j] * if d > 0.0 { d.powf(-s) } else { f64::INFINITY };
                }
            }
            w[i] * acc
        })
        .collect();
    rows.iter().sum::<f64>() / (total * total)
}

pub fn energy(cloud: &SampledMeasure, s: f64) -> Result<EnergyEstimate> {
    if !(s > 0.0) {
        return Err(LabError::InvalidParameter(format!("energy exponent {s} must be positive")));
    }
    let n = cloud.len();
    let value = pair_energy(cloud, 0..n, s);
    let half_values = [pair_energy(cloud, 0..n / 2, s), pair_energy(cloud, n / 2..n, s)];
    let mut divergent = !value.is_finite();
    if !divergent && n >= ENERGY_MIN_POINTS {
        let half = 0.5 * (half_values[0] + half_values[1]);
        divergent = !half.is_finite() || (value - half).abs() > ENERGY_DOUBLING_TOL * value;
    }
    Ok(EnergyEstimate { value, half_values, divergent })
}

/// `Σ_j w_j ‖x − x_j‖^{−s}` over the cloud, skipping `exclude`.
pub fn local_potential(cloud: &SampledMeasure, x: &[f64], s: f64, exclude: Option<usize>) -> f64 {
    let m = cloud.metric;
    cloud
        .points()
        .zip(cloud.weights())
        .enumerate()
        .filter(|(j, _)| Some(*j) != exclude)
        .map(|(_, (p, w))| {
            let d = m.dist(x, p);
            if d > 0.0 {
                w * d.powf(-s)
            } else {
                f64::INFINITY
            }
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Metric;
    use crate::systems::Provenance;

    fn cloud(dim: usize, coords: Vec<f64>) -> SampledMeasure {
        SampledMeasure::uniform(dim, coords, 0, Provenance::Iid, "identity:1", Metric::Euclidean).unwrap()
    }

    #[test]
    fn two_point_values() {
        let c = cloud(1, vec![0.0, 1.0]);
        assert_eq!(correlation_sum(&c, 0.5).unwrap(), 0.0);
        assert_eq!(correlation_sum(&c, 1.0).unwrap(), 1.0);
        assert!((energy(&c, 1.3).unwrap().value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn duplicated_point_diverges() {
        let c = cloud(1, vec![0.0, 0.3, 0.3]);
        assert!(energy(&c, 0.5).unwrap().divergent);
    }

    #[test]
    fn dirac_cloud_has_dimension_zero() {
        let c = cloud(2, vec![0.25; 2 * 50]);
        let l = ScaleLadder::geometric(1.0, 1e-3, 8).unwrap();
        let e = local_dimension(&c, &[0.25, 0.25], Some(&l)).unwrap();
        assert!(e.value.abs() < 1e-12);
        let one = cloud(2, vec![0.3, 0.7]);
        assert!(box_counting_dimension(&one, Some(&l)).unwrap().value.abs() < 1e-12);
    }

    #[test]
    fn empty_balls_are_an_error() {
        let c = cloud(1, vec![0.0, 0.5]);
        let l = ScaleLadder::geometric(0.1, 0.01, 6).unwrap();
        assert!(local_dimension(&c, &[5.0], Some(&l)).is_err());
    }

    #[test]
    fn quantile_interpolates() {
        let v = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.0);
        assert!((quantile(&v, 0.05) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn estimate_json_shape() {
        let e = DimensionEstimate {
            method: Method::BoxCounting,
            value: 1.0,
            slope_window: (0.1, 0.2),
            residual: 0.0,
            n_scales: 4,
            window_shrunk: false,
        };
        let j = serde_json::to_value(&e).unwrap();
        assert_eq!(j["method"], "box_counting");
        assert_eq!(j.as_object().unwrap().len(), 5);
    }
}
