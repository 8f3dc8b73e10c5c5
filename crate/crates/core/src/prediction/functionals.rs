use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cloud::EmbeddedCloud;
use crate::dimension::fit::least_squares;
use crate::dimension::ladder::{median, strided};
use crate::dimension::ScaleLadder;
use crate::error::{LabError, Result};

fn empty_ball(cloud: &EmbeddedCloud, y: &[f64]) -> LabError {
    let nearest = cloud.index().nearest(y, None).map_or(f64::INFINITY, |(_, d)| d);
    LabError::EmptyBall { nearest }
}

/// Weighted mean of `k`-vectors. `None` when there are no rows or no mass.
pub fn weighted_mean<'a, I>(k: usize, rows: I) -> Option<Vec<f64>>
where
    I: Iterator<Item = (f64, &'a [f64])>,
{
    let mut total = 0.0;
    let mut acc = vec![0.0; k];
    let mut any = false;
    for (w, v) in rows {
        any = true;
        total += w;
        for (a, vi) in acc.iter_mut().zip(v) {
            *a += w * vi;
        }
    }
    if !any || !(total > 0.0) {
        return None;
    }
    acc.iter_mut().for_each(|a| *a /= total);
    Some(acc)
}

/// Weighted root-mean-square distance of `k`-vectors from their weighted
/// mean, in two passes.
pub fn weighted_spread<'a, I>(k: usize, rows: I) -> Option<f64>
where
    I: Iterator<Item = (f64, &'a [f64])> + Clone,
{
    let c = weighted_mean(k, rows.clone())?;
    let mut total = 0.0;
    let mut acc = 0.0;
    for (w, v) in rows {
        total += w;
        let d2: f64 = v.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
        acc += w * d2;
    }
    Some((acc / total).sqrt())
}

/// `χ` over an explicit member list.
pub fn chi_over(cloud: &EmbeddedCloud, members: &[usize]) -> Option<Vec<f64>> {
    let w = cloud.weights();
    weighted_mean(cloud.k(), members.iter().map(|&i| (w[i], cloud.v(i))))
}

/// `σ` over an explicit member list.
pub fn sigma_over(cloud: &EmbeddedCloud, members: &[usize]) -> Option<f64> {
    let w = cloud.weights();
    weighted_spread(cloud.k(), members.iter().map(|&i| (w[i], cloud.v(i))))
}

pub fn chi(cloud: &EmbeddedCloud, y: &[f64], eps: f64) -> Result<Vec<f64>> {
    check_query(cloud, y, eps)?;
    chi_over(cloud, &cloud.ball(y, eps)).ok_or_else(|| empty_ball(cloud, y))
}

pub fn sigma(cloud: &EmbeddedCloud, y: &[f64], eps: f64) -> Result<f64> {
    check_query(cloud, y, eps)?;
    sigma_over(cloud, &cloud.ball(y, eps)).ok_or_else(|| empty_ball(cloud, y))
}

fn check_query(cloud: &EmbeddedCloud, y: &[f64], eps: f64) -> Result<()> {
    if y.len() != cloud.k() {
        return Err(LabError::DimensionMismatch { expected: cloud.k(), got: y.len() });
    }
    if !(eps >= 0.0) {
        return Err(LabError::InvalidParameter(format!("radius {eps} must be nonnegative")));
    }
    Ok(())
}

/// Exceedance mass together with the mass of samples whose ball was empty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exceedance {
    pub fraction: f64,
    pub empty_fraction: f64,
}

/// `μ{x : σ_ε(φ(x)) > δ}` evaluated exactly over every sample.
pub fn exceedance(cloud: &EmbeddedCloud, delta: f64, eps: f64) -> Result<Exceedance> {
    if !(delta > 0.0 && eps > 0.0) {
        return Err(LabError::InvalidParameter("δ and ε must be positive".into()));
    }
    let w = cloud.weights();
    let flags: Vec<(f64, f64)> = (0..cloud.len())
        .into_par_iter()
        .map(|i| match sigma_over(cloud, &cloud.ball(cloud.u(i), eps)) {
            Some(s) if s > delta => (w[i], 0.0),
            Some(_) => (0.0, 0.0),
            None => (0.0, w[i]),
        })
        .collect();
    let fraction = flags.iter().map(|f| f.0).sum();
    let empty_fraction = flags.iter().map(|f| f.1).sum();
    Ok(Exceedance { fraction, empty_fraction })
}

/// Options for scans over ε and δ ladders.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    /// Samples at which `σ` is evaluated (an evenly strided subset).
    pub max_queries: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { max_queries: 10_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceCurve {
    pub delta: f64,
    pub epsilons: Vec<f64>,
    pub fractions: Vec<f64>,
    pub empty_ball_fractions: Vec<f64>,
    /// Number of samples the fractions are estimated from.
    pub n_queries: usize,
}

impl ExceedanceCurve {
    /// CSV with columns `epsilon,fraction,empty_ball_fraction,delta`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epsilon,fraction,empty_ball_fraction,delta\n");
        for i in 0..self.epsilons.len() {
            s.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e}\n",
                self.epsilons[i], self.fractions[i], self.empty_ball_fractions[i], self.delta
            ));
        }
        s
    }
}

/// `σ_ε` at each query sample for every scale, `None` when the ball is
/// empty. Moments are taken from prefix sums in tree order so that index
/// nodes inside a ball cost O(1); values agree with [`sigma`] up to rounding in `σ²`.
pub fn sigma_profiles(cloud: &EmbeddedCloud, scales: &[f64], queries: &[usize]) -> Vec<Vec<Option<f64>>> {
    let k = cloud.k();
    let w = cloud.weights();
    let n = cloud.len();
    // Center v globally to keep the prefix sums small.
    let mut mean = vec![0.0; k];
    for i in 0..n {
        for (m, vi) in mean.iter_mut().zip(cloud.v(i)) {
            *m += w[i] * vi;
        }
    }
    let stride = k + 2;
    let mut prefix = vec![0.0; (n + 1) * stride];
    for (pos, &i) in cloud.index().tree_order().iter().enumerate() {
        let (done, rest) = prefix.split_at_mut((pos + 1) * stride);
        let prev = &done[pos * stride..];
        let row = &mut rest[..stride];
        let mut s2 = 0.0;
        row[0] = prev[0] + w[i];
        for a in 0..k {
            let d = cloud.v(i)[a] - mean[a];
            row[1 + a] = prev[1 + a] + w[i] * d;
            s2 += d * d;
        }
        row[k + 1] = prev[k + 1] + w[i] * s2;
    }
    queries
        .par_iter()
        .map(|&q| {
            let mut acc = vec![0.0; stride];
            let mut pts = vec![0.0; stride];
            scales
                .iter()
                .map(|&eps| {
                    acc.iter_mut().for_each(|a| *a = 0.0);
                    pts.iter_mut().for_each(|a| *a = 0.0);
                    cloud.index().for_each_block_within(
                        cloud.u(q),
                        eps,
                        |start, end| {
                            for a in 0..stride {
                                acc[a] += prefix[end * stride + a] - prefix[start * stride + a];
                            }
                        },
                        |j, _| {
                            let mut s2 = 0.0;
                            pts[0] += w[j];
                            for a in 0..k {
                                let d = cloud.v(j)[a] - mean[a];
                                pts[1 + a] += w[j] * d;
                                s2 += d * d;
                            }
                            pts[k + 1] += w[j] * s2;
                        },
                    );
                    acc.iter_mut().zip(&pts).for_each(|(a, p)| *a += p);
                    let wt = acc[0];
                    (wt > 0.0).then(|| {
                        let m1: f64 = acc[1..=k].iter().map(|m| (m / wt) * (m / wt)).sum();
                        (acc[k + 1] / wt - m1).max(0.0).sqrt()
                    })
                })
                .collect()
        })
        .collect()
}

/// Query subset used by scans.
pub fn scan_queries(cloud: &EmbeddedCloud, opts: ScanOptions) -> Vec<usize> {
    strided(cloud.len(), opts.max_queries)
}

/// Exceedance curves for each `δ` from one shared set of `σ` profiles.
pub fn exceedance_scan(cloud: &EmbeddedCloud, deltas: &[f64], ladder: &ScaleLadder, opts: ScanOptions) -> Result<Vec<ExceedanceCurve>> {
    if ladder.len() < 6 {
        return Err(LabError::InvalidParameter(format!("ε ladder has {} scales, need ≥ 6", ladder.len())));
    }
    let queries = scan_queries(cloud, opts);
    let prof = sigma_profiles(cloud, ladder.scales(), &queries);
    Ok(curves_from_profiles(cloud, &queries, &prof, deltas, ladder.scales()))
}

pub fn curves_from_profiles(
    cloud: &EmbeddedCloud,
    queries: &[usize],
    prof: &[Vec<Option<f64>>],
    deltas: &[f64],
    scales: &[f64],
) -> Vec<ExceedanceCurve> {
    let w = cloud.weights();
    let wq: f64 = queries.iter().map(|&q| w[q]).sum();
    deltas
        .iter()
        .map(|&delta| {
            let mut fractions = vec![0.0; scales.len()];
            let mut empty = vec![0.0; scales.len()];
            for (&q, p) in queries.iter().zip(prof) {
                for (s, sig) in p.iter().enumerate() {
                    match sig {
                        Some(v) if *v > delta => fractions[s] += w[q],
                        Some(_) => {}
                        None => empty[s] += w[q],
                    }
                }
            }
            fractions.iter_mut().for_each(|f| *f /= wq);
            empty.iter_mut().for_each(|f| *f /= wq);
            ExceedanceCurve {
                delta,
                epsilons: scales.to_vec(),
                fractions,
                empty_ball_fractions: empty,
                n_queries: queries.len(),
            }
        })
        .collect()
}

/// Parameters of the default ε ladder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonLadderOptions {
    pub count: usize,
    /// Largest ε as a multiple of the RMS spread of `u`.
    pub top_fraction: f64,
    /// Smallest ε is where the median ball holds this many samples.
    pub min_members: usize,
    /// Quantile of nearest-neighbor distances used as an absolute floor.
    pub floor_quantile: f64,
    pub refs: usize,
}

impl Default for EpsilonLadderOptions {
    fn default() -> Self {
        Self { count: 12, top_fraction: 0.2, min_members: 5, floor_quantile: 0.001, refs: 512 }
    }
}

pub fn default_epsilon_ladder(cloud: &EmbeddedCloud, opts: EpsilonLadderOptions) -> Result<ScaleLadder> {
    let n = cloud.len();
    let refs = strided(n, opts.refs);
    let kth = opts.min_members.saturating_sub(1).clamp(1, n.saturating_sub(1).max(1));
    let mut kd: Vec<f64> = refs
        .iter()
        .filter_map(|&i| cloud.index().knn_distances(cloud.u(i), kth, Some(i)).last().copied())
        .collect();
    let r_members = median(&mut kd);
    let mut nn: Vec<f64> = refs
        .iter()
        .filter_map(|&i| cloud.index().knn_distances(cloud.u(i), 1, Some(i)).first().copied())
        .collect();
    nn.sort_by(f64::total_cmp);
    let floor = crate::dimension::quantile(&nn, opts.floor_quantile);
    let r_min = r_members.max(floor);
    let r_max = opts.top_fraction * cloud.u_spread();
    if !(r_min > 0.0 && r_max > r_min) {
        return Err(LabError::Undefined(format!("no resolvable ε range (r_min {r_min:.3e}, r_max {r_max:.3e})")));
    }
    ScaleLadder::geometric(r_max, r_min, opts.count)
}

/// Geometric δ ladder from `hi · spread` down to `lo · spread`.
pub fn default_delta_ladder(cloud: &EmbeddedCloud, count: usize, hi: f64, lo: f64) -> Vec<f64> {
    let s = cloud.v_spread();
    if count == 1 {
        return vec![hi * s];
    }
    let q = (lo / hi).powf(1.0 / (count - 1) as f64);
    (0..count).map(|i| hi * s * q.powi(i as i32)).collect()
}

/// Default δ ladder: six values from `0.5·std(v)` to `0.01·std(v)`.
pub fn delta_ladder(cloud: &EmbeddedCloud) -> Vec<f64> {
    default_delta_ladder(cloud, 6, 0.5, 0.01)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Collapses,
    BoundedBelow,
    Inconclusive,
}

/// Engineering thresholds of [`predictability_verdict`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictRule {
    /// Collapse: last two fractions below `max(collapse_floor, collapse_count / n)`.
    pub collapse_floor: f64,
    pub collapse_count: f64,
    /// Bounded below: last three fractions ≥ `floor`...
    pub floor: f64,
    /// ...and the last is at least `(1 − trend_band)` times the first of them.
    pub trend_band: f64,
}

impl Default for VerdictRule {
    fn default() -> Self {
        Self { collapse_floor: 0.01, collapse_count: 20.0, floor: 0.05, trend_band: 0.2 }
    }
}

pub fn predictability_verdict(curve: &ExceedanceCurve, rule: VerdictRule) -> Verdict {
    let f = &curve.fractions;
    let n = f.len();
    if n < 3 {
        return Verdict::Inconclusive;
    }
    let thr = rule.collapse_floor.max(rule.collapse_count / curve.n_queries.max(1) as f64);
    if f[n - 1] < thr && f[n - 2] < thr {
        return Verdict::Collapses;
    }
    let tail = &f[n - 3..];
    if tail.iter().all(|&v| v >= rule.floor) && tail[2] >= (1.0 - rule.trend_band) * tail[0] {
        return Verdict::BoundedBelow;
    }
    Verdict::Inconclusive
}

/// Combine per-δ verdicts of one observable. Bounded below wins if any δ
/// shows it; collapse needs at least one collapsing δ and no bounded one.
pub fn aggregate_verdict(per_delta: &[Verdict]) -> Verdict {
    if per_delta.contains(&Verdict::BoundedBelow) {
        Verdict::BoundedBelow
    } else if per_delta.contains(&Verdict::Collapses) {
        Verdict::Collapses
    } else {
        Verdict::Inconclusive
    }
}

/// Log-log slope of an exceedance curve over its usable scales.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub residual: Option<f64>,
    pub n_scales: usize,
    /// `(ε_min, ε_max)` of the fitted scales.
    pub window: Option<(f64, f64)>,
    pub unfit: bool,
}

/// Fit `log fraction` against `log ε` over scales with fraction in `(10/n, 0.5)`.
pub fn scaling_exponent(curve: &ExceedanceCurve) -> ScalingFit {
    let lo = 10.0 / curve.n_queries.max(1) as f64;
    let pts: Vec<(f64, f64)> = curve
        .epsilons
        .iter()
        .zip(&curve.fractions)
        .filter(|(_, &f)| f > lo && f < 0.5)
        .map(|(&e, &f)| (e, f))
        .collect();
    if pts.len() < 4 {
        return ScalingFit { slope: None, intercept: None, residual: None, n_scales: pts.len(), window: None, unfit: true };
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    match least_squares(&xs, &ys) {
        Ok(f) => {
            let emin = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
            let emax = pts.iter().map(|p| p.0).fold(0.0, f64::max);
            ScalingFit {
                slope: Some(f.slope),
                intercept: Some(f.intercept),
                residual: Some(f.residual),
                n_scales: pts.len(),
                window: Some((emin, emax)),
                unfit: false,
            }
        }
        Err(_) => ScalingFit { slope: None, intercept: None, residual: None, n_scales: pts.len(), window: None, unfit: true },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub trajectory: Vec<Vec<f64>>,
    /// An empty ball stopped the iteration early.
    pub truncated: bool,
}

/// Zeroth-order local-average predictor: `y_{i+1} = χ_ε(y_i)`.
pub fn fs_predict(cloud: &EmbeddedCloud, y: &[f64], eps: f64, steps: usize) -> Result<Forecast> {
    check_query(cloud, y, eps)?;
    let mut cur = y.to_vec();
    let mut trajectory = Vec::with_capacity(steps);
    for _ in 0..steps {
        match chi_over(cloud, &cloud.ball(&cur, eps)) {
            Some(next) => {
                trajectory.push(next.clone());
                cur = next;
            }
            None => return Ok(Forecast { trajectory, truncated: true }),
        }
    }
    Ok(Forecast { trajectory, truncated: false })
}
