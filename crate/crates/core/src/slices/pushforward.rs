use std::collections::HashMap;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dimension::{default_ladder, index_cloud, least_squares, local_dimension_with, LadderOptions};
use crate::error::{LabError, Result};
use crate::prediction::EmbeddedCloud;
use crate::rng::rng;

/// Grid parameters of the density diagnostic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityOptions {
    pub levels: usize,
    pub refinement: usize,
    /// The coarsest grid is chosen so that the finest one still averages at
    /// least this many samples per cell.
    pub min_mean_count: f64,
    /// Slope of `log max ratio` against `log cells per axis` over the three
    /// finest levels above which the density is reported as diverging.
    pub divergence_slope: f64,
}

impl Default for DensityOptions {
    fn default() -> Self {
        Self { levels: 5, refinement: 2, min_mean_count: 200.0, divergence_slope: 0.3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityLevel {
    pub cells_per_axis: usize,
    /// Largest cell mass divided by the cell's share of the bounding box.
    pub max_ratio: f64,
    pub occupied: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub k: usize,
    pub levels: Vec<DensityLevel>,
    /// Fitted over all levels.
    pub growth_slope: f64,
    /// Fitted over the three finest levels; drives `diverges`.
    pub tail_slope: f64,
    pub diverges: bool,
    pub options: DensityOptions,
}

/// Histograms of the delay-vector distribution on nested axis-aligned grids
/// over the bounding box of `u`.
pub fn pushforward_density_diagnostic(cloud: &EmbeddedCloud, opts: DensityOptions) -> Result<DensityReport> {
    let k = cloud.k();
    if !(1..=3).contains(&k) {
        return Err(LabError::InvalidParameter(format!("density grids support k ∈ {{1,2,3}}, got {k}")));
    }
    if opts.levels < 2 || opts.refinement < 2 {
        return Err(LabError::InvalidParameter("need ≥ 2 levels and refinement ≥ 2".into()));
    }
    let n = cloud.len();
    let finest_cells = n as f64 / opts.min_mean_count;
    let factor = (opts.refinement as f64).powi((opts.levels - 1) as i32);
    let base = ((finest_cells.powf(1.0 / k as f64) / factor).floor() as usize).max(1);
    let mut lo = vec![f64::INFINITY; k];
    let mut hi = vec![f64::NEG_INFINITY; k];
    for i in 0..n {
        for (a, &x) in cloud.u(i).iter().enumerate() {
            lo[a] = lo[a].min(x);
            hi[a] = hi[a].max(x);
        }
    }
    let w = cloud.weights();
    let mut levels = Vec::with_capacity(opts.levels);
    let mut cells = base;
    for _ in 0..opts.levels {
        let mut hist: HashMap<u64, f64> = HashMap::new();
        for i in 0..n {
            let mut key = 0u64;
            for (a, &x) in cloud.u(i).iter().enumerate() {
                let span = hi[a] - lo[a];
                let c = if span > 0.0 { (((x - lo[a]) / span) * cells as f64).floor() as usize } else { 0 };
                key = key * cells as u64 + c.min(cells - 1) as u64;
            }
            *hist.entry(key).or_insert(0.0) += w[i];
        }
        let max_mass = hist.values().copied().fold(0.0, f64::max);
        levels.push(DensityLevel {
            cells_per_axis: cells,
            max_ratio: max_mass * (cells as f64).powi(k as i32),
            occupied: hist.len(),
        });
        cells *= opts.refinement;
    }
    let xs: Vec<f64> = levels.iter().map(|l| (l.cells_per_axis as f64).ln()).collect();
    let ys: Vec<f64> = levels.iter().map(|l| l.max_ratio.ln()).collect();
    let growth_slope = least_squares(&xs, &ys)?.slope;
    let t = xs.len().saturating_sub(3);
    let tail_slope = least_squares(&xs[t..], &ys[t..])?.slope;
    Ok(DensityReport { k, levels, growth_slope, tail_slope, diverges: tail_slope > opts.divergence_slope, options: opts })
}

/// Local dimension of the phase measure at `x` and of the delay-vector
/// distribution at `φ(x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalDimensionPair {
    pub index: usize,
    pub phase: f64,
    pub reconstruction: f64,
}

/// Paired local dimension estimates at `sample_count` random cloud points.
/// Points where either fit fails are skipped.
pub fn pushforward_local_dimension(cloud: &EmbeddedCloud, sample_count: usize, seed: u64) -> Result<Vec<LocalDimensionPair>> {
    pushforward_local_dimension_with(cloud, sample_count, seed, LadderOptions::default(), reconstruction_ladder())
}

/// Ladder for local dimensions in reconstruction space: from the 10-neighbor
/// radius up to 1% of the diameter. Delay maps distort large scales (distant
/// phase regions fold close together), so only small scales are fitted.
pub fn reconstruction_ladder() -> LadderOptions {
    LadderOptions { top_fraction: 0.01, neighbors: 10, ..LadderOptions::default() }
}

pub fn pushforward_local_dimension_with(
    cloud: &EmbeddedCloud,
    sample_count: usize,
    seed: u64,
    phase_ladder: LadderOptions,
    reconstruction_ladder: LadderOptions,
) -> Result<Vec<LocalDimensionPair>> {
    let phase = cloud
        .phase()
        .ok_or_else(|| LabError::InvalidParameter("needs the phase points behind each pair".into()))?;
    let u = cloud.u_measure()?;
    let pidx = index_cloud(phase);
    let uidx = cloud.index();
    let pl = default_ladder(phase, &pidx, phase_ladder)?;
    let ul = default_ladder(&u, uidx, reconstruction_ladder)?;
    let mut picks = sample(&mut rng(seed), cloud.len(), sample_count.min(cloud.len())).into_vec();
    picks.sort_unstable();
    Ok(picks
        .par_iter()
        .filter_map(|&i| {
            let a = local_dimension_with(phase, &pidx, phase.point(i), Some(i), &pl).ok()?;
            let b = local_dimension_with(&u, uidx, u.point(i), Some(i), &ul).ok()?;
            Some(LocalDimensionPair { index: i, phase: a.value, reconstruction: b.value })
        })
        .collect())
}
