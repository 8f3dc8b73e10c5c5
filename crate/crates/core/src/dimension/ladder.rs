use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::index::NeighborIndex;
use crate::error::{LabError, Result};
use crate::systems::SampledMeasure;

/// Strictly decreasing list of positive radii.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ScaleLadder {
    scales: Vec<f64>,
    /// Scales dropped at each end when fitting.
    trim: usize,
}

impl TryFrom<Vec<f64>> for ScaleLadder {
    type Error = LabError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ScaleLadder> for Vec<f64> {
    fn from(l: ScaleLadder) -> Self {
        l.scales
    }
}

impl ScaleLadder {
    /// Accepts a strictly monotone list in either direction; stored decreasing.
    /// Fits use every scale.
    pub fn new(mut scales: Vec<f64>) -> Result<Self> {
        if scales.len() >= 2 && scales[0] < scales[1] {
            scales.reverse();
        }
        if scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(LabError::InvalidParameter("scales must be positive and finite".into()));
        }
        if scales.windows(2).any(|w| w[1] >= w[0]) {
            return Err(LabError::InvalidParameter("scales must be strictly monotone".into()));
        }
        Ok(Self { scales, trim: 0 })
    }

    /// `count` geometric scales from `r_max` down to `r_min`.
    pub fn geometric(r_max: f64, r_min: f64, count: usize) -> Result<Self> {
        if count < 2 || !(r_min > 0.0 && r_max > r_min) {
            return Err(LabError::InvalidParameter(format!(
                "geometric ladder needs 0 < r_min < r_max and ≥ 2 scales (got {r_min}, {r_max}, {count})"
            )));
        }
        let q = (r_min / r_max).powf(1.0 / (count - 1) as f64);
        let mut scales: Vec<f64> = (0..count).map(|i| r_max * q.powi(i as i32)).collect();
        scales[count - 1] = r_min;
        Self::new(scales)
    }

    /// Drop `trim` scales at each end when fitting.
    pub fn with_trim(mut self, trim: usize) -> Self {
        self.trim = trim;
        self
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.scales[0]
    }

    pub fn min(&self) -> f64 {
        self.scales[self.scales.len() - 1]
    }

    /// Index range used by scaling fits.
    pub fn fit_window(&self) -> Range<usize> {
        if self.scales.len() > 2 * self.trim + 1 {
            self.trim..self.scales.len() - self.trim
        } else {
            0..self.scales.len()
        }
    }
}

/// Farthest point from `from` in the cloud.
fn farthest(cloud: &SampledMeasure, from: &[f64]) -> (usize, f64) {
    let m = cloud.metric;
    cloud
        .points()
        .enumerate()
        .map(|(i, p)| (i, m.dist(from, p)))
        .fold((0, -1.0), |best, c| if c.1 > best.1 { c } else { best })
}

/// Diameter estimate by a double farthest-point sweep (within a factor 2 of
/// the true diameter, exact for many symmetric shapes).
pub fn diameter(cloud: &SampledMeasure) -> f64 {
    let (a, _) = farthest(cloud, cloud.point(0));
    let (b, d) = farthest(cloud, cloud.point(a));
    let (_, d2) = farthest(cloud, cloud.point(b));
    d.max(d2)
}

/// Parameters of the default ladder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderOptions {
    pub count: usize,
    /// Largest scale as a fraction of the diameter.
    pub top_fraction: f64,
    /// Smallest scale is the median distance to this neighbor.
    pub neighbors: usize,
    /// Reference points used for the median.
    pub refs: usize,
    pub trim: usize,
}

impl Default for LadderOptions {
    fn default() -> Self {
        Self { count: 12, top_fraction: 0.25, neighbors: 20, refs: 256, trim: 2 }
    }
}

/// Evenly strided subset of `0..n` of size at most `max`.
pub fn strided(n: usize, max: usize) -> Vec<usize> {
    if n <= max {
        return (0..n).collect();
    }
    (0..max).map(|i| i * n / max).collect()
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Geometric ladder from `top_fraction · diameter` down to the radius at which
/// the median ball holds `neighbors` other points.
pub fn default_ladder(cloud: &SampledMeasure, index: &NeighborIndex, opts: LadderOptions) -> Result<ScaleLadder> {
    let n = cloud.len();
    if n < 2 {
        return Err(LabError::TooFewSamples { needed: 2, have: n });
    }
    let diam = diameter(cloud);
    let kth = opts.neighbors.min(n - 1);
    let mut d: Vec<f64> = strided(n, opts.refs)
        .into_iter()
        .filter_map(|i| index.knn_distances(cloud.point(i), kth, Some(i)).last().copied())
        .collect();
    let r_min = median(&mut d);
    let r_max = opts.top_fraction * diam;
    if !(r_min > 0.0 && r_max > r_min) {
        return Err(LabError::Undefined(format!(
            "cloud has no resolvable scale range (r_min {r_min:.3e}, r_max {r_max:.3e})"
        )));
    }
    Ok(ScaleLadder::geometric(r_max, r_min, opts.count)?.with_trim(opts.trim))
}
