use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dimension::{correlation_dimension, DimensionEstimate, Method};
use crate::error::{LabError, Result};
use crate::prediction::{weighted_spread, EmbeddedCloud};
use crate::rng::rng;
use crate::systems::{SampledMeasure, System};

/// Minimum slice size for a dimension estimate.
pub const MIN_SLICE_MEMBERS: usize = 200;

/// The cloud restricted to the slab `‖φ(x) − y‖ ≤ δ` and renormalized.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceEstimate {
    pub center: Vec<f64>,
    pub delta: f64,
    /// Cloud indices of the members, ascending.
    pub members: Vec<usize>,
    phase_dim: usize,
    points: Vec<f64>,
    images: Vec<f64>,
    k: usize,
    /// Original weights of the members; `mass` is their sum.
    raw_weights: Vec<f64>,
    weights: Vec<f64>,
    pub mass: f64,
}

/// Metadata written next to a slice CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceSidecar {
    pub center: Vec<f64>,
    pub delta: f64,
    pub members: usize,
    pub mass: f64,
    pub phase_dim: usize,
    pub k: usize,
}

impl SliceEstimate {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn phase_dim(&self) -> usize {
        self.phase_dim
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.phase_dim..(i + 1) * self.phase_dim]
    }

    pub fn image(&self, i: usize) -> &[f64] {
        &self.images[i * self.k..(i + 1) * self.k]
    }

    /// Renormalized weights (sum to 1).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn raw_weights(&self) -> &[f64] {
        &self.raw_weights
    }

    /// Member phase points as a cloud, with the phase metric of `cloud`.
    pub fn measure(&self, template: &SampledMeasure) -> Result<SampledMeasure> {
        SampledMeasure::new(
            self.phase_dim,
            self.points.clone(),
            self.weights.clone(),
            template.seed,
            template.provenance,
            template.system.clone(),
            template.metric,
        )
    }

    /// Recheck the slab inequality for every member against `cloud`.
    pub fn members_valid(&self, cloud: &EmbeddedCloud) -> bool {
        self.members.iter().all(|&i| {
            let d2: f64 = cloud.u(i).iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum();
            d2 <= self.delta * self.delta
        })
    }

    pub fn sidecar(&self) -> SliceSidecar {
        SliceSidecar {
            center: self.center.clone(),
            delta: self.delta,
            members: self.len(),
            mass: self.mass,
            phase_dim: self.phase_dim,
            k: self.k,
        }
    }

    /// Rows `x…, weight, image…` with a `x0,…,weight,v0,…` header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut head: Vec<String> = (0..self.phase_dim).map(|a| format!("x{a}")).collect();
        head.push("weight".into());
        head.extend((0..self.k).map(|a| format!("v{a}")));
        writeln!(w, "{}", head.join(","))?;
        for i in 0..self.len() {
            let row: Vec<String> = self
                .point(i)
                .iter()
                .chain(std::iter::once(&self.weights[i]))
                .chain(self.image(i))
                .map(|c| format!("{c:.16e}"))
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

pub fn geometric_slice(cloud: &EmbeddedCloud, y: &[f64], delta: f64) -> Result<SliceEstimate> {
    let phase = cloud
        .phase()
        .ok_or_else(|| LabError::InvalidParameter("slices need the phase points behind each pair".into()))?;
    if y.len() != cloud.k() {
        return Err(LabError::DimensionMismatch { expected: cloud.k(), got: y.len() });
    }
    if !(delta >= 0.0) {
        return Err(LabError::InvalidParameter(format!("slab radius {delta} must be nonnegative")));
    }
    let members = cloud.ball(y, delta);
    let w = cloud.weights();
    let raw_weights: Vec<f64> = members.iter().map(|&i| w[i]).collect();
    let mass: f64 = raw_weights.iter().sum();
    if members.is_empty() || !(mass > 0.0) {
        return Err(LabError::EmptySlab);
    }
    let nd = phase.dim();
    let k = cloud.k();
    let mut points = Vec::with_capacity(members.len() * nd);
    let mut images = Vec::with_capacity(members.len() * k);
    for &i in &members {
        points.extend_from_slice(phase.point(i));
        images.extend_from_slice(cloud.v(i));
    }
    let weights = raw_weights.iter().map(|x| x / mass).collect();
    Ok(SliceEstimate {
        center: y.to_vec(),
        delta,
        members,
        phase_dim: nd,
        points,
        images,
        k,
        raw_weights,
        weights,
        mass,
    })
}

/// Correlation dimension of `T^iterate` applied to the slice members.
pub fn slice_dimension(slice: &SliceEstimate, system: &System, phase: &SampledMeasure, iterate: usize) -> Result<DimensionEstimate> {
    if slice.len() < MIN_SLICE_MEMBERS {
        return Err(LabError::TooFewSamples { needed: MIN_SLICE_MEMBERS, have: slice.len() });
    }
    let mut m = slice.measure(phase)?;
    if iterate > 0 {
        let nd = m.dim();
        m = m.map_points(nd, |x, out| {
            let mut p = x.to_vec();
            for _ in 0..iterate {
                p = system.step(&p)?;
            }
            out.copy_from_slice(&p);
            Ok(())
        })?;
    }
    let first = m.point(0).to_vec();
    if m.points().all(|p| p == first.as_slice()) {
        return Ok(DimensionEstimate {
            method: Method::Correlation,
            value: 0.0,
            slope_window: (0.0, 0.0),
            residual: 0.0,
            n_scales: 0,
            window_shrunk: false,
        });
    }
    correlation_dimension(&m, None)
}

/// Weighted standard deviation of the image points.
pub fn image_slice_spread(slice: &SliceEstimate) -> f64 {
    let k = slice.k;
    // Same weights and order as the prediction functionals, so results agree
    // bit for bit with `sigma` on the same ball.
    weighted_spread(k, slice.raw_weights.iter().zip(slice.images.chunks_exact(k)).map(|(&w, v)| (w, v)))
        .unwrap_or(0.0)
}

/// Whether the last two values of a ladder differ by less than `rel`.
pub fn stabilized(values: &[f64], rel: f64) -> bool {
    match values {
        [.., a, b] => (b - a).abs() <= rel * a.abs().max(b.abs()),
        _ => false,
    }
}

/// Average of slice masses of a test set over random slab centers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisintegrationReport {
    pub delta: f64,
    pub centers: usize,
    /// `μ(E)` from the whole cloud.
    pub direct: f64,
    /// Mean over centers of the slice mass of `E`.
    pub averaged: f64,
    pub std_error: f64,
    /// `|averaged − direct| / std_error`.
    pub z: f64,
}

/// Compare `μ(E)` with the average of `μ_{φ,y}(E)` over slab centers
/// `y = φ(x)` with `x` drawn from the cloud. `in_set` selects `E` in phase space.
pub fn disintegration_check<F>(cloud: &EmbeddedCloud, in_set: F, delta: f64, centers: usize, seed: u64) -> Result<DisintegrationReport>
where
    F: Fn(&[f64]) -> bool + Sync,
{
    let phase = cloud
        .phase()
        .ok_or_else(|| LabError::InvalidParameter("slices need the phase points behind each pair".into()))?;
    if centers < 2 {
        return Err(LabError::TooFewSamples { needed: 2, have: centers });
    }
    let w = cloud.weights();
    let inside: Vec<bool> = phase.points().map(&in_set).collect();
    let direct: f64 = w.iter().zip(&inside).filter(|(_, &b)| b).map(|(w, _)| w).sum();
    let mut r = rng(seed);
    let picks: Vec<usize> = (0..centers).map(|_| pick_weighted(w, r.random::<f64>())).collect();
    let masses: Vec<f64> = picks
        .par_iter()
        .map(|&c| {
            let members = cloud.ball(cloud.u(c), delta);
            let total: f64 = members.iter().map(|&i| w[i]).sum();
            let hit: f64 = members.iter().filter(|&&i| inside[i]).map(|&i| w[i]).sum();
            hit / total
        })
        .collect();
    let n = centers as f64;
    let averaged = masses.iter().sum::<f64>() / n;
    let var = masses.iter().map(|m| (m - averaged).powi(2)).sum::<f64>() / (n - 1.0);
    let std_error = (var / n).sqrt();
    let z = if std_error > 0.0 {
        (averaged - direct).abs() / std_error
    } else if averaged == direct {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(DisintegrationReport { delta, centers, direct, averaged, std_error, z })
}

/// Index drawn with probability proportional to its weight.
fn pick_weighted(w: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, x) in w.iter().enumerate() {
        acc += x;
        if u < acc {
            return i;
        }
    }
    w.len() - 1
}
