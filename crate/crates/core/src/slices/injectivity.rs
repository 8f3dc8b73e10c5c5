use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dimension::diameter;
use crate::error::{LabError, Result};
use crate::observables::DelayMap;
use crate::prediction::EmbeddedCloud;

/// Stored collisions are capped at this many pairs; the count is not.
pub const MAX_STORED_COLLISIONS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Collision {
    pub i: usize,
    pub j: usize,
    /// Distance of the delay vectors.
    pub du: f64,
    /// Phase-space distance.
    pub dx: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectivityReport {
    pub tol_u: f64,
    pub sep_x: f64,
    /// Pairs `i < j` ordered by `(i, j)`, at most [`MAX_STORED_COLLISIONS`].
    pub collisions: Vec<Collision>,
    pub count: usize,
    /// Weight of the samples taking part in at least one collision.
    pub mass_fraction: f64,
    pub truncated: bool,
}

impl InjectivityReport {
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

/// Lipschitz bound for `φ` from the observable's bound and the system's.
pub fn delay_lipschitz(dm: &DelayMap) -> f64 {
    let lh = dm.observable.lip_estimate();
    let lt = dm.system.spec().lipschitz_bound.max(1.0);
    let s: f64 = (0..dm.k).map(|j| lt.powi(2 * j as i32)).sum();
    lh * s.sqrt()
}

/// Largest ratio `‖φ(x) − φ(x′)‖ / d(x, x′)` over near neighbors `x′` of up
/// to `samples` strided cloud points. A data-driven stand-in for `Lip(φ)`
/// that is much tighter than [`delay_lipschitz`].
pub fn empirical_lipschitz(cloud: &EmbeddedCloud, samples: usize, neighbors: usize) -> Result<f64> {
    let phase = cloud
        .phase()
        .ok_or_else(|| LabError::InvalidParameter("needs the phase points behind each pair".into()))?;
    let index = crate::dimension::index_cloud(phase);
    let ratios: Vec<f64> = crate::dimension::ladder::strided(cloud.len(), samples)
        .par_iter()
        .map(|&i| {
            index
                .knn(phase.point(i), neighbors, Some(i))
                .into_iter()
                .filter(|&(_, d)| d > 0.0)
                .map(|(j, d)| {
                    let du: f64 = cloud.u(i).iter().zip(cloud.u(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                    du.sqrt() / d
                })
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(ratios.into_iter().fold(0.0, f64::max))
}

/// Default radii: `1e-3 · diam(u)` and `0.1 · diam(X)`.
pub fn default_probe_radii(cloud: &EmbeddedCloud, phase_diameter: f64) -> Result<(f64, f64)> {
    let u = cloud.u_measure()?;
    Ok((1e-3 * diameter(&u), 0.1 * phase_diameter))
}

/// Pairs with nearly equal delay vectors but well separated phase points.
/// With `lip = Some(L)` the radii must satisfy `tol_u < sep_x / L`.
pub fn injectivity_probe(cloud: &EmbeddedCloud, tol_u: f64, sep_x: f64, lip: Option<f64>) -> Result<InjectivityReport> {
    let phase = cloud
        .phase()
        .ok_or_else(|| LabError::InvalidParameter("the probe needs the phase points behind each pair".into()))?;
    if !(tol_u >= 0.0 && sep_x > 0.0) {
        return Err(LabError::InvalidParameter(format!("radii tol_u {tol_u}, sep_x {sep_x}")));
    }
    if let Some(l) = lip {
        if !(tol_u < sep_x / l) {
            return Err(LabError::InvalidParameter(format!(
                "tol_u {tol_u:.3e} is not below sep_x / Lip(φ) = {:.3e}",
                sep_x / l
            )));
        }
    }
    let metric = phase.metric;
    let per_point: Vec<Vec<Collision>> = (0..cloud.len())
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::new();
            cloud.index().for_each_within(cloud.u(i), tol_u, |j, d2| {
                if j > i {
                    let dx = metric.dist(phase.point(i), phase.point(j));
                    if dx >= sep_x {
                        out.push(Collision { i, j, du: d2.sqrt(), dx });
                    }
                }
            });
            out.sort_by_key(|c| c.j);
            out
        })
        .collect();
    let w = cloud.weights();
    let mut involved = vec![false; cloud.len()];
    let mut collisions = Vec::new();
    let mut count = 0;
    for list in per_point {
        for c in list {
            involved[c.i] = true;
            involved[c.j] = true;
            count += 1;
            if collisions.len() < MAX_STORED_COLLISIONS {
                collisions.push(c);
            }
        }
    }
    let mass_fraction = w.iter().zip(&involved).filter(|(_, &b)| b).map(|(w, _)| w).sum();
    Ok(InjectivityReport { tol_u, sep_x, truncated: count > collisions.len(), collisions, count, mass_fraction })
}
