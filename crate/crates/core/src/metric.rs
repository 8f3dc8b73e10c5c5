use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

/// Distance used on phase-space clouds.
///
/// `AngularFirst` treats coordinate 0 as an angle on `[0, 2π)` and measures it
/// with the circular distance `min(|Δt|, 2π − |Δt|)`; the remaining
/// coordinates are Euclidean.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Euclidean,
    AngularFirst,
}

#[inline]
pub fn angular_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % TAU;
    if d > PI {
        TAU - d
    } else {
        d
    }
}

impl Metric {
    #[inline]
    pub fn dist2(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum(),
            Metric::AngularFirst => {
                let t = angular_gap(a[0], b[0]);
                t * t
                    + a[1..]
                        .iter()
                        .zip(&b[1..])
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<f64>()
            }
        }
    }

    #[inline]
    pub fn dist(self, a: &[f64], b: &[f64]) -> f64 {
        self.dist2(a, b).sqrt()
    }

    /// Distance from `q` to the closed interval `[lo, hi]` along one axis.
    #[inline]
    pub fn axis_gap(self, axis: usize, q: f64, lo: f64, hi: f64) -> f64 {
        if q >= lo && q <= hi {
            return 0.0;
        }
        match (self, axis) {
            (Metric::AngularFirst, 0) => angular_gap(q, lo).min(angular_gap(q, hi)),
            _ => {
                if q < lo {
                    lo - q
                } else {
                    q - hi
                }
            }
        }
    }

    /// Upper bound on the axis distance from `q` to any point of `[lo, hi]`.
    pub fn axis_far(self, axis: usize, q: f64, lo: f64, hi: f64) -> f64 {
        let d = (q - lo).abs().max((q - hi).abs());
        match (self, axis) {
            (Metric::AngularFirst, 0) => d.min(PI),
            _ => d,
        }
    }

    /// Largest possible extent of one axis given its coordinate range.
    pub fn axis_extent(self, axis: usize, lo: f64, hi: f64) -> f64 {
        match (self, axis) {
            (Metric::AngularFirst, 0) => (hi - lo).min(PI),
            _ => hi - lo,
        }
    }
}
