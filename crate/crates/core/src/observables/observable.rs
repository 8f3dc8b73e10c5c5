use rand_distr::{Distribution, StandardNormal};
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::basis::{BasisSpec, MonomialBasis};
use crate::error::{LabError, Result};
use crate::rng::rng;
use crate::systems::solenoid::torus_chart;
use crate::systems::System;

/// Coordinates in which probe monomials are evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Chart {
    Raw,
    /// `((2 + Re z) cos t, (2 + Re z) sin t, Im z)` for solenoid points.
    Torus,
}

impl Chart {
    /// Lipschitz constant of the chart with respect to the phase metric.
    fn lipschitz(self) -> f64 {
        match self {
            Chart::Raw => 1.0,
            Chart::Torus => 10f64.sqrt(),
        }
    }
}

/// Probe monomials composed with a chart and the affine map sending a box to
/// `[−1, 1]^N`.
#[derive(Clone, Debug, PartialEq)]
pub struct Probes {
    pub basis: MonomialBasis,
    pub chart: Chart,
    center: Vec<f64>,
    inv_half: Vec<f64>,
}

impl Probes {
    /// Monomials of the raw coordinates, no rescaling.
    pub fn raw(basis: MonomialBasis) -> Self {
        let n = basis.vars();
        Self { basis, chart: Chart::Raw, center: vec![0.0; n], inv_half: vec![1.0; n] }
    }

    /// Monomials on the system's probe chart, rescaled from its probe box.
    pub fn for_system(basis: MonomialBasis, system: &System) -> Result<Self> {
        let n = system.dim();
        if basis.vars() != n {
            return Err(LabError::DimensionMismatch { expected: n, got: basis.vars() });
        }
        let (lo, hi) = system.probe_box();
        let chart = if system.metric() == crate::Metric::AngularFirst { Chart::Torus } else { Chart::Raw };
        let center = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let inv_half = lo.iter().zip(&hi).map(|(a, b)| 2.0 / (b - a)).collect();
        Ok(Self { basis, chart, center, inv_half })
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// Chart coordinates of a phase point (before rescaling).
    pub fn chart_point(&self, x: &[f64], out: &mut [f64]) {
        match self.chart {
            Chart::Raw => out[..x.len()].copy_from_slice(x),
            Chart::Torus => out[..3].copy_from_slice(&torus_chart(x)),
        }
    }

    /// All probe values `h_j(x)`.
    pub fn eval_into(&self, x: &[f64], y: &mut [f64], out: &mut [f64]) {
        self.chart_point(x, y);
        self.rescale(y);
        self.basis.eval_into(y, out);
    }

    /// Affine map from the probe box onto `[−1, 1]^N`, in place.
    #[inline]
    pub fn rescale(&self, y: &mut [f64]) {
        for ((yi, c), s) in y.iter_mut().zip(&self.center).zip(&self.inv_half) {
            *yi = (*yi - c) * s;
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.basis.vars()];
        let mut out = vec![0.0; self.len()];
        self.eval_into(x, &mut y, &mut out);
        out
    }

    /// Lipschitz bound of `h_j` in the phase metric.
    pub fn lipschitz(&self, j: usize) -> f64 {
        self.chart.lipschitz() * self.basis.lipschitz_on_cube(j, &self.inv_half)
    }
}

/// Unperturbed observable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaseObservable {
    Zero,
    /// Cosine of coordinate 0 (the solenoid angle).
    CosAngle,
    Coord(usize),
}

impl BaseObservable {
    pub fn name(self) -> String {
        match self {
            BaseObservable::Zero => "zero".into(),
            BaseObservable::CosAngle => "cos_angle".into(),
            BaseObservable::Coord(i) => format!("coord_{i}"),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(Self::Zero),
            "cos_angle" => Ok(Self::CosAngle),
            _ => s
                .strip_prefix("coord_")
                .and_then(|i| i.parse().ok())
                .map(Self::Coord)
                .ok_or_else(|| LabError::InvalidParameter(format!("unknown observable '{s}'"))),
        }
    }

    #[inline]
    pub fn eval(self, x: &[f64]) -> f64 {
        match self {
            BaseObservable::Zero => 0.0,
            BaseObservable::CosAngle => x[0].cos(),
            BaseObservable::Coord(i) => x[i],
        }
    }

    fn lipschitz(self) -> f64 {
        match self {
            BaseObservable::Zero => 0.0,
            _ => 1.0,
        }
    }
}

impl Serialize for BaseObservable {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for BaseObservable {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Self::parse(&s).map_err(serde::de::Error::custom)
    }
}

fn one() -> f64 {
    1.0
}

fn is_one(x: &f64) -> bool {
    *x == 1.0
}

/// Serialized observable: `{basis: {N, d}, alpha: [...], base: "..."}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableSpec {
    pub basis: BasisSpec,
    #[serde(default)]
    pub alpha: Vec<f64>,
    pub base: BaseObservable,
    /// Multiplier on the base observable.
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub gain: f64,
}

/// `h_α = gain·h + Σ α_j h_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    pub base: BaseObservable,
    pub gain: f64,
    alpha: Vec<f64>,
    probes: Probes,
    lip_estimate: f64,
    perturbed: bool,
}

/// Reusable buffers for [`Observable::eval_with`].
#[derive(Clone, Debug)]
pub struct Scratch {
    y: Vec<f64>,
    vals: Vec<f64>,
}

impl Observable {
    pub fn new(base: BaseObservable, probes: Probes) -> Self {
        let m = probes.len();
        Self { base, gain: 1.0, alpha: vec![0.0; m], probes, lip_estimate: base.lipschitz(), perturbed: false }
    }

    /// Bind a serialized observable to a system's probe chart.
    pub fn from_spec(spec: &ObservableSpec, system: &System) -> Result<Self> {
        if let BaseObservable::Coord(i) = spec.base {
            if i >= system.dim() {
                return Err(LabError::InvalidParameter(format!(
                    "coord_{i} out of range for a {}-dimensional system",
                    system.dim()
                )));
            }
        }
        let probes = Probes::for_system(MonomialBasis::from_spec(spec.basis)?, system)?;
        let mut h = Self::new(spec.base, probes).scaled(spec.gain)?;
        if !spec.alpha.is_empty() {
            h = h.perturb(&spec.alpha)?;
        }
        Ok(h)
    }

    pub fn spec(&self) -> ObservableSpec {
        ObservableSpec {
            basis: self.probes.basis.spec(),
            alpha: self.alpha.clone(),
            base: self.base,
            gain: self.gain,
        }
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn probes(&self) -> &Probes {
        &self.probes
    }

    pub fn lip_estimate(&self) -> f64 {
        self.lip_estimate
    }

    /// Add `delta` to the perturbation coefficients.
    pub fn perturb(&self, delta: &[f64]) -> Result<Self> {
        if delta.len() != self.alpha.len() {
            return Err(LabError::DimensionMismatch { expected: self.alpha.len(), got: delta.len() });
        }
        let mut h = self.clone();
        for (j, (a, d)) in h.alpha.iter_mut().zip(delta).enumerate() {
            *a += d;
            h.lip_estimate += d.abs() * self.probes.lipschitz(j);
        }
        h.perturbed = h.alpha.iter().any(|&a| a != 0.0);
        Ok(h)
    }

    /// `c · h_α`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !c.is_finite() || c == 0.0 {
            return Err(LabError::InvalidParameter(format!("scale factor {c}")));
        }
        let mut h = self.clone();
        h.gain *= c;
        h.alpha.iter_mut().for_each(|a| *a *= c);
        h.lip_estimate *= c.abs();
        Ok(h)
    }

    pub fn scratch(&self) -> Scratch {
        Scratch { y: vec![0.0; self.probes.basis.vars()], vals: vec![0.0; self.probes.len()] }
    }

    #[inline]
    pub fn eval_with(&self, x: &[f64], s: &mut Scratch) -> f64 {
        let b = self.gain * self.base.eval(x);
        if !self.perturbed {
            return b;
        }
        self.probes.eval_into(x, &mut s.y, &mut s.vals);
        let mut acc = 0.0;
        for (a, v) in self.alpha.iter().zip(&s.vals) {
            acc += a * v;
        }
        b + acc
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.eval_with(x, &mut self.scratch())
    }
}

/// Uniform sample from the `m`-dimensional ball of the given radius.
pub fn sample_alpha(m: usize, radius: f64, seed: u64) -> Result<Vec<f64>> {
    if !(radius > 0.0) {
        return Err(LabError::InvalidParameter(format!("radius {radius} must be positive")));
    }
    let mut r = rng(seed);
    Ok(sample_alpha_with(m, radius, &mut r))
}

pub fn sample_alpha_with<R: Rng + ?Sized>(m: usize, radius: f64, r: &mut R) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..m).map(|_| StandardNormal.sample(r)).collect();
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            let u: f64 = r.random();
            let scale = radius * u.powf(1.0 / m as f64) / norm;
            return g.into_iter().map(|x| x * scale).collect();
        }
    }
}
