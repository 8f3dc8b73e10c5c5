//! Dynamical systems and samplers for their invariant measures.

pub mod ifs;
pub mod measure;
pub mod solenoid;
pub mod union_chain;

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use ifs::{Ifs, Similarity, ATTRACTOR_TOL};
pub use measure::{Provenance, SampledMeasure};
pub use union_chain::UnionChain;

use crate::error::{LabError, Result};
use crate::metric::Metric;
use crate::rng::{rng, substream};

/// Default number of discarded iterates before recording a solenoid orbit.
pub const DEFAULT_BURN_IN: usize = 1000;

/// Points drawn per independent random stream in i.i.d. samplers.
const CHUNK: usize = 4096;

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemKind {
    /// `T̃` on the solid torus, or `T̃²` when `squared`.
    Solenoid {
        #[serde(default = "default_true")]
        squared: bool,
    },
    CornerCantorShift { lambda: f64 },
    /// `x ↦ |x − 1/2|` on `[0, 1]`.
    TentHalf,
    Identity { dim: usize },
    UnionChain { lambda1: f64, lambda2: f64 },
    SelfSimilarIfs { maps: Vec<Similarity> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct SystemSpec {
    #[serde(flatten)]
    pub kind: SystemKind,
    pub ambient_dim: usize,
    pub lipschitz_bound: f64,
}

#[derive(Deserialize)]
struct RawSpec {
    #[serde(flatten)]
    kind: SystemKind,
    #[serde(default)]
    ambient_dim: Option<usize>,
    #[serde(default)]
    lipschitz_bound: Option<f64>,
}

impl TryFrom<RawSpec> for SystemSpec {
    type Error = LabError;

    fn try_from(raw: RawSpec) -> Result<Self> {
        let spec = SystemSpec::new(raw.kind)?;
        if let Some(d) = raw.ambient_dim {
            if d != spec.ambient_dim {
                return Err(LabError::DimensionMismatch { expected: spec.ambient_dim, got: d });
            }
        }
        match raw.lipschitz_bound {
            Some(l) if !(l > 0.0 && l.is_finite()) => {
                Err(LabError::InvalidParameter(format!("lipschitz_bound {l} must be positive")))
            }
            Some(l) => Ok(SystemSpec { lipschitz_bound: l, ..spec }),
            None => Ok(spec),
        }
    }
}

pub fn validate_corner_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.25 && lambda < 0.5 {
        Ok(())
    } else {
        Err(LabError::InvalidParameter(format!("four-corner ratio {lambda} outside (1/4, 1/2)")))
    }
}

impl SystemSpec {
    /// Validate parameters and fill in the ambient dimension and Lipschitz bound.
    pub fn new(kind: SystemKind) -> Result<Self> {
        let (ambient_dim, lipschitz_bound) = match &kind {
            // |DT̃| ≤ √(2² + (1/2)²) + 1/4: the angle doubles and enters z with
            // slope 1/2, the fiber contracts by 1/4. T̃² squares the bound.
            SystemKind::Solenoid { squared } => {
                let l = 4.25f64.sqrt() + 0.25;
                (3, if *squared { l * l } else { l })
            }
            SystemKind::CornerCantorShift { lambda } => {
                validate_corner_lambda(*lambda)?;
                // Across cells distances shrink, within a cell they grow by 1/λ.
                (2, 1.0 / lambda)
            }
            SystemKind::TentHalf => (1, 1.0),
            SystemKind::Identity { dim } => {
                if *dim == 0 {
                    return Err(LabError::InvalidParameter("identity needs dim ≥ 1".into()));
                }
                (*dim, 1.0)
            }
            SystemKind::UnionChain { lambda1, lambda2 } => {
                let u = UnionChain::new(*lambda1, *lambda2)?;
                (3, u.lipschitz_bound())
            }
            SystemKind::SelfSimilarIfs { maps } => {
                let ifs = Ifs::new(maps.clone())?;
                let rmin = ifs.maps().iter().map(|m| m.ratio).fold(1.0, f64::min);
                (ifs.dim(), 1.0 / rmin)
            }
        };
        Ok(Self { kind, ambient_dim, lipschitz_bound })
    }

    pub fn solenoid() -> Self {
        Self::new(SystemKind::Solenoid { squared: true }).expect("valid")
    }

    pub fn corner_cantor(lambda: f64) -> Result<Self> {
        Self::new(SystemKind::CornerCantorShift { lambda })
    }

    pub fn tent() -> Self {
        Self::new(SystemKind::TentHalf).expect("valid")
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(SystemKind::Identity { dim })
    }

    /// Tag written into CSV headers.
    pub fn tag(&self) -> String {
        match &self.kind {
            SystemKind::Solenoid { squared: true } => "solenoid".into(),
            SystemKind::Solenoid { squared: false } => "solenoid_single".into(),
            SystemKind::CornerCantorShift { lambda } => format!("corner_cantor:{lambda}"),
            SystemKind::TentHalf => "tent".into(),
            SystemKind::Identity { dim } => format!("identity:{dim}"),
            SystemKind::UnionChain { lambda1, lambda2 } => format!("union_chain:{lambda1}:{lambda2}"),
            SystemKind::SelfSimilarIfs { .. } => "ifs".into(),
        }
    }

    /// Inverse of [`tag`](Self::tag); the general IFS cannot be recovered from its tag.
    pub fn from_tag(tag: &str) -> Result<Self> {
        let parts: Vec<&str> = tag.split(':').collect();
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| LabError::InvalidParameter(format!("bad number in system tag '{tag}': {e}")))
        };
        match parts.as_slice() {
            ["solenoid"] => Ok(Self::solenoid()),
            ["solenoid_single"] => Self::new(SystemKind::Solenoid { squared: false }),
            ["corner_cantor", l] => Self::corner_cantor(num(l)?),
            ["tent"] => Ok(Self::tent()),
            ["identity", d] => Self::identity(
                d.parse().map_err(|e| LabError::InvalidParameter(format!("bad dim in '{tag}': {e}")))?,
            ),
            ["union_chain", a, b] => Self::new(SystemKind::UnionChain { lambda1: num(a)?, lambda2: num(b)? }),
            _ => Err(LabError::InvalidParameter(format!("unknown system tag '{tag}'"))),
        }
    }

    pub fn build(&self) -> Result<System> {
        let dynamics = match &self.kind {
            SystemKind::Solenoid { squared } => Dynamics::Solenoid { squared: *squared },
            SystemKind::CornerCantorShift { lambda } => Dynamics::Shift(Ifs::four_corner(*lambda)?),
            SystemKind::TentHalf => Dynamics::Tent,
            SystemKind::Identity { .. } => Dynamics::Identity,
            SystemKind::UnionChain { lambda1, lambda2 } => Dynamics::Chain(UnionChain::new(*lambda1, *lambda2)?),
            SystemKind::SelfSimilarIfs { maps } => Dynamics::Shift(Ifs::new(maps.clone())?),
        };
        Ok(System { spec: self.clone(), dynamics })
    }
}

#[derive(Clone, Debug)]
enum Dynamics {
    Solenoid { squared: bool },
    Shift(Ifs),
    Tent,
    Identity,
    Chain(UnionChain),
}

/// A validated system ready to iterate and sample.
#[derive(Clone, Debug)]
pub struct System {
    spec: SystemSpec,
    dynamics: Dynamics,
}

/// Options for [`System::sample`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleOptions {
    pub burn_in: usize,
    /// Coding depth for IFS samplers; `None` picks the depth reaching 1e-9.
    pub depth: Option<usize>,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self { burn_in: DEFAULT_BURN_IN, depth: None }
    }
}

impl System {
    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.ambient_dim
    }

    pub fn tag(&self) -> String {
        self.spec.tag()
    }

    pub fn metric(&self) -> Metric {
        match self.dynamics {
            Dynamics::Solenoid { .. } => Metric::AngularFirst,
            _ => Metric::Euclidean,
        }
    }

    pub fn ifs(&self) -> Option<&Ifs> {
        match &self.dynamics {
            Dynamics::Shift(ifs) => Some(ifs),
            _ => None,
        }
    }

    pub fn union_chain(&self) -> Option<&UnionChain> {
        match &self.dynamics {
            Dynamics::Chain(u) => Some(u),
            _ => None,
        }
    }

    pub fn step_into(&self, p: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.dim();
        if p.len() != n {
            return Err(LabError::DimensionMismatch { expected: n, got: p.len() });
        }
        match &self.dynamics {
            Dynamics::Solenoid { squared } => solenoid::solenoid_step_into(p, *squared, out),
            Dynamics::Shift(ifs) => {
                let q = ifs.shift_step(p, ATTRACTOR_TOL)?;
                out[..n].copy_from_slice(&q);
                Ok(())
            }
            Dynamics::Tent => {
                if !(-ATTRACTOR_TOL..=1.0 + ATTRACTOR_TOL).contains(&p[0]) {
                    return Err(LabError::OutOfDomain(format!("{} outside [0, 1]", p[0])));
                }
                out[0] = tent_step(p[0]);
                Ok(())
            }
            Dynamics::Identity => {
                out[..n].copy_from_slice(p);
                Ok(())
            }
            Dynamics::Chain(u) => u.step_into(p, out),
        }
    }

    pub fn step(&self, p: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.step_into(p, &mut out)?;
        Ok(out)
    }

    /// `x, Tx, …, T^{len−1}x` as flat coordinates.
    pub fn orbit(&self, x: &[f64], len: usize) -> Result<Vec<f64>> {
        let n = self.dim();
        let mut out = Vec::with_capacity(len * n);
        let mut cur = x.to_vec();
        let mut next = vec![0.0; n];
        for i in 0..len {
            out.extend_from_slice(&cur);
            if i + 1 < len {
                self.step_into(&cur, &mut next)?;
                std::mem::swap(&mut cur, &mut next);
            }
        }
        Ok(out)
    }

    /// Box `[lo, hi]` on which probe monomials are rescaled to `[−1, 1]^N`, in
    /// the probe chart's coordinates.
    pub fn probe_box(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.dynamics {
            Dynamics::Solenoid { .. } => (vec![-3.0, -3.0, -1.0], vec![3.0, 3.0, 1.0]),
            Dynamics::Shift(ifs) => {
                let (lo, hi) = ifs.bbox();
                (lo.to_vec(), hi.to_vec())
            }
            Dynamics::Tent => (vec![0.0], vec![1.0]),
            Dynamics::Identity => (vec![0.0; self.dim()], vec![1.0; self.dim()]),
            Dynamics::Chain(_) => (vec![0.0; 3], vec![4.0; 3]),
        }
    }

    /// Coordinates in which probe monomials are evaluated. The solenoid uses the
    /// standard embedding of the solid torus so observables stay continuous
    /// across the angle cut; other systems use their own coordinates.
    #[inline]
    pub fn probe_chart(&self, p: &[f64], out: &mut [f64]) {
        match self.dynamics {
            Dynamics::Solenoid { .. } => out[..3].copy_from_slice(&solenoid::torus_chart(p)),
            _ => out[..p.len()].copy_from_slice(p),
        }
    }

    /// Known dimension of `T^iterate μ` for the sampled measure `μ`.
    pub fn reference_dimension(&self, iterate: usize) -> f64 {
        match &self.dynamics {
            Dynamics::Solenoid { .. } => 1.5,
            Dynamics::Shift(ifs) => ifs.similarity_dimension(),
            Dynamics::Tent => 1.0,
            Dynamics::Identity => self.dim() as f64,
            // μ lives on X₁; every later block is a similar copy of X₂.
            Dynamics::Chain(u) if iterate == 0 => u.x1.similarity_dimension(),
            Dynamics::Chain(u) => u.x2.similarity_dimension(),
        }
    }

    /// Diameter of the phase space (of the attractor's bounding region).
    pub fn phase_diameter(&self) -> f64 {
        match &self.dynamics {
            // Angular distance ≤ π, fiber diameter ≤ 2.
            Dynamics::Solenoid { .. } => (std::f64::consts::PI.powi(2) + 4.0).sqrt(),
            Dynamics::Shift(ifs) => {
                let (lo, hi) = ifs.bbox();
                lo.iter().zip(hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt()
            }
            Dynamics::Tent => 1.0,
            Dynamics::Identity => (self.dim() as f64).sqrt(),
            Dynamics::Chain(_) => 4.0 * 3f64.sqrt(),
        }
    }

    /// Sample the system's reference invariant measure.
    ///
    /// Solenoid: SRB measure by a Birkhoff orbit. Four-corner shift and general
    /// IFS: uniform self-similar measure. Union chain: uniform self-similar
    /// measure on `X₁`. Tent: uniform on `[0, 1/2]`. Identity: uniform on the
    /// unit cube.
    pub fn sample(&self, n: usize, seed: u64, opts: SampleOptions) -> Result<SampledMeasure> {
        if n == 0 {
            return Err(LabError::TooFewSamples { needed: 1, have: 0 });
        }
        let tag = self.tag();
        let metric = self.metric();
        match &self.dynamics {
            Dynamics::Solenoid { squared } => {
                if !squared {
                    return Err(LabError::InvalidParameter(
                        "SRB sampling is defined for the squared solenoid map".into(),
                    ));
                }
                sample_srb(n, opts.burn_in, seed)
            }
            Dynamics::Shift(ifs) => {
                let depth = opts.depth.unwrap_or_else(|| ifs.depth_for(1e-9));
                let coords = iid_chunks(n, ifs.dim(), seed, |r, out| {
                    let w = ifs.random_word(depth, r);
                    out.copy_from_slice(&ifs.project(&w).expect("symbols in range"));
                });
                SampledMeasure::uniform(ifs.dim(), coords, seed, Provenance::IidCoding, tag, metric)
            }
            Dynamics::Chain(u) => {
                let coords = iid_chunks(n, 3, seed, |r, out| {
                    let p = u.sample_x1(1, r).expect("symbols in range");
                    out.copy_from_slice(&p);
                });
                SampledMeasure::uniform(3, coords, seed, Provenance::IidCoding, tag, metric)
            }
            Dynamics::Tent => {
                let coords = iid_chunks(n, 1, seed, |r, out| out[0] = 0.5 * rand::Rng::random::<f64>(r));
                SampledMeasure::uniform(1, coords, seed, Provenance::Iid, tag, metric)
            }
            Dynamics::Identity => {
                let d = self.dim();
                let coords = iid_chunks(n, d, seed, |r, out| {
                    for o in out.iter_mut() {
                        *o = rand::Rng::random::<f64>(r);
                    }
                });
                SampledMeasure::uniform(d, coords, seed, Provenance::Iid, tag, metric)
            }
        }
    }
}

/// Fill `n` points in parallel, one random stream per fixed-size chunk, so the
/// output does not depend on the thread count.
fn iid_chunks<F>(n: usize, dim: usize, seed: u64, draw: F) -> Vec<f64>
where
    F: Fn(&mut crate::rng::LabRng, &mut [f64]) + Sync,
{
    let mut coords = vec![0.0; n * dim];
    coords
        .par_chunks_mut(CHUNK * dim)
        .enumerate()
        .for_each(|(c, block)| {
            let mut r = substream(seed, c as u64);
            for p in block.chunks_exact_mut(dim) {
                draw(&mut r, p);
            }
        });
    coords
}

/// `x ↦ |x − 1/2|`.
#[inline]
pub fn tent_step(x: f64) -> f64 {
    (x - 0.5).abs()
}

pub fn identity_step(p: &[f64]) -> Vec<f64> {
    p.to_vec()
}

/// SRB sample of the squared solenoid map.
pub fn sample_srb(n: usize, burn_in: usize, seed: u64) -> Result<SampledMeasure> {
    if n == 0 {
        return Err(LabError::TooFewSamples { needed: 1, have: 0 });
    }
    let mut r = rng(seed);
    let coords = solenoid::srb_orbit(n, burn_in, &mut r);
    SampledMeasure::uniform(3, coords, seed, Provenance::OrbitAverage, "solenoid", Metric::AngularFirst)
}

/// `f_{ω₁} ∘ ⋯ ∘ f_{ω_L}(0)` for the four-corner system.
pub fn ifs_natural_projection(word: &[usize], lambda: f64) -> Result<Vec<f64>> {
    validate_corner_lambda(lambda)?;
    if word.is_empty() {
        return Err(LabError::Coding("empty word".into()));
    }
    Ifs::four_corner(lambda)?.project(word)
}

/// The shift `π ∘ σ ∘ π⁻¹` on the four-corner set.
pub fn cantor_shift_step(p: &[f64], lambda: f64) -> Result<Vec<f64>> {
    validate_corner_lambda(lambda)?;
    Ifs::four_corner(lambda)?.shift_step(p, ATTRACTOR_TOL)
}

/// Uniform self-similar measure on the four-corner set.
pub fn sample_self_similar(n: usize, lambda: f64, seed: u64, depth: Option<usize>) -> Result<SampledMeasure> {
    SystemSpec::corner_cantor(lambda)?
        .build()?
        .sample(n, seed, SampleOptions { burn_in: 0, depth })
}

/// Union-chain system in R³.
pub fn build_union_chain(lambda1: f64, lambda2: f64) -> Result<SystemSpec> {
    SystemSpec::new(SystemKind::UnionChain { lambda1, lambda2 })
}

/// Wrap an angle into `[0, 2π)`.
pub fn wrap_angle(t: f64) -> f64 {
    t.rem_euclid(TAU)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_json_round_trip() {
        let s = SystemSpec::corner_cantor(1.0 / 3.0).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        let back: SystemSpec = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
        let s: SystemSpec = serde_json::from_str(r#"{"kind":"solenoid"}"#).unwrap();
        assert_eq!(s.kind, SystemKind::Solenoid { squared: true });
        assert_eq!(s.ambient_dim, 3);
        assert!(serde_json::from_str::<SystemSpec>(r#"{"kind":"corner_cantor_shift","lambda":0.2}"#).is_err());
        assert!(serde_json::from_str::<SystemSpec>(r#"{"kind":"tent_half","ambient_dim":2}"#).is_err());
    }

    #[test]
    fn tags_round_trip() {
        for s in [
            SystemSpec::solenoid(),
            SystemSpec::corner_cantor(1.0 / 3.0).unwrap(),
            SystemSpec::tent(),
            SystemSpec::identity(2).unwrap(),
            build_union_chain(0.4, 0.05).unwrap(),
        ] {
            assert_eq!(SystemSpec::from_tag(&s.tag()).unwrap(), s);
        }
    }

    #[test]
    fn tent_values() {
        assert!((tent_step(0.7) - 0.2).abs() < 1e-15);
        let x = tent_step(tent_step(tent_step(0.7)));
        assert!((x - 0.2).abs() < 1e-15);
        assert_eq!(identity_step(&[0.3, 0.4]), vec![0.3, 0.4]);
    }

    #[test]
    fn samplers_are_deterministic() {
        let sys = SystemSpec::corner_cantor(1.0 / 3.0).unwrap().build().unwrap();
        let a = sys.sample(10_000, 5, SampleOptions::default()).unwrap();
        let b = sys.sample(10_000, 5, SampleOptions::default()).unwrap();
        assert_eq!(a, b);
        let c = sys.sample(10_000, 6, SampleOptions::default()).unwrap();
        assert_ne!(a.coords(), c.coords());
        assert_eq!(sample_srb(50, 10, 1).unwrap(), sample_srb(50, 10, 1).unwrap());
    }

    #[test]
    fn srb_points_follow_one_orbit() {
        let m = sample_srb(3, 0, 11).unwrap();
        let sys = SystemSpec::solenoid().build().unwrap();
        for i in 0..2 {
            assert_eq!(sys.step(m.point(i)).unwrap(), m.point(i + 1));
        }
    }
}
