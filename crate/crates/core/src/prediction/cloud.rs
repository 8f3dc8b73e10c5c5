use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dimension::NeighborIndex;
use crate::error::{LabError, Result};
use crate::metric::Metric;
use crate::observables::{DelayMap, ObservableSpec};
use crate::systems::SampledMeasure;

/// Where an embedded cloud came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingProvenance {
    pub system: String,
    pub observable: Option<ObservableSpec>,
    pub k: usize,
    pub seed: u64,
}

/// Pairs `(u, v) = (φ(x), φ(Tx))` with weights and an index over `u`.
#[derive(Clone, Debug)]
pub struct EmbeddedCloud {
    k: usize,
    u: Vec<f64>,
    v: Vec<f64>,
    weights: Vec<f64>,
    /// Phase points `x` behind each pair, when known.
    phase: Option<SampledMeasure>,
    index: NeighborIndex,
    pub provenance: EmbeddingProvenance,
}

const CHUNK: usize = 2048;

impl EmbeddedCloud {
    pub fn from_pairs(
        k: usize,
        u: Vec<f64>,
        v: Vec<f64>,
        weights: Vec<f64>,
        phase: Option<SampledMeasure>,
        provenance: EmbeddingProvenance,
    ) -> Result<Self> {
        let n = weights.len();
        if k == 0 || u.len() != n * k || v.len() != n * k {
            return Err(LabError::DimensionMismatch { expected: n * k, got: u.len().max(v.len()) });
        }
        if n == 0 {
            return Err(LabError::TooFewSamples { needed: 1, have: 0 });
        }
        if let Some(p) = &phase {
            if p.len() != n {
                return Err(LabError::DimensionMismatch { expected: n, got: p.len() });
            }
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(LabError::InvalidParameter(format!("pair weights sum to {total}")));
        }
        let index = NeighborIndex::new(&u, k, Metric::Euclidean);
        Ok(Self { k, u, v, weights, phase, index, provenance })
    }

    /// Delay vectors of every cloud point and of its image.
    pub fn embed(cloud: &SampledMeasure, dm: &DelayMap) -> Result<Self> {
        let n = cloud.len();
        let k = dm.k;
        let mut u = vec![0.0; n * k];
        let mut v = vec![0.0; n * k];
        u.par_chunks_mut(CHUNK * k)
            .zip(v.par_chunks_mut(CHUNK * k))
            .enumerate()
            .try_for_each(|(c, (ub, vb))| -> Result<()> {
                let mut s = dm.observable.scratch();
                let mut obs = vec![0.0; k + 1];
                for (r, (uo, vo)) in ub.chunks_exact_mut(k).zip(vb.chunks_exact_mut(k)).enumerate() {
                    dm.observe_orbit(cloud.point(c * CHUNK + r), &mut obs, &mut s)?;
                    uo.copy_from_slice(&obs[..k]);
                    vo.copy_from_slice(&obs[1..]);
                }
                Ok(())
            })?;
        let provenance = EmbeddingProvenance {
            system: cloud.system.clone(),
            observable: Some(dm.observable.spec()),
            k,
            seed: cloud.seed,
        };
        Self::from_pairs(k, u, v, cloud.weights().to_vec(), Some(cloud.clone()), provenance)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn u(&self, i: usize) -> &[f64] {
        &self.u[i * self.k..(i + 1) * self.k]
    }

    #[inline]
    pub fn v(&self, i: usize) -> &[f64] {
        &self.v[i * self.k..(i + 1) * self.k]
    }

    pub fn u_all(&self) -> &[f64] {
        &self.u
    }

    pub fn v_all(&self) -> &[f64] {
        &self.v
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn phase(&self) -> Option<&SampledMeasure> {
        self.phase.as_ref()
    }

    pub fn index(&self) -> &NeighborIndex {
        &self.index
    }

    /// Indices `i` with `‖u_i − y‖ ≤ ε`, ascending.
    pub fn ball(&self, y: &[f64], eps: f64) -> Vec<usize> {
        self.index.within(y, eps)
    }

    /// The `u` values as a cloud (weights kept).
    pub fn u_measure(&self) -> Result<SampledMeasure> {
        SampledMeasure::new(
            self.k,
            self.u.clone(),
            self.weights.clone(),
            self.provenance.seed,
            crate::systems::Provenance::Iid,
            format!("reconstruction:{}", self.k),
            Metric::Euclidean,
        )
    }

    /// Weighted standard deviation of the `v` coordinates (root of total variance).
    pub fn v_spread(&self) -> f64 {
        let k = self.k;
        let mut mean = vec![0.0; k];
        for (i, w) in self.weights.iter().enumerate() {
            for a in 0..k {
                mean[a] += w * self.v(i)[a];
            }
        }
        let mut var = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            for a in 0..k {
                var += w * (self.v(i)[a] - mean[a]).powi(2);
            }
        }
        var.sqrt()
    }

    /// Root-mean-square distance of `u` from its mean.
    pub fn u_spread(&self) -> f64 {
        let k = self.k;
        let mut mean = vec![0.0; k];
        for (i, w) in self.weights.iter().enumerate() {
            for a in 0..k {
                mean[a] += w * self.u(i)[a];
            }
        }
        let mut var = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            for a in 0..k {
                var += w * (self.u(i)[a] - mean[a]).powi(2);
            }
        }
        var.sqrt()
    }

    /// Rows `u…, v…, [x…,] weight` after a `# pairs,<system>,k,<k>,phase_dim,<N>,seed,<seed>` header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let nd = self.phase.as_ref().map_or(0, |p| p.dim());
        writeln!(
            w,
            "# pairs,{},k,{},phase_dim,{},seed,{}",
            self.provenance.system, self.k, nd, self.provenance.seed
        )?;
        let mut line = String::new();
        for i in 0..self.len() {
            line.clear();
            for c in self.u(i).iter().chain(self.v(i)) {
                line.push_str(&format!("{c:.16e},"));
            }
            if let Some(p) = &self.phase {
                for c in p.point(i) {
                    line.push_str(&format!("{c:.16e},"));
                }
            }
            line.push_str(&format!("{:.16e}\n", self.weights[i]));
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let header = loop {
            let Some((i, line)) = lines.next() else {
                return Err(LabError::Parse { line: 1, msg: "missing header".into() });
            };
            let line = line?;
            if !line.trim().is_empty() {
                break (i, line);
            }
        };
        let (system, k, nd, seed) = parse_pairs_header(&header.1).map_err(|msg| LabError::Parse { line: header.0 + 1, msg })?;
        let width = 2 * k + nd + 1;
        let (mut u, mut v, mut x, mut w) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (i, line) in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let vals: std::result::Result<Vec<f64>, _> = t.split(',').map(|f| f.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| LabError::Parse { line: i + 1, msg: e.to_string() })?;
            if vals.len() != width {
                return Err(LabError::Parse { line: i + 1, msg: format!("expected {width} fields, found {}", vals.len()) });
            }
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(LabError::Parse { line: i + 1, msg: "non-finite value".into() });
            }
            u.extend_from_slice(&vals[..k]);
            v.extend_from_slice(&vals[k..2 * k]);
            x.extend_from_slice(&vals[2 * k..2 * k + nd]);
            w.push(vals[width - 1]);
        }
        let phase = if nd > 0 {
            let spec = crate::systems::SystemSpec::from_tag(&system).ok();
            let metric = spec
                .and_then(|s| s.build().ok())
                .map_or(Metric::Euclidean, |s| s.metric());
            let prov = if metric == Metric::AngularFirst {
                crate::systems::Provenance::OrbitAverage
            } else {
                crate::systems::Provenance::IidCoding
            };
            Some(SampledMeasure::new(nd, x, w.clone(), seed, prov, system.clone(), metric)?)
        } else {
            None
        };
        let provenance = EmbeddingProvenance { system, observable: None, k, seed };
        Self::from_pairs(k, u, v, w, phase, provenance)
    }
}

fn parse_pairs_header(line: &str) -> std::result::Result<(String, usize, usize, u64), String> {
    let body = line.strip_prefix('#').ok_or("header must start with '#'")?.trim();
    let f: Vec<&str> = body.split(',').map(str::trim).collect();
    match f.as_slice() {
        ["pairs", sys, "k", k, "phase_dim", nd, "seed", seed] => Ok((
            sys.to_string(),
            k.parse().map_err(|e| format!("bad k: {e}"))?,
            nd.parse().map_err(|e| format!("bad phase_dim: {e}"))?,
            seed.parse().map_err(|e| format!("bad seed: {e}"))?,
        )),
        _ => Err(format!("expected '# pairs,<system>,k,<k>,phase_dim,<N>,seed,<seed>', found '{line}'")),
    }
}
