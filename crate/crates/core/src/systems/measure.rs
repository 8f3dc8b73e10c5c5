use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::metric::Metric;

/// Tolerance on the total weight of a cloud.
pub const WEIGHT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Points along one long orbit.
    OrbitAverage,
    /// Independent projections of uniformly random codings.
    IidCoding,
    /// Independent draws from an explicitly known invariant measure.
    Iid,
}

/// A weighted point cloud standing in for a probability measure.
///
/// Coordinates are stored row-major in one flat vector.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledMeasure {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
    pub seed: u64,
    pub provenance: Provenance,
    /// System tag as written in CSV headers, e.g. `corner_cantor:0.333…`.
    pub system: String,
    pub metric: Metric,
}

fn kahan_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for x in xs {
        let y = x - c;
        let t = s + y;
        c = (t - s) - y;
        s = t;
    }
    s
}

impl SampledMeasure {
    pub fn new(
        dim: usize,
        coords: Vec<f64>,
        weights: Vec<f64>,
        seed: u64,
        provenance: Provenance,
        system: impl Into<String>,
        metric: Metric,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(LabError::InvalidParameter("zero-dimensional cloud".into()));
        }
        if coords.len() % dim != 0 || coords.len() / dim != weights.len() {
            return Err(LabError::DimensionMismatch { expected: weights.len() * dim, got: coords.len() });
        }
        if weights.is_empty() {
            return Err(LabError::TooFewSamples { needed: 1, have: 0 });
        }
        if let Some(c) = coords.iter().find(|c| !c.is_finite()) {
            return Err(LabError::InvalidParameter(format!("non-finite coordinate {c}")));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(LabError::InvalidParameter("weights must be finite and nonnegative".into()));
        }
        let total = kahan_sum(weights.iter().copied());
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(LabError::InvalidParameter(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { dim, coords, weights, seed, provenance, system: system.into(), metric })
    }

    /// Equal weights `1/n`.
    pub fn uniform(
        dim: usize,
        coords: Vec<f64>,
        seed: u64,
        provenance: Provenance,
        system: impl Into<String>,
        metric: Metric,
    ) -> Result<Self> {
        let n = if dim == 0 { 0 } else { coords.len() / dim };
        let w = if n == 0 { 0.0 } else { 1.0 / n as f64 };
        Self::new(dim, coords, vec![w; n], seed, provenance, system, metric)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        kahan_sum(self.weights.iter().copied())
    }

    /// Sub-cloud on the given indices with renormalized weights.
    pub fn restrict(&self, idx: &[usize]) -> Result<Self> {
        let total = kahan_sum(idx.iter().map(|&i| self.weights[i]));
        if idx.is_empty() || total <= 0.0 {
            return Err(LabError::TooFewSamples { needed: 1, have: 0 });
        }
        let mut coords = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            coords.extend_from_slice(self.point(i));
        }
        let mut weights: Vec<f64> = idx.iter().map(|&i| self.weights[i] / total).collect();
        renormalize(&mut weights);
        Self::new(self.dim, coords, weights, self.seed, self.provenance, self.system.clone(), self.metric)
    }

    /// Apply `f` to every point, keeping weights.
    pub fn map_points(&self, out_dim: usize, mut f: impl FnMut(&[f64], &mut [f64]) -> Result<()>) -> Result<Self> {
        let mut coords = vec![0.0; self.len() * out_dim];
        for (p, o) in self.points().zip(coords.chunks_exact_mut(out_dim)) {
            f(p, o)?;
        }
        let mut m = self.clone();
        m.dim = out_dim;
        m.coords = coords;
        Ok(m)
    }

    /// Bounding box `(lo, hi)`.
    pub fn bbox(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for p in self.points() {
            for a in 0..self.dim {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (lo, hi)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# system,{},seed,{}", self.system, self.seed)?;
        let mut line = String::new();
        for (p, wt) in self.points().zip(&self.weights) {
            line.clear();
            for c in p {
                line.push_str(&format!("{c:.16e},"));
            }
            line.push_str(&format!("{wt:.16e}\n"));
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    /// Parse a cloud written by [`write_csv`](Self::write_csv). Provenance and
    /// metric are recovered from the system tag.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let (system, seed) = loop {
            let Some((i, line)) = lines.next() else {
                return Err(LabError::Parse { line: 1, msg: "missing header".into() });
            };
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            break parse_header(&line).map_err(|msg| LabError::Parse { line: i + 1, msg })?;
        };
        let mut dim = 0;
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        for (i, line) in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let vals: std::result::Result<Vec<f64>, _> = t.split(',').map(|f| f.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| LabError::Parse { line: i + 1, msg: e.to_string() })?;
            if vals.len() < 2 {
                return Err(LabError::Parse { line: i + 1, msg: "need at least one coordinate and a weight".into() });
            }
            if dim == 0 {
                dim = vals.len() - 1;
            } else if vals.len() - 1 != dim {
                return Err(LabError::Parse {
                    line: i + 1,
                    msg: format!("expected {} fields, found {}", dim + 1, vals.len()),
                });
            }
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(LabError::Parse { line: i + 1, msg: "non-finite value".into() });
            }
            coords.extend_from_slice(&vals[..dim]);
            weights.push(vals[dim]);
        }
        if weights.is_empty() {
            return Err(LabError::TooFewSamples { needed: 1, have: 0 });
        }
        let (provenance, metric) = infer_from_tag(&system);
        Self::new(dim, coords, weights, seed, provenance, system, metric)
    }
}

/// Rescale so the Kahan sum is 1 to within rounding.
pub(crate) fn renormalize(w: &mut [f64]) {
    let s = kahan_sum(w.iter().copied());
    if s > 0.0 {
        for x in w.iter_mut() {
            *x /= s;
        }
    }
}

fn parse_header(line: &str) -> std::result::Result<(String, u64), String> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| "header must start with '#'".to_string())?
        .trim();
    let fields: Vec<&str> = body.split(',').map(str::trim).collect();
    match fields.as_slice() {
        ["system", kind, "seed", seed] => {
            let seed = seed.parse::<u64>().map_err(|e| format!("bad seed: {e}"))?;
            Ok((kind.to_string(), seed))
        }
        _ => Err(format!("expected '# system,<kind>,seed,<seed>', found '{line}'")),
    }
}

fn infer_from_tag(tag: &str) -> (Provenance, Metric) {
    let kind = tag.split(':').next().unwrap_or("");
    match kind {
        "solenoid" | "solenoid_single" => (Provenance::OrbitAverage, Metric::AngularFirst),
        "corner_cantor" | "union_chain" | "ifs" => (Provenance::IidCoding, Metric::Euclidean),
        _ => (Provenance::Iid, Metric::Euclidean),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud() -> SampledMeasure {
        SampledMeasure::uniform(
            2,
            vec![0.1, 0.2, 1.0 / 3.0, 0.7, -1e-300, 5.0],
            9,
            Provenance::IidCoding,
            "corner_cantor:0.3333333333333333",
            Metric::Euclidean,
        )
        .unwrap()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let c = cloud();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let back = SampledMeasure::read_csv(&buf[..]).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn malformed_rows_report_line_numbers() {
        let text = "# system,tent,seed,1\n0.1,0.5\n0.2,x\n";
        match SampledMeasure::read_csv(text.as_bytes()) {
            Err(LabError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let text = "system,tent\n";
        assert!(matches!(SampledMeasure::read_csv(text.as_bytes()), Err(LabError::Parse { line: 1, .. })));
        let text = "# system,tent,seed,1\n0.1,0.5\n0.2,0.3,0.5\n";
        assert!(matches!(SampledMeasure::read_csv(text.as_bytes()), Err(LabError::Parse { line: 3, .. })));
    }

    #[test]
    fn weights_must_sum_to_one() {
        let r = SampledMeasure::new(1, vec![0.0, 1.0], vec![0.5, 0.4], 0, Provenance::Iid, "tent", Metric::Euclidean);
        assert!(r.is_err());
    }

    #[test]
    fn restrict_renormalizes() {
        let c = cloud();
        let s = c.restrict(&[0, 2]).unwrap();
        assert_eq!(s.len(), 2);
        assert!((s.total_weight() - 1.0).abs() < 1e-15);
        assert_eq!(s.point(1), c.point(2));
    }
}
