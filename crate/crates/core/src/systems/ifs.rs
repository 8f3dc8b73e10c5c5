//! Self-similar iterated function systems made of homotheties `x ↦ r·x + t`
//! with pairwise disjoint first-level cells, their natural projection, and the
//! induced shift `T = π ∘ σ ∘ π⁻¹` on the attractor.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Cell-membership tolerance for points claimed to lie on an attractor.
pub const ATTRACTOR_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    pub ratio: f64,
    pub translation: Vec<f64>,
}

impl Similarity {
    #[inline]
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for ((o, xi), ti) in out.iter_mut().zip(x).zip(&self.translation) {
            *o = self.ratio * xi + ti;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ifs {
    maps: Vec<Similarity>,
    dim: usize,
    /// Bounding box of the attractor.
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Ifs {
    pub fn new(maps: Vec<Similarity>) -> Result<Self> {
        let dim = maps
            .first()
            .map(|m| m.translation.len())
            .ok_or_else(|| LabError::InvalidParameter("IFS needs at least one map".into()))?;
        if dim == 0 {
            return Err(LabError::InvalidParameter("zero-dimensional IFS".into()));
        }
        for m in &maps {
            if m.translation.len() != dim {
                return Err(LabError::DimensionMismatch { expected: dim, got: m.translation.len() });
            }
            if !(m.ratio > 0.0 && m.ratio < 1.0) {
                return Err(LabError::InvalidParameter(format!(
                    "similarity ratio {} outside (0,1)",
                    m.ratio
                )));
            }
        }
        // The attractor box is the fixed point of B ↦ bbox(∪ f_i(B)) for positive
        // homotheties; per-axis it solves lo = min_i(r_i lo + t_i), hi = max_i(r_i hi + t_i).
        let mut lo = vec![0.0; dim];
        let mut hi = vec![1.0; dim];
        for _ in 0..2000 {
            let mut nlo = vec![f64::INFINITY; dim];
            let mut nhi = vec![f64::NEG_INFINITY; dim];
            for m in &maps {
                for a in 0..dim {
                    nlo[a] = nlo[a].min(m.ratio * lo[a] + m.translation[a]);
                    nhi[a] = nhi[a].max(m.ratio * hi[a] + m.translation[a]);
                }
            }
            let done = (0..dim).all(|a| (nlo[a] - lo[a]).abs() < 1e-15 && (nhi[a] - hi[a]).abs() < 1e-15);
            lo = nlo;
            hi = nhi;
            if done {
                break;
            }
        }
        let ifs = Self { maps, dim, lo, hi };
        for i in 0..ifs.maps.len() {
            for j in i + 1..ifs.maps.len() {
                let (li, hi_i) = ifs.cell(i);
                let (lj, hj) = ifs.cell(j);
                let overlap = (0..dim).all(|a| li[a] <= hj[a] && lj[a] <= hi_i[a]);
                if overlap {
                    return Err(LabError::InvalidParameter(format!(
                        "first-level cells {i} and {j} overlap"
                    )));
                }
            }
        }
        Ok(ifs)
    }

    /// The four-corner system `f_i(x) = λx + t_i` on the unit square.
    pub fn four_corner(lambda: f64) -> Result<Self> {
        let s = 1.0 - lambda;
        let ts = [[0.0, 0.0], [0.0, s], [s, 0.0], [s, s]];
        Self::new(
            ts.iter()
                .map(|t| Similarity { ratio: lambda, translation: t.to_vec() })
                .collect(),
        )
    }

    /// Eight corner maps of the unit cube, symbol bits `(b0, b1, b2)` = corner.
    pub fn cube_corners(lambda: f64) -> Result<Self> {
        let s = 1.0 - lambda;
        Self::new(
            (0..8usize)
                .map(|c| Similarity {
                    ratio: lambda,
                    translation: (0..3).map(|a| if c >> (2 - a) & 1 == 1 { s } else { 0.0 }).collect(),
                })
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn symbols(&self) -> usize {
        self.maps.len()
    }

    pub fn maps(&self) -> &[Similarity] {
        &self.maps
    }

    pub fn bbox(&self) -> (&[f64], &[f64]) {
        (&self.lo, &self.hi)
    }

    pub fn max_ratio(&self) -> f64 {
        self.maps.iter().map(|m| m.ratio).fold(0.0, f64::max)
    }

    /// Similarity dimension when all ratios agree (`log n / −log r`).
    pub fn similarity_dimension(&self) -> f64 {
        (self.maps.len() as f64).ln() / -self.max_ratio().ln()
    }

    /// Depth at which a truncated coding is within `tol` of its limit.
    pub fn depth_for(&self, tol: f64) -> usize {
        (tol.ln() / self.max_ratio().ln()).ceil().max(1.0) as usize
    }

    fn cell(&self, i: usize) -> (Vec<f64>, Vec<f64>) {
        let m = &self.maps[i];
        let lo = (0..self.dim).map(|a| m.ratio * self.lo[a] + m.translation[a]).collect();
        let hi = (0..self.dim).map(|a| m.ratio * self.hi[a] + m.translation[a]).collect();
        (lo, hi)
    }

    /// `f_{ω₁} ∘ ⋯ ∘ f_{ω_L}(0)`.
    pub fn project(&self, word: &[usize]) -> Result<Vec<f64>> {
        let mut x = vec![0.0; self.dim];
        let mut tmp = vec![0.0; self.dim];
        for &s in word.iter().rev() {
            let m = self
                .maps
                .get(s)
                .ok_or_else(|| LabError::Coding(format!("symbol {s} outside 0..{}", self.maps.len())))?;
            m.apply(&x, &mut tmp);
            std::mem::swap(&mut x, &mut tmp);
        }
        Ok(x)
    }

    /// Symbol of the first-level cell containing `p` (within `tol`);
    /// lexicographically smallest symbol on ties.
    pub fn first_symbol(&self, p: &[f64], tol: f64) -> Result<usize> {
        if p.len() != self.dim {
            return Err(LabError::DimensionMismatch { expected: self.dim, got: p.len() });
        }
        for (i, m) in self.maps.iter().enumerate() {
            let inside = (0..self.dim).all(|a| {
                let lo = m.ratio * self.lo[a] + m.translation[a];
                let hi = m.ratio * self.hi[a] + m.translation[a];
                p[a] >= lo - tol && p[a] <= hi + tol
            });
            if inside {
                return Ok(i);
            }
        }
        Err(LabError::Coding(format!("point {p:?} lies in no first-level cell")))
    }

    /// `T = π ∘ σ ∘ π⁻¹`: invert the map of the first-level cell holding `p`.
    pub fn shift_step(&self, p: &[f64], tol: f64) -> Result<Vec<f64>> {
        let s = self.first_symbol(p, tol)?;
        let m = &self.maps[s];
        Ok(p.iter().zip(&m.translation).map(|(x, t)| (x - t) / m.ratio).collect())
    }

    /// First `depth` symbols of the coding of `p`. Rounding errors grow by the
    /// inverse ratio per level, so the tolerance is scaled to match.
    pub fn decode(&self, p: &[f64], depth: usize, tol: f64) -> Result<Vec<usize>> {
        let mut x = p.to_vec();
        let mut word = Vec::with_capacity(depth);
        let mut t = tol;
        for _ in 0..depth {
            let s = self.first_symbol(&x, t)?;
            let m = &self.maps[s];
            for (xi, ti) in x.iter_mut().zip(&m.translation) {
                *xi = (*xi - ti) / m.ratio;
            }
            t /= m.ratio;
            word.push(s);
        }
        Ok(word)
    }

    pub fn random_word<R: Rng + ?Sized>(&self, depth: usize, rng: &mut R) -> Vec<usize> {
        (0..depth).map(|_| rng.random_range(0..self.maps.len())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_corner_box_is_unit_square() {
        let ifs = Ifs::four_corner(1.0 / 3.0).unwrap();
        let (lo, hi) = ifs.bbox();
        assert!(lo.iter().all(|v| v.abs() < 1e-12));
        assert!(hi.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn overlapping_cells_rejected() {
        assert!(Ifs::four_corner(0.6).is_err());
    }

    #[test]
    fn projection_of_constant_words_hits_fixed_points() {
        let ifs = Ifs::four_corner(1.0 / 3.0).unwrap();
        assert_eq!(ifs.project(&[0; 30]).unwrap(), vec![0.0, 0.0]);
        let p = ifs.project(&[3; 40]).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-15 && (p[1] - 1.0).abs() < 1e-15);
        // f₁ fixed point solves y = y/3 + 2/3, x = x/3.
        let p = ifs.project(&[1; 40]).unwrap();
        assert!(p[0].abs() < 1e-15 && (p[1] - 1.0).abs() < 1e-15);
        assert!(ifs.project(&[4]).is_err());
    }

    #[test]
    fn decode_inverts_projection() {
        let ifs = Ifs::cube_corners(0.4).unwrap();
        let word = vec![3, 7, 0, 5, 1, 6, 2, 4, 4, 0];
        let mut long = word.clone();
        long.extend(std::iter::repeat_n(0, 20));
        let p = ifs.project(&long).unwrap();
        assert_eq!(ifs.decode(&p, word.len(), ATTRACTOR_TOL).unwrap(), word);
    }
}
