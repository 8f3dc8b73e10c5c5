//! A compact set `X = X₁ ∪ X₂ ∪ X₃ ∪ ⋯ ∪ {0}` in R³ with an injective Lipschitz
//! map sending `X_j` onto `X_{j+1}` and fixing `0`.
//!
//! `X₁` and `X₂` are eight-corner self-similar sets with ratios `λ₁` and `λ₂`,
//! identified through their common coding. `X_j` for `j ≥ 3` are scaled copies
//! of `X₂` shrinking to the origin.
//!
//! Placement: `X₁ ⊂ [1,2]³`, `X₂ ⊂ [3,4]³`, and `X_j ⊂ [a_j, a_j + 2^{-j}]³`
//! with `a_j = 2^{1-j}` for `j ≥ 3`. All blocks are pairwise disjoint and the
//! origin is not in any of them.

use rand::Rng;

use super::ifs::{Ifs, ATTRACTOR_TOL};
use crate::error::{LabError, Result};

pub const X1_OFFSET: f64 = 1.0;
pub const X2_OFFSET: f64 = 3.0;

#[derive(Clone, Debug)]
pub struct UnionChain {
    pub lambda1: f64,
    pub lambda2: f64,
    pub x1: Ifs,
    pub x2: Ifs,
    /// Coding depth used when transporting `X₁` to `X₂`.
    pub depth: usize,
}

/// Corner of the cube holding block `j ≥ 3`.
#[inline]
pub fn block_corner(j: u32) -> f64 {
    2f64.powi(1 - j as i32)
}

pub fn validate(lambda1: f64, lambda2: f64) -> Result<()> {
    let lo = 1.0 / (2.0 * std::f64::consts::SQRT_2);
    if !(lambda1 > lo && lambda1 < 0.5) {
        return Err(LabError::InvalidParameter(format!(
            "lambda1 = {lambda1} outside ({lo}, 0.5)"
        )));
    }
    if !(lambda2 > 0.0 && lambda2 < 0.5) || 8f64.ln() / -lambda2.ln() >= 1.0 {
        return Err(LabError::InvalidParameter(format!(
            "lambda2 = {lambda2} must give a set of dimension below 1"
        )));
    }
    Ok(())
}

impl UnionChain {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        validate(lambda1, lambda2)?;
        let x1 = Ifs::cube_corners(lambda1)?;
        let x2 = Ifs::cube_corners(lambda2)?;
        let depth = x2.depth_for(1e-12);
        Ok(Self { lambda1, lambda2, x1, x2, depth })
    }

    pub fn dim_x1(&self) -> f64 {
        self.x1.similarity_dimension()
    }

    pub fn dim_x2(&self) -> f64 {
        self.x2.similarity_dimension()
    }

    /// Point of `X₁` with the given coding.
    pub fn x1_point(&self, word: &[usize]) -> Result<Vec<f64>> {
        Ok(self.x1.project(word)?.into_iter().map(|c| c + X1_OFFSET).collect())
    }

    /// Point of `X₂` with the given coding.
    pub fn x2_point(&self, word: &[usize]) -> Result<Vec<f64>> {
        Ok(self.x2.project(word)?.into_iter().map(|c| c + X2_OFFSET).collect())
    }

    /// Index of the block containing `p`, or 0 for the origin.
    pub fn block_of(&self, p: &[f64]) -> Result<u32> {
        if p.len() != 3 {
            return Err(LabError::DimensionMismatch { expected: 3, got: p.len() });
        }
        if p.iter().all(|&c| c == 0.0) {
            return Ok(0);
        }
        let x = p[0];
        let tol = ATTRACTOR_TOL;
        if (X2_OFFSET - tol..=X2_OFFSET + 1.0 + tol).contains(&x) {
            return Ok(2);
        }
        if (X1_OFFSET - tol..=X1_OFFSET + 1.0 + tol).contains(&x) {
            return Ok(1);
        }
        if x > 0.0 && x <= 0.375 + tol {
            // a_j ≤ x ≤ a_j + 2^{-j} = 1.5 a_j, so j = 1 − floor(log₂ x).
            let j = (1.0 - x.log2().floor()) as i64;
            if j >= 3 && j < 1070 {
                let a = block_corner(j as u32);
                if x <= a * 1.5 * (1.0 + 1e-12) {
                    return Ok(j as u32);
                }
            }
        }
        Err(LabError::OutOfDomain(format!("{p:?} is in no block of the union chain")))
    }

    pub fn step_into(&self, p: &[f64], out: &mut [f64]) -> Result<()> {
        match self.block_of(p)? {
            0 => out[..3].fill(0.0),
            1 => {
                let local: Vec<f64> = p.iter().map(|c| c - X1_OFFSET).collect();
                let word = self.x1.decode(&local, self.depth, ATTRACTOR_TOL)?;
                let q = self.x2_point(&word)?;
                out[..3].copy_from_slice(&q);
            }
            2 => {
                let a3 = block_corner(3);
                for a in 0..3 {
                    out[a] = (p[a] - X2_OFFSET) * 0.125 + a3;
                }
            }
            j => {
                let a = block_corner(j);
                let b = block_corner(j + 1);
                for i in 0..3 {
                    out[i] = (p[i] - a) * 0.5 + b;
                }
            }
        }
        Ok(())
    }

    /// Upper bound for the Lipschitz constant of the step.
    ///
    /// Inside `X₁`, points whose codings first differ at level `n` are at least
    /// `(1 − 2λ₁)λ₁^{n−1}` apart and their images at most `√3 λ₂^{n−1}`. Across
    /// blocks, distances are at least `0.625` before the step and at most `4√3` after.
    pub fn lipschitz_bound(&self) -> f64 {
        let sqrt3 = 3f64.sqrt();
        (sqrt3 / (1.0 - 2.0 * self.lambda1)).max(4.0 * sqrt3 / 0.625)
    }

    /// `n` i.i.d. points of the uniform self-similar measure on `X₁`.
    pub fn sample_x1<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        let depth = self.x1.depth_for(1e-9);
        let mut coords = Vec::with_capacity(3 * n);
        for _ in 0..n {
            let w = self.x1.random_word(depth, rng);
            coords.extend(self.x1_point(&w)?);
        }
        Ok(coords)
    }
}
