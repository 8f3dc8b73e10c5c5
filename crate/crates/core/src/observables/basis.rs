use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// All monomials of `n` variables of total degree at most `d`.
///
/// Ordered by total degree, then lexicographically with the first variable
/// most significant and larger exponents first: for two variables of degree
/// ≤ 2 the order is `1, x, y, x², xy, y²`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonomialBasis {
    n: usize,
    d: usize,
    exponents: Vec<Vec<u32>>,
}

/// Serialized form `{N, d}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSpec {
    #[serde(rename = "N")]
    pub n: usize,
    pub d: usize,
}

fn compositions(n: usize, total: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if prefix.len() == n - 1 {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for e in (0..=total).rev() {
        prefix.push(e);
        compositions(n, total - e, prefix, out);
        prefix.pop();
    }
}

/// `C(n + d, d)`.
pub fn binomial_count(n: usize, d: usize) -> usize {
    let mut c: u128 = 1;
    for i in 1..=d as u128 {
        c = c * (n as u128 + i) / i;
    }
    c as usize
}

impl MonomialBasis {
    pub fn new(n: usize, d: usize) -> Result<Self> {
        if n == 0 {
            return Err(LabError::InvalidParameter("basis needs at least one variable".into()));
        }
        let mut exponents = Vec::with_capacity(binomial_count(n, d));
        for total in 0..=d as u32 {
            compositions(n, total, &mut Vec::with_capacity(n), &mut exponents);
        }
        Ok(Self { n, d, exponents })
    }

    pub fn from_spec(s: BasisSpec) -> Result<Self> {
        Self::new(s.n, s.d)
    }

    pub fn spec(&self) -> BasisSpec {
        BasisSpec { n: self.n, d: self.d }
    }

    pub fn vars(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    /// Values of every monomial at `y`, written to `out` (length `m`).
    pub fn eval_into(&self, y: &[f64], out: &mut [f64]) {
        // Power table pw[a][e] = y_a^e, then one product per monomial.
        let d = self.d;
        let mut pw = vec![1.0; self.n * (d + 1)];
        for a in 0..self.n {
            for e in 1..=d {
                pw[a * (d + 1) + e] = pw[a * (d + 1) + e - 1] * y[a];
            }
        }
        for (o, ex) in out.iter_mut().zip(&self.exponents) {
            let mut v = 1.0;
            for (a, &e) in ex.iter().enumerate() {
                if e > 0 {
                    v *= pw[a * (d + 1) + e as usize];
                }
            }
            *o = v;
        }
    }

    pub fn eval(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(y, &mut out);
        out
    }

    /// Lipschitz bound of monomial `j` on the cube `[−1, 1]^N`, with axis `a`
    /// stretched by `stretch[a]`: `(Σ_a (e_a · stretch_a)²)^{1/2}`.
    pub fn lipschitz_on_cube(&self, j: usize, stretch: &[f64]) -> f64 {
        self.exponents[j]
            .iter()
            .zip(stretch)
            .map(|(&e, s)| (e as f64 * s).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Probe basis for delay dimension `k`: degree `2k + 1` unless overridden.
pub fn probe_basis(n: usize, k: usize, d_override: Option<usize>) -> Result<MonomialBasis> {
    if k == 0 {
        return Err(LabError::InvalidParameter("delay dimension k must be ≥ 1".into()));
    }
    MonomialBasis::new(n, d_override.unwrap_or(2 * k + 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(MonomialBasis::new(1, 3).unwrap().exponents(), &[vec![0], vec![1], vec![2], vec![3]]);
        assert_eq!(MonomialBasis::new(2, 2).unwrap().len(), 6);
        assert_eq!(probe_basis(3, 2, None).unwrap().len(), 56);
        assert_eq!(binomial_count(3, 5), 56);
    }

    #[test]
    fn graded_lex_order() {
        let b = MonomialBasis::new(2, 2).unwrap();
        let want: Vec<Vec<u32>> = vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]];
        assert_eq!(b.exponents(), &want[..]);
    }

    #[test]
    fn eval_matches_powi() {
        let b = MonomialBasis::new(3, 4).unwrap();
        let y = [0.3, -1.7, 2.1];
        let v = b.eval(&y);
        for (ex, got) in b.exponents().iter().zip(&v) {
            let want: f64 = ex.iter().zip(&y).map(|(&e, x)| x.powi(e as i32)).product();
            assert!((got - want).abs() <= 1e-14 * want.abs().max(1.0));
        }
    }
}
